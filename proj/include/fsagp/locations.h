#pragma once

#include <unordered_map>
#include <vector>

#include "fsagp/types.h"

namespace fsagp {

// Point set in R^d, one row per location.
struct LocationSet {
  den_mat_t coords;

  LocationSet() = default;
  explicit LocationSet(den_mat_t c) : coords(std::move(c)) {}

  Eigen::Index size() const { return coords.rows(); }
  Eigen::Index dim() const { return coords.cols(); }

  double dist(Eigen::Index i, const LocationSet& other, Eigen::Index j) const {
    return (coords.row(i) - other.coords.row(j)).norm();
  }
};

LocationSet uniform_locations(Eigen::Index n, Eigen::Index d, std::uint64_t seed);

// Uniform binning with cell edge h; lists all points within radius h of a query
// by scanning the 3^d surrounding cells.
class GridIndex {
 public:
  GridIndex(const LocationSet& locs, double h);

  // Indices i with ||x_i - q|| < h (strict). Appends to out.
  void query(const Eigen::RowVectorXd& q, std::vector<int>* out) const;

 private:
  std::uint64_t cell_key(const Eigen::RowVectorXd& p) const;

  const LocationSet& locs_;
  double h_;
  Eigen::RowVectorXd origin_;
  std::unordered_map<std::uint64_t, std::vector<int>> cells_;
};

// Static k-d tree over a point set. Queries may restrict candidates to points
// whose index is below a bound, which is what an ordered conditioning set needs.
class KdTree {
 public:
  explicit KdTree(const den_mat_t& pts);

  // k nearest points to q among indices < index_bound (pass pts.rows() for no
  // bound), sorted by increasing distance.
  std::vector<int> knn(const Eigen::RowVectorXd& q, int k, int index_bound) const;

 private:
  struct Node {
    int left = -1, right = -1;
    int axis = 0;
    int point = -1;  // leaf payload or split point
  };
  int build(std::vector<int>& idx, int lo, int hi, int depth);

  const den_mat_t pts_;
  std::vector<Node> nodes_;
  int root_ = -1;
};

// Symmetric taper support pattern: entries (i, j) with ||s_i - s_j|| < gamma,
// the full diagonal included. Stored values are the pairwise distances.
sp_mat_t taper_pattern(const LocationSet& locs, double gamma);

// Rectangular pattern between two point sets, same radius rule, no forced
// diagonal. Values are distances.
sp_mat_t cross_taper_pattern(const LocationSet& rows, const LocationSet& cols, double gamma);

// Average number of stored entries per row of a pattern.
double avg_row_nnz(const sp_mat_t& pattern);

// Taper range giving roughly the requested average row count for n points
// uniform on the unit square (area argument: n_target ~ n * pi * gamma^2).
double gamma_for_avg_row_nnz(Eigen::Index n, double target_row_nnz);

}  // namespace fsagp
