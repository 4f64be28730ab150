#pragma once

#include <Eigen/SparseCholesky>

#include <vector>

#include "fsagp/types.h"

namespace fsagp {

// Entries of A^{-1} on the filled pattern of a sparse LDL^T factor of A,
// computed by the Takahashi recurrences in O(sum_j |struct L(:,j)|^2).
// The filled pattern contains the pattern of A, which is all the exact
// gradient traces need.
class SelectedInverse {
 public:
  explicit SelectedInverse(const Eigen::SimplicialLDLT<sp_mat_cm_t>& ldlt);

  // A^{-1}(i, j) in original (unpermuted) indices; (i, j) must lie inside the
  // filled pattern.
  double entry(Eigen::Index i, Eigen::Index j) const;

  // sum over the stored entries of B of B_ij * A^{-1}(i, j). B's pattern must
  // be contained in A's pattern.
  double trace_product(const sp_mat_t& B) const;

  vec_t diagonal() const;

 private:
  double lower_entry(Eigen::Index r, Eigen::Index c) const;  // permuted, r >= c

  Eigen::Index n_ = 0;
  std::vector<Eigen::Index> perm_;     // original index -> permuted position
  std::vector<Eigen::Index> col_ptr_;  // CSC of the strictly-lower pattern of L
  std::vector<Eigen::Index> row_idx_;
  std::vector<double> val_;            // Z on that pattern
  vec_t diag_;                         // Z_jj, permuted order
};

}  // namespace fsagp
