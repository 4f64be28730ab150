#include "fsagp/locations.h"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace fsagp {

LocationSet uniform_locations(Eigen::Index n, Eigen::Index d, std::uint64_t seed) {
  require(n > 0 && d > 0, "uniform_locations needs n > 0 and d > 0");
  rng_t rng(splitmix64(seed));
  std::uniform_real_distribution<double> U(0.0, 1.0);
  den_mat_t c(n, d);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index k = 0; k < d; ++k) c(i, k) = U(rng);
  return LocationSet(std::move(c));
}

GridIndex::GridIndex(const LocationSet& locs, double h) : locs_(locs), h_(h) {
  require(h > 0.0, "grid cell size must be positive");
  origin_ = locs.coords.colwise().minCoeff();
  cells_.reserve(static_cast<size_t>(locs.size()));
  for (int i = 0; i < locs.size(); ++i) {
    cells_[cell_key(locs.coords.row(i))].push_back(i);
  }
}

std::uint64_t GridIndex::cell_key(const Eigen::RowVectorXd& p) const {
  std::uint64_t key = 0xcbf29ce484222325ULL;
  for (Eigen::Index k = 0; k < p.size(); ++k) {
    auto cell = static_cast<std::int64_t>(std::floor((p[k] - origin_[k]) / h_));
    key = splitmix64(key ^ static_cast<std::uint64_t>(cell + 0x40000000LL));
  }
  return key;
}

void GridIndex::query(const Eigen::RowVectorXd& q, std::vector<int>* out) const {
  const Eigen::Index d = locs_.dim();
  std::vector<std::int64_t> base(d), offset(d, -1);
  for (Eigen::Index k = 0; k < d; ++k)
    base[k] = static_cast<std::int64_t>(std::floor((q[k] - origin_[k]) / h_));
  // Odometer over the 3^d neighborhood.
  Eigen::RowVectorXd probe(d);
  while (true) {
    std::uint64_t key = 0xcbf29ce484222325ULL;
    for (Eigen::Index k = 0; k < d; ++k) {
      key = splitmix64(key ^ static_cast<std::uint64_t>(base[k] + offset[k] + 0x40000000LL));
    }
    auto it = cells_.find(key);
    if (it != cells_.end()) {
      for (int i : it->second) {
        if ((locs_.coords.row(i) - q).norm() < h_) out->push_back(i);
      }
    }
    Eigen::Index k = 0;
    for (; k < d; ++k) {
      if (++offset[k] <= 1) break;
      offset[k] = -1;
    }
    if (k == d) break;
  }
}

KdTree::KdTree(const den_mat_t& pts) : pts_(pts) {
  if (pts_.rows() == 0) return;
  std::vector<int> idx(static_cast<size_t>(pts_.rows()));
  std::iota(idx.begin(), idx.end(), 0);
  nodes_.reserve(idx.size());
  root_ = build(idx, 0, static_cast<int>(idx.size()), 0);
}

int KdTree::build(std::vector<int>& idx, int lo, int hi, int depth) {
  if (lo >= hi) return -1;
  int axis = depth % static_cast<int>(pts_.cols());
  int mid = (lo + hi) / 2;
  std::nth_element(idx.begin() + lo, idx.begin() + mid, idx.begin() + hi,
                   [&](int a, int b) { return pts_(a, axis) < pts_(b, axis); });
  Node node;
  node.axis = axis;
  node.point = idx[mid];
  int self = static_cast<int>(nodes_.size());
  nodes_.push_back(node);
  int left = build(idx, lo, mid, depth + 1);
  int right = build(idx, mid + 1, hi, depth + 1);
  nodes_[self].left = left;
  nodes_[self].right = right;
  return self;
}

namespace {
struct HeapEntry {
  double dist;
  int index;
  bool operator<(const HeapEntry& o) const { return dist < o.dist; }
};
}  // namespace

std::vector<int> KdTree::knn(const Eigen::RowVectorXd& q, int k, int index_bound) const {
  std::vector<HeapEntry> heap;  // max-heap on distance, size <= k
  heap.reserve(static_cast<size_t>(k) + 1);

  auto consider = [&](int i) {
    if (i >= index_bound) return;
    double dist = (pts_.row(i) - q).norm();
    if (static_cast<int>(heap.size()) < k) {
      heap.push_back({dist, i});
      std::push_heap(heap.begin(), heap.end());
    } else if (dist < heap.front().dist) {
      std::pop_heap(heap.begin(), heap.end());
      heap.back() = {dist, i};
      std::push_heap(heap.begin(), heap.end());
    }
  };

  // Iterative depth-first descent with pruning on the splitting planes.
  std::vector<int> stack;
  if (root_ >= 0) stack.push_back(root_);
  while (!stack.empty()) {
    int ni = stack.back();
    stack.pop_back();
    if (ni < 0) continue;
    const Node& node = nodes_[static_cast<size_t>(ni)];
    consider(node.point);
    double delta = q[node.axis] - pts_(node.point, node.axis);
    int near = delta < 0 ? node.left : node.right;
    int far = delta < 0 ? node.right : node.left;
    bool full = static_cast<int>(heap.size()) >= k;
    if (far >= 0 && (!full || std::abs(delta) < heap.front().dist)) stack.push_back(far);
    if (near >= 0) stack.push_back(near);
  }

  std::sort(heap.begin(), heap.end());
  std::vector<int> out;
  out.reserve(heap.size());
  for (const auto& e : heap) out.push_back(e.index);
  return out;
}

sp_mat_t taper_pattern(const LocationSet& locs, double gamma) {
  require(gamma > 0.0, "taper range must be positive");
  const int n = static_cast<int>(locs.size());
  GridIndex grid(locs, gamma);
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(static_cast<size_t>(n) * 8);
  std::vector<int> hits;
  for (int i = 0; i < n; ++i) {
    hits.clear();
    grid.query(locs.coords.row(i), &hits);
    bool saw_diag = false;
    for (int j : hits) {
      double dist = (locs.coords.row(i) - locs.coords.row(j)).norm();
      trip.emplace_back(i, j, dist);
      if (j == i) saw_diag = true;
    }
    if (!saw_diag) trip.emplace_back(i, i, 0.0);
  }
  sp_mat_t pat(n, n);
  // setFromTriplets would sum duplicate zeros; keep values as assigned.
  pat.setFromTriplets(trip.begin(), trip.end(),
                      [](const double&, const double& b) { return b; });
  pat.makeCompressed();
  return pat;
}

sp_mat_t cross_taper_pattern(const LocationSet& rows, const LocationSet& cols, double gamma) {
  require(gamma > 0.0, "taper range must be positive");
  require(rows.dim() == cols.dim(), "point sets must share the dimension");
  GridIndex grid(cols, gamma);
  std::vector<Eigen::Triplet<double>> trip;
  std::vector<int> hits;
  for (int i = 0; i < rows.size(); ++i) {
    hits.clear();
    grid.query(rows.coords.row(i), &hits);
    for (int j : hits) {
      double dist = (rows.coords.row(i) - cols.coords.row(j)).norm();
      trip.emplace_back(i, static_cast<int>(j), dist);
    }
  }
  sp_mat_t pat(rows.size(), cols.size());
  pat.setFromTriplets(trip.begin(), trip.end(),
                      [](const double&, const double& b) { return b; });
  pat.makeCompressed();
  return pat;
}

double avg_row_nnz(const sp_mat_t& pattern) {
  return pattern.rows() == 0 ? 0.0
                             : static_cast<double>(pattern.nonZeros()) /
                                   static_cast<double>(pattern.rows());
}

double gamma_for_avg_row_nnz(Eigen::Index n, double target_row_nnz) {
  require(n > 0 && target_row_nnz >= 1.0, "need n > 0 and target >= 1");
  return std::sqrt(target_row_nnz / (static_cast<double>(n) * M_PI));
}

}  // namespace fsagp
