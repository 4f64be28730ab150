#include "fsagp/inducing.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

namespace fsagp {

LocationSet select_random(const LocationSet& locs, Eigen::Index m, std::uint64_t seed) {
  require(m >= 1 && m <= locs.size(), "need 1 <= m <= n");
  rng_t rng(splitmix64(seed));
  std::vector<Eigen::Index> idx(static_cast<size_t>(locs.size()));
  std::iota(idx.begin(), idx.end(), 0);
  // Partial Fisher-Yates: only the first m slots are needed.
  for (Eigen::Index i = 0; i < m; ++i) {
    std::uniform_int_distribution<Eigen::Index> pick(i, locs.size() - 1);
    std::swap(idx[static_cast<size_t>(i)], idx[static_cast<size_t>(pick(rng))]);
  }
  den_mat_t out(m, locs.dim());
  for (Eigen::Index i = 0; i < m; ++i) out.row(i) = locs.coords.row(idx[static_cast<size_t>(i)]);
  return LocationSet(std::move(out));
}

namespace {

std::vector<int> distinct_rows(const den_mat_t& coords) {
  std::vector<int> order(static_cast<size_t>(coords.rows()));
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    for (Eigen::Index k = 0; k < coords.cols(); ++k) {
      if (coords(a, k) != coords(b, k)) return coords(a, k) < coords(b, k);
    }
    return a < b;
  });
  std::vector<int> keep;
  keep.reserve(order.size());
  for (size_t t = 0; t < order.size(); ++t) {
    if (t == 0 || coords.row(order[t]) != coords.row(order[t - 1])) keep.push_back(order[t]);
  }
  std::sort(keep.begin(), keep.end());
  return keep;
}

}  // namespace

LocationSet select_kmeanspp(const LocationSet& locs, Eigen::Index m, std::uint64_t seed,
                            const KmeansOptions& opts) {
  require(m >= 1 && m <= locs.size(), "need 1 <= m <= n");
  const Eigen::Index d = locs.dim();
  const std::vector<int> pool = distinct_rows(locs.coords);
  const auto n_pool = static_cast<Eigen::Index>(pool.size());
  require(m <= n_pool, "m exceeds the number of distinct locations");

  rng_t rng(splitmix64(seed));
  den_mat_t centers(m, d);

  // Seeding: first center uniform over distinct points, then proportional to
  // the squared distance to the nearest chosen center.
  std::uniform_int_distribution<Eigen::Index> first(0, n_pool - 1);
  centers.row(0) = locs.coords.row(pool[static_cast<size_t>(first(rng))]);
  vec_t d2(n_pool);
  for (Eigen::Index i = 0; i < n_pool; ++i)
    d2[i] = (locs.coords.row(pool[static_cast<size_t>(i)]) - centers.row(0)).squaredNorm();
  for (Eigen::Index c = 1; c < m; ++c) {
    double total = d2.sum();
    Eigen::Index chosen = 0;
    if (total > 0.0) {
      std::uniform_real_distribution<double> U(0.0, total);
      double u = U(rng), acc = 0.0;
      for (Eigen::Index i = 0; i < n_pool; ++i) {
        acc += d2[i];
        if (u <= acc) {
          chosen = i;
          break;
        }
      }
    } else {
      chosen = first(rng) % n_pool;
    }
    centers.row(c) = locs.coords.row(pool[static_cast<size_t>(chosen)]);
    for (Eigen::Index i = 0; i < n_pool; ++i) {
      double dd = (locs.coords.row(pool[static_cast<size_t>(i)]) - centers.row(c)).squaredNorm();
      d2[i] = std::min(d2[i], dd);
    }
  }

  // Lloyd iterations on all points.
  const Eigen::Index n = locs.size();
  std::vector<Eigen::Index> assign(static_cast<size_t>(n), 0);
  double sse_prev = std::numeric_limits<double>::infinity();
  for (int it = 0; it < opts.max_iter; ++it) {
    double sse = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      double best = std::numeric_limits<double>::infinity();
      Eigen::Index best_c = 0;
      for (Eigen::Index c = 0; c < m; ++c) {
        double dd = (locs.coords.row(i) - centers.row(c)).squaredNorm();
        if (dd < best) {
          best = dd;
          best_c = c;
        }
      }
      assign[static_cast<size_t>(i)] = best_c;
      sse += best;
    }
    den_mat_t sums = den_mat_t::Zero(m, d);
    vec_t counts = vec_t::Zero(m);
    for (Eigen::Index i = 0; i < n; ++i) {
      sums.row(assign[static_cast<size_t>(i)]) += locs.coords.row(i);
      counts[assign[static_cast<size_t>(i)]] += 1.0;
    }
    for (Eigen::Index c = 0; c < m; ++c) {
      if (counts[c] > 0.0) centers.row(c) = sums.row(c) / counts[c];
    }
    if (sse_prev - sse <= opts.rel_tol * std::max(sse_prev, 1e-300)) break;
    sse_prev = sse;
  }

  // Snap each centroid to the nearest still-unused distinct data location.
  std::vector<char> used(static_cast<size_t>(n_pool), 0);
  den_mat_t snapped(m, d);
  for (Eigen::Index c = 0; c < m; ++c) {
    double best = std::numeric_limits<double>::infinity();
    Eigen::Index best_i = -1;
    for (Eigen::Index i = 0; i < n_pool; ++i) {
      if (used[static_cast<size_t>(i)]) continue;
      double dd = (locs.coords.row(pool[static_cast<size_t>(i)]) - centers.row(c)).squaredNorm();
      if (dd < best) {
        best = dd;
        best_i = i;
      }
    }
    used[static_cast<size_t>(best_i)] = 1;
    snapped.row(c) = locs.coords.row(pool[static_cast<size_t>(best_i)]);
  }
  return LocationSet(std::move(snapped));
}

}  // namespace fsagp
