#pragma once

#include "fsagp/locations.h"

namespace fsagp {

// m distinct data locations drawn uniformly without replacement.
LocationSet select_random(const LocationSet& locs, Eigen::Index m, std::uint64_t seed);

// kmeans++ seeding (squared-distance sampling) followed by Lloyd iterations,
// centroids snapped back to distinct data locations at the end.
struct KmeansOptions {
  int max_iter = 20;
  double rel_tol = 1e-4;  // stop when the SSE improves by less than this factor
};

LocationSet select_kmeanspp(const LocationSet& locs, Eigen::Index m, std::uint64_t seed,
                            const KmeansOptions& opts = {});

}  // namespace fsagp
