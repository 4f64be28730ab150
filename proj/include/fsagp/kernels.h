#pragma once

#include "fsagp/locations.h"
#include "fsagp/types.h"

namespace fsagp {

// Matern covariance at distance d >= 0 (without nugget).
double matern(double d, MaternNu nu, double sigma1_2, double rho);

// d/drho of the Matern covariance at distance d.
double matern_drho(double d, MaternNu nu, double sigma1_2, double rho);

// Compactly supported Wendland correlation, zero at distance >= gamma,
// equal to one at distance zero.
double taper_value(double d, const TaperSpec& taper);

// Dense cross covariance, entry (i, j) = c(||a_i - b_j||).
den_mat_t cross_cov(const LocationSet& a, const LocationSet& b, KernelSpec kern,
                    const CovParams& params);

// Entrywise d/drho of cross_cov.
den_mat_t cross_cov_drho(const LocationSet& a, const LocationSet& b, KernelSpec kern,
                         const CovParams& params);

// Evaluate a scalar function of distance on the stored entries of a distance
// pattern (as produced by taper_pattern / cross_taper_pattern).
template <typename F>
sp_mat_t map_pattern(const sp_mat_t& dists, F&& f) {
  sp_mat_t out = dists;
  for (Eigen::Index r = 0; r < out.outerSize(); ++r) {
    for (sp_mat_t::InnerIterator it(out, r); it; ++it) {
      it.valueRef() = f(it.value());
    }
  }
  return out;
}

// Range for which the requested Matern correlation is attained at the given
// distance (bisection; corr in (0, 1)).
double rho_for_correlation_at(double distance, double corr, MaternNu nu);

// Distance at which the correlation drops to 0.05 for range rho.
double effective_range(double rho, MaternNu nu);

}  // namespace fsagp
