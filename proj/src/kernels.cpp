#include "fsagp/kernels.h"

#include <cmath>

namespace fsagp {

double matern(double d, MaternNu nu, double sigma1_2, double rho) {
  const double s = d / rho;
  switch (nu) {
    case MaternNu::nu_1_2:
      return sigma1_2 * std::exp(-s);
    case MaternNu::nu_3_2: {
      const double x = std::sqrt(3.0) * s;
      return sigma1_2 * (1.0 + x) * std::exp(-x);
    }
    case MaternNu::nu_5_2: {
      const double x = std::sqrt(5.0) * s;
      return sigma1_2 * (1.0 + x + x * x / 3.0) * std::exp(-x);
    }
  }
  throw std::invalid_argument("unknown Matern smoothness");
}

double matern_drho(double d, MaternNu nu, double sigma1_2, double rho) {
  const double s = d / rho;
  switch (nu) {
    case MaternNu::nu_1_2:
      return sigma1_2 * std::exp(-s) * d / (rho * rho);
    case MaternNu::nu_3_2: {
      const double x = std::sqrt(3.0) * s;
      return sigma1_2 * 3.0 * d * d / (rho * rho * rho) * std::exp(-x);
    }
    case MaternNu::nu_5_2: {
      const double x = std::sqrt(5.0) * s;
      return sigma1_2 * (5.0 * d * d / (3.0 * rho * rho * rho)) * (1.0 + x) * std::exp(-x);
    }
  }
  throw std::invalid_argument("unknown Matern smoothness");
}

double taper_value(double d, const TaperSpec& taper) {
  const double r = d / taper.gamma;
  if (r >= 1.0) return 0.0;
  const double omr = 1.0 - r;
  if (taper.family == TaperFamily::wendland1) {
    const double omr2 = omr * omr;
    return omr2 * omr2 * (1.0 + 4.0 * r);
  }
  const double omr2 = omr * omr;
  const double omr6 = omr2 * omr2 * omr2;
  return omr6 * (1.0 + 6.0 * r + 35.0 * r * r / 3.0);
}

den_mat_t cross_cov(const LocationSet& a, const LocationSet& b, KernelSpec kern,
                    const CovParams& params) {
  den_mat_t out(a.size(), b.size());
  for (Eigen::Index j = 0; j < b.size(); ++j) {
    for (Eigen::Index i = 0; i < a.size(); ++i) {
      out(i, j) = matern((a.coords.row(i) - b.coords.row(j)).norm(), kern.nu,
                         params.sigma1_2, params.rho);
    }
  }
  return out;
}

den_mat_t cross_cov_drho(const LocationSet& a, const LocationSet& b, KernelSpec kern,
                         const CovParams& params) {
  den_mat_t out(a.size(), b.size());
  for (Eigen::Index j = 0; j < b.size(); ++j) {
    for (Eigen::Index i = 0; i < a.size(); ++i) {
      out(i, j) = matern_drho((a.coords.row(i) - b.coords.row(j)).norm(), kern.nu,
                              params.sigma1_2, params.rho);
    }
  }
  return out;
}

double rho_for_correlation_at(double distance, double corr, MaternNu nu) {
  require(distance > 0.0, "distance must be positive");
  require(corr > 0.0 && corr < 1.0, "target correlation must lie in (0, 1)");
  double lo = distance * 1e-8, hi = distance * 1e8;
  for (int it = 0; it < 200; ++it) {
    double mid = std::sqrt(lo * hi);
    if (matern(distance, nu, 1.0, mid) < corr)
      lo = mid;
    else
      hi = mid;
  }
  return std::sqrt(lo * hi);
}

double effective_range(double rho, MaternNu nu) {
  require(rho > 0.0, "rho must be positive");
  double lo = 0.0, hi = rho * 100.0;
  for (int it = 0; it < 200; ++it) {
    double mid = 0.5 * (lo + hi);
    if (matern(mid, nu, 1.0, rho) > 0.05)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace fsagp
