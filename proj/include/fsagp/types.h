#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

namespace fsagp {

using vec_t = Eigen::VectorXd;
using den_mat_t = Eigen::MatrixXd;
// Row-major so the raw arrays are CSR (row offsets / column indices / values).
using sp_mat_t = Eigen::SparseMatrix<double, Eigen::RowMajor>;
using sp_mat_cm_t = Eigen::SparseMatrix<double>;
using rng_t = std::mt19937_64;

// Thrown when a matrix that must be positive definite is not, when CG residuals
// diverge, or when a log-determinant quadrature meets a non-positive Ritz value.
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw std::invalid_argument(msg);
}

enum class MaternNu { nu_1_2, nu_3_2, nu_5_2 };

inline double matern_nu_value(MaternNu nu) {
  switch (nu) {
    case MaternNu::nu_1_2: return 0.5;
    case MaternNu::nu_3_2: return 1.5;
    case MaternNu::nu_5_2: return 2.5;
  }
  throw std::invalid_argument("unknown Matern smoothness");
}

inline MaternNu matern_nu_from_value(double nu) {
  if (nu == 0.5) return MaternNu::nu_1_2;
  if (nu == 1.5) return MaternNu::nu_3_2;
  if (nu == 2.5) return MaternNu::nu_5_2;
  throw std::invalid_argument("Matern smoothness must be one of 0.5, 1.5, 2.5");
}

struct KernelSpec {
  MaternNu nu = MaternNu::nu_3_2;
};

enum class TaperFamily { wendland1, wendland2 };

struct TaperSpec {
  TaperFamily family = TaperFamily::wendland2;
  double gamma = 0.1;  // support radius, entries vanish at distance >= gamma

  void validate() const { require(gamma > 0.0, "taper range gamma must be positive"); }
};

inline TaperFamily taper_family_from_string(const std::string& s) {
  if (s == "wendland1") return TaperFamily::wendland1;
  if (s == "wendland2") return TaperFamily::wendland2;
  throw std::invalid_argument("taper family must be wendland1 or wendland2");
}

inline std::string taper_family_to_string(TaperFamily f) {
  return f == TaperFamily::wendland1 ? "wendland1" : "wendland2";
}

// Covariance parameters. Gradient and Fisher entries are always ordered
// (sigma2, sigma1_2, rho); regression coefficients are handled separately.
struct CovParams {
  double sigma2 = 1.0;    // nugget variance
  double sigma1_2 = 1.0;  // marginal (signal) variance
  double rho = 0.1;       // range
  vec_t beta;             // length p, may be empty

  void validate() const {
    require(sigma2 > 0.0 && std::isfinite(sigma2), "sigma2 must be positive and finite");
    require(sigma1_2 > 0.0 && std::isfinite(sigma1_2), "sigma1_2 must be positive and finite");
    require(rho > 0.0 && std::isfinite(rho), "rho must be positive and finite");
  }

  Eigen::Vector3d cov_vector() const { return {sigma2, sigma1_2, rho}; }
  void set_cov_vector(const Eigen::Vector3d& v) {
    sigma2 = v[0];
    sigma1_2 = v[1];
    rho = v[2];
  }
};

inline constexpr int kNumCovParams = 3;
inline const char* cov_param_name(int which) {
  switch (which) {
    case 0: return "sigma2";
    case 1: return "sigma1_2";
    case 2: return "rho";
  }
  return "?";
}

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Counter-based probe stream: probe i of a batch is keyed by (seed, i) so the
// draw is identical regardless of batch size or evaluation order.
inline rng_t probe_rng(std::uint64_t seed, std::uint64_t probe_index) {
  return rng_t(splitmix64(splitmix64(seed) ^ splitmix64(probe_index + 0x51ed2701ULL)));
}

inline vec_t gaussian_vector(rng_t& rng, Eigen::Index n) {
  std::normal_distribution<double> N01(0.0, 1.0);
  vec_t z(n);
  for (Eigen::Index i = 0; i < n; ++i) z[i] = N01(rng);
  return z;
}

inline vec_t rademacher_vector(rng_t& rng, Eigen::Index n) {
  std::bernoulli_distribution coin(0.5);
  vec_t z(n);
  for (Eigen::Index i = 0; i < n; ++i) z[i] = coin(rng) ? 1.0 : -1.0;
  return z;
}

}  // namespace fsagp
