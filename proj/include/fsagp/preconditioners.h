#pragma once

#include <array>
#include <functional>
#include <memory>
#include <string>

#include "fsagp/fsa.h"
#include "fsagp/types.h"

namespace fsagp {

// Symmetric positive definite preconditioner P. Implementations must provide
// solves with P, its log determinant, and exact sampling from N(0, P); the
// optional derivative hooks enable control-variate trace corrections.
class Preconditioner {
 public:
  virtual ~Preconditioner() = default;

  virtual Eigen::Index size() const = 0;
  virtual std::string name() const = 0;
  virtual vec_t solve(const vec_t& r) const = 0;
  virtual den_mat_t solve_mat(const den_mat_t& R) const;
  virtual double logdet() const = 0;
  virtual vec_t sample(rng_t& rng) const = 0;

  // Probe i is keyed by (seed, i) and therefore independent of batch layout.
  den_mat_t sample_probes(int num_probes, std::uint64_t seed) const;

  virtual bool has_derivs() const { return false; }
  virtual vec_t deriv_apply(int /*which*/, const vec_t& /*v*/) const {
    throw std::invalid_argument("preconditioner has no derivative support");
  }
  virtual double deriv_trace(int /*which*/) const {
    throw std::invalid_argument("preconditioner has no derivative support");
  }
};

class IdentityPrecond final : public Preconditioner {
 public:
  explicit IdentityPrecond(Eigen::Index n, bool rademacher_probes = true)
      : n_(n), rademacher_(rademacher_probes) {}
  Eigen::Index size() const override { return n_; }
  std::string name() const override { return "none"; }
  vec_t solve(const vec_t& r) const override { return r; }
  den_mat_t solve_mat(const den_mat_t& R) const override { return R; }
  double logdet() const override { return 0.0; }
  vec_t sample(rng_t& rng) const override {
    return rademacher_ ? rademacher_vector(rng, n_) : gaussian_vector(rng, n_);
  }

 private:
  Eigen::Index n_;
  bool rademacher_;
};

class DiagPrecond final : public Preconditioner {
 public:
  explicit DiagPrecond(vec_t d, std::array<vec_t, kNumCovParams> d_derivs = {});
  Eigen::Index size() const override { return d_.size(); }
  std::string name() const override { return "diagonal"; }
  vec_t solve(const vec_t& r) const override { return r.cwiseQuotient(d_); }
  den_mat_t solve_mat(const den_mat_t& R) const override {
    return d_.cwiseInverse().asDiagonal() * R;
  }
  double logdet() const override { return d_.array().log().sum(); }
  vec_t sample(rng_t& rng) const override {
    return sqrt_d_.cwiseProduct(gaussian_vector(rng, d_.size()));
  }
  bool has_derivs() const override { return has_derivs_; }
  vec_t deriv_apply(int which, const vec_t& v) const override;
  double deriv_trace(int which) const override;

 private:
  vec_t d_, sqrt_d_;
  std::array<vec_t, kNumCovParams> d_derivs_;
  bool has_derivs_ = false;
};

// P = Sigma_mn^T Sigma_m^{-1} Sigma_mn + D with diagonal D. Solves and the log
// determinant go through the m x m core Sigma_m + Sigma_mn D^{-1} Sigma_mn^T;
// exact samples are Sigma_mn^T L_m^{-T} e1 + D^{1/2} e2.
class FitcPrecond final : public Preconditioner {
 public:
  FitcPrecond(den_mat_t sigma_m, den_mat_t sigma_mn, vec_t d);

  // FITC preconditioner of an assembled model: D = diag(sigma_s). When
  // with_derivs is set, the pieces for d/dtheta traces are materialized.
  static std::unique_ptr<FitcPrecond> from_fsa(FsaModel& model, bool with_derivs = false);

  Eigen::Index size() const override { return d_.size(); }
  std::string name() const override { return "fitc"; }
  vec_t solve(const vec_t& r) const override;
  den_mat_t solve_mat(const den_mat_t& R) const override;
  double logdet() const override { return logdet_; }
  vec_t sample(rng_t& rng) const override;
  bool has_derivs() const override { return has_derivs_; }
  vec_t deriv_apply(int which, const vec_t& v) const override;
  double deriv_trace(int which) const override;

 private:
  den_mat_t sigma_m_, sigma_mn_;
  vec_t d_, sqrt_d_;
  Eigen::LLT<den_mat_t> chol_m_;     // of sigma_m
  Eigen::LLT<den_mat_t> chol_core_;  // of sigma_m + sigma_mn D^{-1} sigma_mn^T
  double logdet_ = 0.0;

  bool has_derivs_ = false;
  den_mat_t A_;  // sigma_m^{-1} sigma_mn
  std::array<vec_t, kNumCovParams> d_diag_;
  std::array<den_mat_t, kNumCovParams> d_sigma_mn_, d_sigma_m_;
  vec_t pinv_diag_;        // diag(P^{-1})
  mutable std::optional<den_mat_t> V0_;   // P^{-1} A^T
  mutable std::optional<den_mat_t> G_M_;  // A P^{-1} A^T
};

// Greedy partial pivoted Cholesky of a PSD matrix given its diagonal and a
// column oracle; returns L with as many columns as reached.
den_mat_t pivoted_cholesky(vec_t diag, const std::function<vec_t(Eigen::Index)>& column,
                           Eigen::Index max_rank, double rel_tol = 1e-12);

// P = L L^T + sigma2 I from a partial pivoted Cholesky of the operator
// without its nugget.
class PivCholPrecond final : public Preconditioner {
 public:
  PivCholPrecond(den_mat_t L, double sigma2);

  static std::unique_ptr<PivCholPrecond> from_fsa(FsaModel& model, Eigen::Index rank);

  Eigen::Index size() const override { return L_.rows(); }
  std::string name() const override { return "pivoted_cholesky"; }
  vec_t solve(const vec_t& r) const override;
  den_mat_t solve_mat(const den_mat_t& R) const override;
  double logdet() const override { return logdet_; }
  vec_t sample(rng_t& rng) const override;

 private:
  den_mat_t L_;  // n x k
  double sigma2_;
  Eigen::LLT<den_mat_t> chol_core_;  // of I + L^T L / sigma2
  double logdet_ = 0.0;
};

}  // namespace fsagp
