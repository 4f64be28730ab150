#pragma once

#include <memory>
#include <vector>

#include "fsagp/kernels.h"
#include "fsagp/krylov.h"
#include "fsagp/preconditioners.h"
#include "fsagp/types.h"

namespace fsagp {

enum class VecchiaOrdering { given, random };

struct VecchiaOptions {
  int num_neighbors = 30;
  VecchiaOrdering ordering = VecchiaOrdering::random;
  std::uint64_t seed = 0;
};

// Ordered conditioning approximation Sigma_V^{-1} = B^T D^{-1} B with B unit
// lower triangular and D diagonal, stored in its own ordering; every method
// takes and returns vectors in the original index order.
struct VecchiaFactor {
  std::vector<int> perm;      // position -> original index
  std::vector<int> inv_perm;  // original index -> position
  sp_mat_t B;                 // unit lower triangular, explicit unit diagonal
  sp_mat_t Bt;
  vec_t D;

  Eigen::Index n() const { return D.size(); }
  double logdet_cov() const { return D.array().log().sum(); }

  den_mat_t permute(const den_mat_t& V) const;
  den_mat_t unpermute(const den_mat_t& V) const;

  den_mat_t cov_matmat(const den_mat_t& V) const;   // Sigma_V V
  den_mat_t prec_matmat(const den_mat_t& V) const;  // Sigma_V^{-1} V, exact
  vec_t cov_matvec(const vec_t& v) const { return cov_matmat(v); }
  vec_t prec_matvec(const vec_t& v) const { return prec_matmat(v); }
  vec_t sample(rng_t& rng) const;  // draw from N(0, Sigma_V)
};

// diag_add (original index order, may be empty) is added to the diagonal of
// the approximated covariance before conditioning.
VecchiaFactor build_vecchia(const LocationSet& locs, KernelSpec kern, const CovParams& params,
                            const VecchiaOptions& opts, const vec_t& diag_add = vec_t());

// Preconditioner for Sigma_V + W^{-1} from a second conditioning approximation
// of Sigma + W^{-1}; inverse application, log-determinant, and sampling are
// all exact and sparse.
class ObsVecchiaPrecond final : public Preconditioner {
 public:
  explicit ObsVecchiaPrecond(VecchiaFactor fac) : fac_(std::move(fac)) {}

  Eigen::Index size() const override { return fac_.n(); }
  std::string name() const override { return "obs_vecchia"; }
  vec_t solve(const vec_t& r) const override { return fac_.prec_matvec(r); }
  den_mat_t solve_mat(const den_mat_t& R) const override { return fac_.prec_matmat(R); }
  double logdet() const override { return fac_.logdet_cov(); }
  vec_t sample(rng_t& rng) const override { return fac_.sample(rng); }

  const VecchiaFactor& factor() const { return fac_; }

 private:
  VecchiaFactor fac_;
};

// FITC preconditioner for Sigma_V + W^{-1} built from inducing points on the
// untapered kernel.
std::unique_ptr<FitcPrecond> fitc_for_vecchia(const LocationSet& locs,
                                              const LocationSet& inducing, KernelSpec kern,
                                              const CovParams& params, const vec_t& w_inv_diag,
                                              double jitter_rel = 1e-10);

// Action of Sigma_V + W^{-1}.
LinOp vecchia_cov_operator(const VecchiaFactor& fac, const vec_t& w_inv_diag);

enum class VecchiaSolveRoute { precision, covariance };

// x = (Sigma_V^{-1} + W)^{-1} v. The precision route runs plain CG on the
// sparse operator B^T D^{-1} B + W; the covariance route uses
// x = W^{-1} (Sigma_V + W^{-1})^{-1} Sigma_V v with the given preconditioner.
vec_t solve_vecchia_system(const VecchiaFactor& fac, const vec_t& w_diag, const vec_t& v,
                           VecchiaSolveRoute route, const Preconditioner& P,
                           const CgOptions& cg, int* iterations = nullptr);

struct VecchiaSlqOptions {
  int num_probes = 50;
  std::uint64_t seed = 0;
  CgOptions cg;
};

// SLQ estimate of log det(Sigma_V + W^{-1}).
double vecchia_cov_logdet_slq(const VecchiaFactor& fac, const vec_t& w_inv_diag,
                              const Preconditioner& P, const VecchiaSlqOptions& opts);

// log det(Sigma_V^{-1} + W) through log det(Sigma_V + W^{-1}) + log det(W)
// - log det(Sigma_V).
double vecchia_prec_logdet_slq(const VecchiaFactor& fac, const vec_t& w_diag,
                               const Preconditioner& P, const VecchiaSlqOptions& opts);

// Marginal Gaussian likelihood with covariance Sigma_V + sigma2 I, solved and
// log-determined iteratively.
double vecchia_nll_latent(const VecchiaFactor& fac, double sigma2, const vec_t& resid,
                          const Preconditioner& P, const VecchiaSlqOptions& opts);

// Closed-form likelihood when the conditioning approximation is applied to the
// observable covariance Sigma + sigma2 I directly.
double vecchia_nll_observable(const VecchiaFactor& fac_obs, const vec_t& resid);

}  // namespace fsagp
