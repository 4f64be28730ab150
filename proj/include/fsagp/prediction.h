#pragma once

#include "fsagp/fsa.h"
#include "fsagp/krylov.h"
#include "fsagp/preconditioners.h"
#include "fsagp/types.h"

namespace fsagp {

// Cross covariance pieces between the training model and a prediction set:
// inducing-to-prediction block plus the tapered residual cross block.
struct PredictionSet {
  LocationSet locs;     // n_p prediction locations
  den_mat_t sigma_mnp;  // m x n_p
  den_mat_t C;          // Sigma_m^{-1} sigma_mnp
  sp_mat_t sigma_s_np;  // n x n_p, (Sigma - Sigma_l) o T cross block

  Eigen::Index np() const { return locs.size(); }
};

PredictionSet make_prediction_set(const FsaModel& model, LocationSet pred_locs);

// Cross covariance (no nugget) applied from the left: Sigma_np^T u.
vec_t cross_apply_t(const FsaModel& model, const PredictionSet& pred, const vec_t& u);

// Predictive mean of the latent cross term, Sigma_np^T Sigma^{-1} resid;
// fixed effects are added by the caller.
vec_t predict_mean_exact(FsaModel& model, const PredictionSet& pred, const vec_t& resid);
vec_t predict_mean_iterative(FsaModel& model, const PredictionSet& pred,
                             const vec_t& resid, const Preconditioner& P,
                             const CgOptions& cg);

struct PredVarResult {
  vec_t var;      // predictive variance of a new observation (nugget included)
  vec_t se;       // per-entry standard error; zero for deterministic backends
  int clamped = 0;
  int cg_iterations = 0;  // largest iteration count over the multi solves
};

// Cholesky-based predictive variances.
PredVarResult predict_var_exact(FsaModel& model, const PredictionSet& pred);

struct SimVarOptions {
  int num_probes = 1000;
  std::uint64_t seed = 0;
  CgOptions cg;      // solves with the full operator (FITC preconditioned)
  CgOptions cg_s;    // solves with the short-range block (Jacobi preconditioned)
  bool control_variate = false;
  double floor_rel = 1e-6;  // variances clamped below at floor_rel * sigma2
};

// Simulation-based predictive variances: the three cross-term diagonals are
// computed deterministically through preconditioned CG, the short-range
// quadratic diagonal stochastically with Rademacher probes.
PredVarResult predict_var_sim(FsaModel& model, const PredictionSet& pred,
                              const SimVarOptions& opts);

struct LanczosVarOptions {
  int rank = 50;
  bool full_reorth = false;
  CgOptions cg;
  CgOptions cg_s;
  double floor_rel = 1e-6;
};

// Low-rank alternative for the short-range quadratic diagonal: partial Lanczos
// tridiagonalization of the short-range block (rank 0 drops the term).
PredVarResult predict_var_lanczos(FsaModel& model, const PredictionSet& pred,
                                  const LanczosVarOptions& opts);

}  // namespace fsagp
