#pragma once

#include <functional>
#include <vector>

#include "fsagp/fsa.h"
#include "fsagp/inducing.h"
#include "fsagp/krylov.h"
#include "fsagp/preconditioners.h"
#include "fsagp/types.h"

namespace fsagp {

struct LbfgsOptions {
  int max_evals = 200;
  double grad_tol = 1e-6;  // infinity norm
  int memory = 6;
  double armijo_c1 = 1e-4;
  int max_backtracks = 30;
  double f_rel_tol = 1e-10;  // two consecutive accepted steps below this stop
};

struct LbfgsResult {
  vec_t x;
  double f = 0.0;
  vec_t grad;
  int evals = 0;
  bool converged = false;
};

// Objective returns f and fills grad (same size as x); may throw
// NumericalError for infeasible points, which the line search treats as +inf.
using LbfgsObjective = std::function<double(const vec_t&, vec_t&)>;

LbfgsResult lbfgs_minimize(const LbfgsObjective& fn, vec_t x0, const LbfgsOptions& opts);

// Generalized least squares coefficients from a covariance solve callback.
vec_t profile_beta(const den_mat_t& X, const vec_t& y,
                   const std::function<den_mat_t(const den_mat_t&)>& solve);

enum class FitBackend { exact, iterative };
enum class PrecondType { none, diagonal, fitc, pivchol };

std::string precond_type_name(PrecondType t);
PrecondType precond_type_from_string(const std::string& s);

struct FitOptions {
  FitBackend backend = FitBackend::iterative;
  KernelSpec kernel;
  TaperFamily taper_family = TaperFamily::wendland1;
  Eigen::Index num_inducing = 200;
  double taper_range = 0.0;      // when 0, derived from target_row_nnz
  double target_row_nnz = 40.0;
  PrecondType precond = PrecondType::fitc;
  Eigen::Index pivchol_rank = 50;
  int num_probes = 50;
  CvMode cv = CvMode::optimal;
  std::uint64_t seed = 0;        // inducing point selection and probes
  CgOptions cg;
  AssembleOptions assemble;
  LbfgsOptions opt;
  double grad_tol_per_n = 1e-3;  // scales the stopping tolerance with n
};

struct FitResult {
  CovParams params;
  vec_t beta;
  double nll = 0.0;
  int evals = 0;
  bool converged = false;
  LocationSet inducing;
  double gamma = 0.0;
  std::vector<double> nll_trace;
};

FitResult fit_fsa(const LocationSet& locs, const vec_t& y, const den_mat_t& X,
                  const FitOptions& opts);

// Builds the preconditioner requested for the model's full operator. The
// derivative plumbing is attached when available so control variates work.
std::unique_ptr<Preconditioner> make_preconditioner(FsaModel& model, PrecondType type,
                                                    Eigen::Index pivchol_rank = 50);

struct IterativeNllOptions {
  int num_probes = 50;
  std::uint64_t seed = 0;
  CgOptions cg;
  CvMode cv = CvMode::optimal;
};

struct IterativeNll {
  double nll = 0.0;
  Eigen::Vector3d grad = Eigen::Vector3d::Zero();
  vec_t beta;
  int cg_iterations = 0;
  double logdet = 0.0;
};

// One stochastic likelihood/gradient evaluation: probes, the data vector, and
// the fixed-effect columns share a single multi right-hand-side CG run.
IterativeNll iterative_nll_grad(FsaModel& model, const Preconditioner& P, const vec_t& y,
                                const den_mat_t& X, const IterativeNllOptions& opts,
                                bool want_grad = true);

struct Scores {
  double rmse = 0.0;
  double log_score = 0.0;
  double crps = 0.0;
};

Scores score_predictions(const vec_t& y_true, const vec_t& mean, const vec_t& var);

struct SimulateResult {
  vec_t y;
  vec_t latent;
};

// Exact draw from the dense model y = X beta + f + eps, f ~ N(0, Sigma).
SimulateResult simulate_gp(const LocationSet& locs, KernelSpec kern, const CovParams& params,
                           const den_mat_t& X, std::uint64_t seed,
                           Eigen::Index max_n = 20000);

// Draw from the approximated covariance (low-rank part plus sparse residual
// part plus nugget); linear in n up to the sparse factorization.
vec_t simulate_fsa(const FsaModel& model, const den_mat_t& X, const vec_t& beta,
                   std::uint64_t seed);

}  // namespace fsagp
