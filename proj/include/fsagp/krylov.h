#pragma once

#include <functional>
#include <vector>

#include "fsagp/preconditioners.h"
#include "fsagp/types.h"

namespace fsagp {

// Symmetric positive definite operator given by its action. apply_mat is
// optional; when absent, matrix arguments are processed column by column.
struct LinOp {
  Eigen::Index n = 0;
  std::function<vec_t(const vec_t&)> apply;
  std::function<den_mat_t(const den_mat_t&)> apply_mat;

  den_mat_t apply_dense(const den_mat_t& V) const {
    if (apply_mat) return apply_mat(V);
    den_mat_t out(V.rows(), V.cols());
    for (Eigen::Index j = 0; j < V.cols(); ++j) out.col(j) = apply(V.col(j));
    return out;
  }
};

LinOp fsa_operator(const FsaModel& model);

struct CgOptions {
  double tol = 1e-3;  // absolute two-norm of the unpreconditioned residual
  int max_iter = 1000;
  bool error_on_max_iter = false;
};

// Jacobi-style tridiagonal accumulated from the CG coefficients; diag has one
// entry per iteration, offdiag one fewer.
struct Tridiag {
  vec_t diag;
  vec_t offdiag;
};

struct CgResult {
  vec_t x;
  int iterations = 0;
  bool converged = false;
  double residual_norm = 0.0;
  Tridiag tridiag;
};

CgResult pcg_solve(const LinOp& A, const Preconditioner& P, const vec_t& b,
                   const CgOptions& opts);

struct CgMultiResult {
  den_mat_t X;
  std::vector<int> iterations;
  std::vector<bool> converged;
  std::vector<Tridiag> tridiags;
  int sweeps = 0;

  bool all_converged() const {
    for (bool c : converged)
      if (!c) return false;
    return true;
  }
  int max_iterations() const {
    int m = 0;
    for (int it : iterations) m = std::max(m, it);
    return m;
  }
};

// Lockstep multi right-hand-side PCG. Every column follows its own scalar
// recurrences and freezes once converged; batched mode shares BLAS3 matvecs,
// otherwise the operator is applied column by column exactly as pcg_solve.
CgMultiResult pcg_solve_multi(const LinOp& A, const Preconditioner& P, const den_mat_t& B,
                              const CgOptions& opts, bool batched = true);

// Gauss quadrature of log at the Lanczos tridiagonal: e1' log(T) e1.
double tridiag_log_quadrature(const Tridiag& T);

struct SlqOptions {
  int num_probes = 50;
  std::uint64_t seed = 0;
  CgOptions cg;
};

struct SlqResult {
  double logdet = 0.0;
  den_mat_t probes;  // z_i ~ N(0, P)
  den_mat_t solves;  // A^{-1} z_i (to CG tolerance)
  std::vector<Tridiag> tridiags;
  std::vector<int> iterations;
  bool all_converged = true;
};

// Preconditioned stochastic Lanczos quadrature estimate of log det(A),
// normalized by n/ell, plus log det(P).
SlqResult slq_logdet(const LinOp& A, const Preconditioner& P, const SlqOptions& opts);

enum class CvMode { none, one, optimal };

struct TraceEstimate {
  double value = 0.0;
  double c_hat = 0.0;
  double variance_of_mean = 0.0;
};

// Stochastic trace estimate of Tr(A^{-1} dA) from probes Z ~ N(0, P) and their
// solves W = A^{-1} Z: mean of w_i' dA P^{-1} z_i. With a control variate, the
// analogous preconditioner samples are recentered by the exact trace
// Tr(P^{-1} dP); c follows the requested mode (optimal = centered
// least-squares coefficient).
TraceEstimate ste_grad_trace(const den_mat_t& Z, const den_mat_t& W,
                             const std::function<den_mat_t(const den_mat_t&)>& dA_mat,
                             const Preconditioner& P, int which, CvMode mode);

struct StochasticDiag {
  vec_t diag;
  vec_t se;  // per-entry standard error of the estimate
};

// Rademacher diagonal estimator diag(A) ~ mean of z o A z. Exact in one probe
// for diagonal operators.
StochasticDiag stochastic_diag(const std::function<den_mat_t(const den_mat_t&)>& op_mat,
                               Eigen::Index n, int num_probes, std::uint64_t seed,
                               int batch = 256);

// Variance-reduced variant with an elementwise optimal coefficient: control
// operator B with known exact diagonal.
StochasticDiag stochastic_diag_cv(const std::function<den_mat_t(const den_mat_t&)>& op_mat,
                                  const std::function<den_mat_t(const den_mat_t&)>& control_mat,
                                  const vec_t& control_diag_exact, Eigen::Index n,
                                  int num_probes, std::uint64_t seed, int batch = 256);

struct LanczosResult {
  den_mat_t Q;  // n x k_eff, orthonormal
  Tridiag T;
  bool breakdown = false;
};

// Symmetric Lanczos with optional full reorthogonalization; stops early on
// breakdown.
LanczosResult lanczos(const LinOp& A, const vec_t& start, int k, bool full_reorth);

}  // namespace fsagp
