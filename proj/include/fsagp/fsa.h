#pragma once

#include <Eigen/SparseCholesky>

#include <memory>
#include <optional>

#include "fsagp/kernels.h"
#include "fsagp/locations.h"
#include "fsagp/selected_inverse.h"
#include "fsagp/types.h"

namespace fsagp {

struct AssembleOptions {
  double jitter_rel = 1e-10;        // jitter_rel * sigma1_2 added to the inducing block diagonal
  Eigen::Index exact_max_n = 20000; // factorized path refused above this size
};

// Factorized (exact) path: sparse LDL^T of the short-range block plus the m x m
// Woodbury core M = Sigma_m + Sigma_mn Sigma_s^{-1} Sigma_mn^T.
struct FsaExact {
  Eigen::SimplicialLDLT<sp_mat_cm_t> ldlt_s;
  double logdet_sigma_s = 0.0;
  den_mat_t S;  // Sigma_s^{-1} Sigma_mn^T, n x m
  den_mat_t M;
  Eigen::LLT<den_mat_t> chol_M;
  double logdet_M = 0.0;

  // lazy pieces for exact traces
  std::optional<den_mat_t> M_inv;
  std::optional<SelectedInverse> sel_inv;
  std::optional<den_mat_t> V0;   // Sigma^{-1} A^T, n x m
  std::optional<den_mat_t> G_M;  // A Sigma^{-1} A^T, m x m
};

// Full-scale approximated covariance  Sigma = Sigma_mn^T Sigma_m^{-1} Sigma_mn
// + (Sigma - Sigma_mn^T Sigma_m^{-1} Sigma_mn) o T(gamma) + sigma2 I,
// kept as a low-rank part plus a compactly supported sparse part.
class FsaModel {
 public:
  static FsaModel assemble(LocationSet locs, LocationSet inducing, KernelSpec kern,
                           TaperSpec taper, CovParams params, AssembleOptions opts = {});

  Eigen::Index n() const { return locs.size(); }
  Eigen::Index m() const { return inducing.size(); }

  vec_t matvec(const vec_t& v) const;
  den_mat_t matmat(const den_mat_t& V) const;

  // d/dtheta of the full operator applied to a vector; which indexes
  // (sigma2, sigma1_2, rho).
  vec_t deriv_matvec(int which, const vec_t& v);
  den_mat_t deriv_matmat(int which, const den_mat_t& V);

  // Sparse short-range derivative block (same pattern as sigma_s).
  const sp_mat_t& deriv_sigma_s(int which);
  // Dense derivative blocks; zero matrices for the nugget.
  const den_mat_t& deriv_sigma_m(int which);
  const den_mat_t& deriv_sigma_mn(int which);

  // Diagonal of the operator without the nugget (equals sigma1_2 up to clamping).
  vec_t diag_no_nugget() const;
  // Column of the operator without the nugget (used by low-rank preconditioners).
  vec_t column_no_nugget(Eigen::Index j) const;

  FsaExact& exact();
  bool has_exact() const { return exact_ != nullptr; }

  vec_t solve(const vec_t& b);              // Sigma^{-1} b via the factorized path
  den_mat_t solve_mat(const den_mat_t& B);
  double logdet();

  double nll(const vec_t& y, const den_mat_t& X, const vec_t& beta);
  // Gradient of the negative log likelihood wrt (sigma2, sigma1_2, rho).
  Eigen::Vector3d nll_grad(const vec_t& y, const den_mat_t& X, const vec_t& beta);

  LocationSet locs;
  LocationSet inducing;
  KernelSpec kernel;
  TaperSpec taper;
  CovParams params;
  AssembleOptions opts;

  den_mat_t sigma_m;   // with jitter
  Eigen::LLT<den_mat_t> chol_m;
  double logdet_sigma_m = 0.0;
  den_mat_t sigma_mn;  // m x n
  den_mat_t U;         // L_m^{-1} Sigma_mn
  den_mat_t A;         // Sigma_m^{-1} Sigma_mn
  vec_t lowrank_diag;  // column squared norms of U
  sp_mat_t dists;      // taper support pattern with distances
  sp_mat_t sigma_s;    // tapered residual plus nugget diagonal
  Eigen::Index n_clamped = 0;  // diagonal residuals clamped at zero

 private:
  void ensure_rho_derivs();

  std::optional<sp_mat_t> d_sigma_s_[kNumCovParams];
  std::optional<den_mat_t> d_sigma_m_[kNumCovParams];
  std::optional<den_mat_t> d_sigma_mn_[kNumCovParams];
  std::optional<den_mat_t> w2_rho_;  // dSigma_m/drho * A
  std::shared_ptr<FsaExact> exact_;
};

// Stochastic Fisher information (expected, covariance parameters only).
struct FisherOptions {
  int num_probes = 50;
  std::uint64_t seed = 0;
  bool rademacher = false;
};
den_mat_t fisher_ste(FsaModel& model, const FisherOptions& opts);

}  // namespace fsagp
