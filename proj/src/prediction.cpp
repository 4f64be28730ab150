#include "fsagp/prediction.h"

#include <cmath>

namespace fsagp {

PredictionSet make_prediction_set(const FsaModel& model, LocationSet pred_locs) {
  require(pred_locs.size() > 0, "prediction: empty location set");
  require(pred_locs.dim() == model.locs.dim(), "prediction: dimension mismatch");
  PredictionSet pred;
  pred.locs = std::move(pred_locs);
  pred.sigma_mnp = cross_cov(model.inducing, pred.locs, model.kernel, model.params);
  pred.C = model.chol_m.solve(pred.sigma_mnp);
  den_mat_t Up = model.chol_m.matrixL().solve(pred.sigma_mnp);

  sp_mat_t cross = cross_taper_pattern(model.locs, pred.locs, model.taper.gamma);
  for (Eigen::Index r = 0; r < cross.outerSize(); ++r) {
    for (sp_mat_t::InnerIterator it(cross, r); it; ++it) {
      const double d = it.value();
      const double resid = matern(d, model.kernel.nu, model.params.sigma1_2, model.params.rho) -
                           model.U.col(r).dot(Up.col(it.col()));
      it.valueRef() = resid * taper_value(d, model.taper);
    }
  }
  pred.sigma_s_np = std::move(cross);
  return pred;
}

vec_t cross_apply_t(const FsaModel& model, const PredictionSet& pred, const vec_t& u) {
  return pred.sigma_s_np.transpose() * u + pred.C.transpose() * (model.sigma_mn * u);
}

vec_t predict_mean_exact(FsaModel& model, const PredictionSet& pred, const vec_t& resid) {
  return cross_apply_t(model, pred, model.solve(resid));
}

vec_t predict_mean_iterative(FsaModel& model, const PredictionSet& pred,
                             const vec_t& resid, const Preconditioner& P,
                             const CgOptions& cg) {
  CgResult sol = pcg_solve(fsa_operator(model), P, resid, cg);
  if (!sol.converged) throw NumericalError("prediction: cg did not converge");
  return cross_apply_t(model, pred, sol.x);
}

PredVarResult predict_var_exact(FsaModel& model, const PredictionSet& pred) {
  FsaExact& ex = model.exact();
  const double prior = model.params.sigma1_2 + model.params.sigma2;

  den_mat_t F = model.sigma_mn.transpose() * pred.C;
  F += pred.sigma_s_np;
  den_mat_t G = ex.ldlt_s.solve(F);
  den_mat_t Hm = model.sigma_mn * G;
  den_mat_t LHm = ex.chol_M.matrixL().solve(Hm);

  PredVarResult out;
  out.var = (prior - (F.array() * G.array()).colwise().sum().transpose() +
             LHm.array().square().colwise().sum().transpose())
                .matrix();
  out.se = vec_t::Zero(pred.np());
  return out;
}

namespace {

// Shared deterministic diagonals of the predictive variance decomposition.
struct DetPieces {
  vec_t d1, d2, d3;
  den_mat_t X2;  // Sigma_s^{-1} Sigma_mn^T, reused by callers via cg_s solves
  int cg_iterations = 0;
};

DetPieces deterministic_pieces(FsaModel& model, const PredictionSet& pred,
                               const CgOptions& cg, const CgOptions& cg_s) {
  DetPieces out;
  const Eigen::Index np = pred.np();

  LinOp op = fsa_operator(model);
  auto fitc = FitcPrecond::from_fsa(model, false);
  CgMultiResult x1 = pcg_solve_multi(op, *fitc, model.sigma_mn.transpose(), cg, true);
  if (!x1.all_converged()) throw NumericalError("prediction: cg did not converge");
  out.cg_iterations = x1.max_iterations();

  den_mat_t K1 = model.sigma_mn * x1.X;  // m x m
  den_mat_t CtK = pred.C.transpose() * K1;
  out.d1 = (CtK.array() * pred.C.transpose().array()).rowwise().sum().matrix();

  den_mat_t Z2 = pred.sigma_s_np.transpose() * x1.X;  // np x m
  out.d2 = (Z2.array() * pred.C.transpose().array()).rowwise().sum().matrix();

  LinOp op_s;
  op_s.n = model.n();
  op_s.apply = [&model](const vec_t& v) { return vec_t(model.sigma_s * v); };
  op_s.apply_mat = [&model](const den_mat_t& V) { return den_mat_t(model.sigma_s * V); };
  DiagPrecond jacobi(model.sigma_s.diagonal());
  CgMultiResult x2 = pcg_solve_multi(op_s, jacobi, model.sigma_mn.transpose(), cg_s, true);
  if (!x2.all_converged()) throw NumericalError("prediction: cg did not converge");
  out.cg_iterations = std::max(out.cg_iterations, x2.max_iterations());
  out.X2 = std::move(x2.X);

  den_mat_t M = model.sigma_m + model.sigma_mn * out.X2;
  Eigen::LLT<den_mat_t> chol_M(0.5 * (M + M.transpose()));
  if (chol_M.info() != Eigen::Success)
    throw NumericalError("prediction: core matrix is not positive definite");
  den_mat_t Z3 = out.X2.transpose() * pred.sigma_s_np;  // m x np
  den_mat_t LZ3 = chol_M.matrixL().solve(Z3);
  out.d3 = LZ3.array().square().colwise().sum().transpose().matrix();

  (void)np;
  return out;
}

PredVarResult combine_pieces(const FsaModel& model, const DetPieces& det, const vec_t& d_ell,
                             const vec_t& d_ell_se, double floor_rel) {
  PredVarResult out;
  const double prior = model.params.sigma1_2 + model.params.sigma2;
  out.var = (prior - det.d1.array() - 2.0 * det.d2.array() + det.d3.array() - d_ell.array()).matrix();
  out.se = d_ell_se;
  out.cg_iterations = det.cg_iterations;
  const double floor = model.params.sigma2 * floor_rel;
  for (Eigen::Index j = 0; j < out.var.size(); ++j) {
    if (out.var(j) < floor) {
      out.var(j) = floor;
      ++out.clamped;
    }
  }
  return out;
}

}  // namespace

PredVarResult predict_var_sim(FsaModel& model, const PredictionSet& pred,
                              const SimVarOptions& opts) {
  DetPieces det = deterministic_pieces(model, pred, opts.cg, opts.cg_s);

  LinOp op_s;
  op_s.n = model.n();
  op_s.apply = [&model](const vec_t& v) { return vec_t(model.sigma_s * v); };
  op_s.apply_mat = [&model](const den_mat_t& V) { return den_mat_t(model.sigma_s * V); };
  DiagPrecond jacobi(model.sigma_s.diagonal());

  int max_it = det.cg_iterations;
  auto quad_mat = [&](const den_mat_t& Z) {
    den_mat_t G = pred.sigma_s_np * Z;
    CgMultiResult sol = pcg_solve_multi(op_s, jacobi, G, opts.cg_s, true);
    if (!sol.all_converged()) throw NumericalError("prediction: cg did not converge");
    max_it = std::max(max_it, sol.max_iterations());
    return den_mat_t(pred.sigma_s_np.transpose() * sol.X);
  };

  StochasticDiag sd;
  if (opts.control_variate) {
    vec_t ds = model.sigma_s.diagonal();
    auto control_mat = [&](const den_mat_t& Z) {
      den_mat_t G = pred.sigma_s_np * Z;
      G.array().colwise() /= ds.array();
      return den_mat_t(pred.sigma_s_np.transpose() * G);
    };
    vec_t control_diag = vec_t::Zero(pred.np());
    for (Eigen::Index r = 0; r < pred.sigma_s_np.outerSize(); ++r) {
      for (sp_mat_t::InnerIterator it(pred.sigma_s_np, r); it; ++it)
        control_diag(it.col()) += it.value() * it.value() / ds(r);
    }
    sd = stochastic_diag_cv(quad_mat, control_mat, control_diag, pred.np(), opts.num_probes,
                            opts.seed);
  } else {
    sd = stochastic_diag(quad_mat, pred.np(), opts.num_probes, opts.seed);
  }

  PredVarResult out = combine_pieces(model, det, sd.diag, sd.se, opts.floor_rel);
  out.cg_iterations = max_it;
  return out;
}

PredVarResult predict_var_lanczos(FsaModel& model, const PredictionSet& pred,
                                  const LanczosVarOptions& opts) {
  DetPieces det = deterministic_pieces(model, pred, opts.cg, opts.cg_s);

  vec_t d_ell = vec_t::Zero(pred.np());
  if (opts.rank > 0) {
    LinOp op_s;
    op_s.n = model.n();
    op_s.apply = [&model](const vec_t& v) { return vec_t(model.sigma_s * v); };
    vec_t start = vec_t::Ones(model.n());
    LanczosResult lz = lanczos(op_s, start, opts.rank, opts.full_reorth);

    den_mat_t W = lz.Q.transpose() * pred.sigma_s_np;  // k x np
    const Eigen::Index k = lz.T.diag.size();
    den_mat_t T = den_mat_t::Zero(k, k);
    T.diagonal() = lz.T.diag;
    if (k > 1) {
      T.diagonal(1) = lz.T.offdiag;
      T.diagonal(-1) = lz.T.offdiag;
    }
    Eigen::LDLT<den_mat_t> tld(T);
    if (tld.info() != Eigen::Success)
      throw NumericalError("prediction: tridiagonal factorization failed");
    den_mat_t Y = tld.solve(W);
    d_ell = (W.array() * Y.array()).colwise().sum().transpose().matrix();
  }

  return combine_pieces(model, det, d_ell, vec_t::Zero(pred.np()), opts.floor_rel);
}

}  // namespace fsagp
