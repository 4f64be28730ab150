#include "fsagp/fsa.h"

#include <cmath>

namespace fsagp {

FsaModel FsaModel::assemble(LocationSet locs, LocationSet inducing, KernelSpec kern,
                            TaperSpec taper, CovParams params, AssembleOptions opts) {
  params.validate();
  taper.validate();
  require(locs.size() > 0, "empty location set");
  require(inducing.size() > 0, "empty inducing set");
  require(locs.dim() == inducing.dim(), "location sets must share the dimension");

  FsaModel model;
  model.locs = std::move(locs);
  model.inducing = std::move(inducing);
  model.kernel = kern;
  model.taper = taper;
  model.params = params;
  model.opts = opts;

  const double jitter = opts.jitter_rel * params.sigma1_2;
  model.sigma_m = cross_cov(model.inducing, model.inducing, kern, params);
  model.sigma_m.diagonal().array() += jitter;
  model.chol_m.compute(model.sigma_m);
  if (model.chol_m.info() != Eigen::Success)
    throw NumericalError("inducing covariance is not positive definite");
  model.logdet_sigma_m =
      2.0 * model.chol_m.matrixLLT().diagonal().array().log().sum();

  model.sigma_mn = cross_cov(model.inducing, model.locs, kern, params);
  model.U = model.chol_m.matrixL().solve(model.sigma_mn);
  model.A = model.chol_m.matrixU().solve(model.U);
  model.lowrank_diag = model.U.colwise().squaredNorm();

  model.dists = taper_pattern(model.locs, taper.gamma);
  model.sigma_s = model.dists;
  for (Eigen::Index r = 0; r < model.sigma_s.outerSize(); ++r) {
    for (sp_mat_t::InnerIterator it(model.sigma_s, r); it; ++it) {
      const auto c = it.col();
      if (r == c) {
        double resid = params.sigma1_2 - model.lowrank_diag[r];
        if (resid < 0.0) {
          resid = 0.0;
          ++model.n_clamped;
        }
        it.valueRef() = resid + params.sigma2;
      } else {
        const double d = it.value();
        it.valueRef() = (matern(d, kern.nu, params.sigma1_2, params.rho) -
                         model.U.col(r).dot(model.U.col(c))) *
                        taper_value(d, taper);
      }
    }
  }
  return model;
}

vec_t FsaModel::matvec(const vec_t& v) const {
  require(v.size() == n(), "vector length mismatch");
  return sigma_s * v + sigma_mn.transpose() * (A * v);
}

den_mat_t FsaModel::matmat(const den_mat_t& V) const {
  require(V.rows() == n(), "matrix row mismatch");
  return sigma_s * V + sigma_mn.transpose() * (A * V);
}

const den_mat_t& FsaModel::deriv_sigma_m(int which) {
  require(which >= 0 && which < kNumCovParams, "parameter index out of range");
  auto& slot = d_sigma_m_[which];
  if (!slot) {
    if (which == 0) {
      slot = den_mat_t::Zero(m(), m());
    } else if (which == 1) {
      // sigma_m (jitter included) scales linearly in the marginal variance
      slot = sigma_m / params.sigma1_2;
    } else {
      slot = cross_cov_drho(inducing, inducing, kernel, params);
    }
  }
  return *slot;
}

const den_mat_t& FsaModel::deriv_sigma_mn(int which) {
  require(which >= 0 && which < kNumCovParams, "parameter index out of range");
  auto& slot = d_sigma_mn_[which];
  if (!slot) {
    if (which == 0) {
      slot = den_mat_t::Zero(m(), n());
    } else if (which == 1) {
      slot = sigma_mn / params.sigma1_2;
    } else {
      slot = cross_cov_drho(inducing, locs, kernel, params);
    }
  }
  return *slot;
}

void FsaModel::ensure_rho_derivs() {
  if (d_sigma_s_[2]) return;
  const den_mat_t& P1 = deriv_sigma_mn(2);
  if (!w2_rho_) w2_rho_ = deriv_sigma_m(2) * A;
  const den_mat_t& W2 = *w2_rho_;

  sp_mat_t d = dists;
  for (Eigen::Index r = 0; r < d.outerSize(); ++r) {
    for (sp_mat_t::InnerIterator it(d, r); it; ++it) {
      const auto c = it.col();
      const double dl = P1.col(r).dot(A.col(c)) + A.col(r).dot(P1.col(c)) -
                        A.col(r).dot(W2.col(c));
      if (r == c) {
        const bool clamped = params.sigma1_2 - lowrank_diag[r] < 0.0;
        it.valueRef() = clamped ? 0.0 : -dl;
      } else {
        const double dist = it.value();
        it.valueRef() = (matern_drho(dist, kernel.nu, params.sigma1_2, params.rho) - dl) *
                        taper_value(dist, taper);
      }
    }
  }
  d_sigma_s_[2] = std::move(d);
}

const sp_mat_t& FsaModel::deriv_sigma_s(int which) {
  require(which >= 0 && which < kNumCovParams, "parameter index out of range");
  auto& slot = d_sigma_s_[which];
  if (!slot) {
    if (which == 0) {
      sp_mat_t eye(n(), n());
      eye.setIdentity();
      slot = std::move(eye);
    } else if (which == 1) {
      sp_mat_t d = sigma_s;
      for (Eigen::Index i = 0; i < n(); ++i) d.coeffRef(i, i) -= params.sigma2;
      d /= params.sigma1_2;
      slot = std::move(d);
    } else {
      ensure_rho_derivs();
    }
  }
  return *slot;
}

vec_t FsaModel::deriv_matvec(int which, const vec_t& v) {
  require(v.size() == n(), "vector length mismatch");
  switch (which) {
    case 0:
      return v;
    case 1:
      return (sigma_s * v - params.sigma2 * v + sigma_mn.transpose() * (A * v)) /
             params.sigma1_2;
    case 2: {
      ensure_rho_derivs();
      const den_mat_t& P1 = *d_sigma_mn_[2];
      const den_mat_t& W2 = *w2_rho_;
      return *d_sigma_s_[2] * v + P1.transpose() * (A * v) + A.transpose() * (P1 * v) -
             A.transpose() * (W2 * v);
    }
  }
  throw std::invalid_argument("parameter index out of range");
}

den_mat_t FsaModel::deriv_matmat(int which, const den_mat_t& V) {
  require(V.rows() == n(), "matrix row mismatch");
  switch (which) {
    case 0:
      return V;
    case 1:
      return (sigma_s * V - params.sigma2 * V + sigma_mn.transpose() * (A * V)) /
             params.sigma1_2;
    case 2: {
      ensure_rho_derivs();
      const den_mat_t& P1 = *d_sigma_mn_[2];
      const den_mat_t& W2 = *w2_rho_;
      return *d_sigma_s_[2] * V + P1.transpose() * (A * V) + A.transpose() * (P1 * V) -
             A.transpose() * (W2 * V);
    }
  }
  throw std::invalid_argument("parameter index out of range");
}

vec_t FsaModel::diag_no_nugget() const {
  return (sigma_s.diagonal().array() - params.sigma2 + lowrank_diag.array()).matrix();
}

vec_t FsaModel::column_no_nugget(Eigen::Index j) const {
  vec_t col = sigma_mn.transpose() * A.col(j);
  for (sp_mat_t::InnerIterator it(sigma_s, j); it; ++it) col[it.col()] += it.value();
  col[j] -= params.sigma2;
  return col;
}

FsaExact& FsaModel::exact() {
  if (exact_) return *exact_;
  require(n() <= opts.exact_max_n,
          "factorized path refused for this size; raise exact_max_n or use the "
          "iterative backend");
  auto ex = std::make_shared<FsaExact>();
  sp_mat_cm_t s_cm(sigma_s);
  ex->ldlt_s.compute(s_cm);
  if (ex->ldlt_s.info() != Eigen::Success)
    throw NumericalError("factorization of the short-range block failed");
  if ((ex->ldlt_s.vectorD().array() <= 0.0).any())
    throw NumericalError("short-range block is not positive definite");
  ex->logdet_sigma_s = ex->ldlt_s.vectorD().array().log().sum();
  ex->S = ex->ldlt_s.solve(den_mat_t(sigma_mn.transpose()));
  ex->M = sigma_m + sigma_mn * ex->S;
  ex->chol_M.compute(ex->M);
  if (ex->chol_M.info() != Eigen::Success)
    throw NumericalError("Woodbury core matrix is not positive definite");
  ex->logdet_M = 2.0 * ex->chol_M.matrixLLT().diagonal().array().log().sum();
  exact_ = std::move(ex);
  return *exact_;
}

vec_t FsaModel::solve(const vec_t& b) {
  require(b.size() == n(), "vector length mismatch");
  FsaExact& ex = exact();
  vec_t t = ex.ldlt_s.solve(b);
  return t - ex.S * ex.chol_M.solve(sigma_mn * t);
}

den_mat_t FsaModel::solve_mat(const den_mat_t& B) {
  require(B.rows() == n(), "matrix row mismatch");
  FsaExact& ex = exact();
  den_mat_t t = ex.ldlt_s.solve(B);
  return t - ex.S * ex.chol_M.solve(den_mat_t(sigma_mn * t));
}

double FsaModel::logdet() {
  FsaExact& ex = exact();
  return ex.logdet_M - logdet_sigma_m + ex.logdet_sigma_s;
}

double FsaModel::nll(const vec_t& y, const den_mat_t& X, const vec_t& beta) {
  require(y.size() == n(), "response length mismatch");
  require(X.rows() == n() || X.size() == 0, "design matrix row mismatch");
  require(X.cols() == beta.size(), "design/coefficient size mismatch");
  const vec_t r = X.size() == 0 ? y : vec_t(y - X * beta);
  const vec_t u = solve(r);
  constexpr double log2pi = 1.8378770664093454836;
  return 0.5 * (static_cast<double>(n()) * log2pi + logdet() + r.dot(u));
}

Eigen::Vector3d FsaModel::nll_grad(const vec_t& y, const den_mat_t& X, const vec_t& beta) {
  require(y.size() == n(), "response length mismatch");
  require(X.cols() == beta.size(), "design/coefficient size mismatch");
  const vec_t r = X.size() == 0 ? y : vec_t(y - X * beta);
  FsaExact& ex = exact();
  const vec_t u = solve(r);

  if (!ex.M_inv) ex.M_inv = ex.chol_M.solve(den_mat_t::Identity(m(), m()));
  if (!ex.sel_inv) ex.sel_inv.emplace(ex.ldlt_s);
  if (!ex.V0) ex.V0 = solve_mat(den_mat_t(A.transpose()));
  if (!ex.G_M) ex.G_M = A * (*ex.V0);

  Eigen::Vector3d grad;
  for (int k = 0; k < kNumCovParams; ++k) {
    double t_s1;
    den_mat_t Gk;
    if (k == 0) {
      t_s1 = ex.sel_inv->diagonal().sum();
      Gk = ex.S;
    } else {
      const sp_mat_t& dS = deriv_sigma_s(k);
      t_s1 = ex.sel_inv->trace_product(dS);
      Gk = dS * ex.S;
    }
    const den_mat_t Hk = ex.S.transpose() * Gk;
    const double t_s2 = ex.M_inv->cwiseProduct(Hk).sum();
    double t_low = 0.0;
    if (k > 0) {
      t_low = 2.0 * ex.V0->cwiseProduct(deriv_sigma_mn(k).transpose()).sum() -
              ex.G_M->cwiseProduct(deriv_sigma_m(k)).sum();
    }
    const double quad = u.dot(deriv_matvec(k, u));
    grad[k] = 0.5 * ((t_s1 - t_s2 + t_low) - quad);
  }
  return grad;
}

den_mat_t fisher_ste(FsaModel& model, const FisherOptions& opts) {
  require(opts.num_probes > 0, "need at least one probe");
  const Eigen::Index n = model.n();
  den_mat_t F = den_mat_t::Zero(kNumCovParams, kNumCovParams);
  for (int i = 0; i < opts.num_probes; ++i) {
    rng_t rng = probe_rng(opts.seed, static_cast<std::uint64_t>(i));
    const vec_t z = opts.rademacher ? rademacher_vector(rng, n) : gaussian_vector(rng, n);
    const vec_t w = model.solve(z);
    den_mat_t a(n, kNumCovParams), t(n, kNumCovParams);
    for (int k = 0; k < kNumCovParams; ++k) {
      a.col(k) = model.deriv_matvec(k, w);
      t.col(k) = model.solve(model.deriv_matvec(k, z));
    }
    F += a.transpose() * t;
  }
  F /= 2.0 * opts.num_probes;
  return 0.5 * (F + F.transpose());
}

}  // namespace fsagp
