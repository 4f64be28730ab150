#include "fsagp/estimation.h"

#include <Eigen/SparseCholesky>
#include <cmath>
#include <deque>
#include <limits>

namespace fsagp {

LbfgsResult lbfgs_minimize(const LbfgsObjective& fn, vec_t x0, const LbfgsOptions& opts) {
  const Eigen::Index d = x0.size();
  require(d > 0, "lbfgs: empty start point");

  LbfgsResult res;
  res.x = std::move(x0);
  res.grad = vec_t::Zero(d);

  auto eval = [&](const vec_t& x, vec_t& g) {
    ++res.evals;
    try {
      return fn(x, g);
    } catch (const NumericalError&) {
      g.setZero();
      return std::numeric_limits<double>::infinity();
    }
  };

  res.f = eval(res.x, res.grad);
  if (!std::isfinite(res.f)) throw NumericalError("lbfgs: start point is infeasible");

  std::deque<vec_t> s_hist, y_hist;
  std::deque<double> rho_hist;
  int small_steps = 0;

  while (res.evals < opts.max_evals) {
    if (res.grad.lpNorm<Eigen::Infinity>() <= opts.grad_tol) {
      res.converged = true;
      break;
    }

    vec_t q = res.grad;
    std::vector<double> a(s_hist.size());
    for (int i = static_cast<int>(s_hist.size()) - 1; i >= 0; --i) {
      a[i] = rho_hist[i] * s_hist[i].dot(q);
      q -= a[i] * y_hist[i];
    }
    if (!s_hist.empty()) {
      const double gamma = s_hist.back().dot(y_hist.back()) / y_hist.back().squaredNorm();
      q *= gamma;
    }
    for (std::size_t i = 0; i < s_hist.size(); ++i) {
      const double b = rho_hist[i] * y_hist[i].dot(q);
      q += (a[i] - b) * s_hist[i];
    }
    vec_t dir = -q;
    double dg = dir.dot(res.grad);
    if (!(dg < 0.0)) {
      s_hist.clear();
      y_hist.clear();
      rho_hist.clear();
      dir = -res.grad;
      dg = -res.grad.squaredNorm();
    }

    const double wolfe_c2 = 0.9;
    double t = 1.0;
    double lo = 0.0;
    double hi = std::numeric_limits<double>::infinity();
    double f_new = std::numeric_limits<double>::infinity();
    vec_t x_new, g_new(d);
    bool accepted = false;
    double t_ok = 0.0, f_ok = 0.0;
    vec_t x_ok, g_ok;
    for (int bt = 0; bt < opts.max_backtracks && res.evals < opts.max_evals; ++bt) {
      x_new = res.x + t * dir;
      f_new = eval(x_new, g_new);
      if (!std::isfinite(f_new) || f_new > res.f + opts.armijo_c1 * t * dg) {
        hi = t;
      } else {
        if (t_ok == 0.0 || f_new < f_ok) {
          t_ok = t;
          f_ok = f_new;
          x_ok = x_new;
          g_ok = g_new;
        }
        if (g_new.dot(dir) < wolfe_c2 * dg) {
          lo = t;
        } else {
          accepted = true;
          break;
        }
      }
      t = std::isfinite(hi) ? 0.5 * (lo + hi) : 2.0 * t;
    }
    if (!accepted) {
      if (t_ok == 0.0) break;
      x_new = std::move(x_ok);
      f_new = f_ok;
      g_new = std::move(g_ok);
    }

    vec_t s = x_new - res.x;
    vec_t yv = g_new - res.grad;
    const double sy = s.dot(yv);
    if (sy > 1e-10 * s.norm() * yv.norm()) {
      s_hist.push_back(std::move(s));
      y_hist.push_back(std::move(yv));
      rho_hist.push_back(1.0 / sy);
      if (static_cast<int>(s_hist.size()) > opts.memory) {
        s_hist.pop_front();
        y_hist.pop_front();
        rho_hist.pop_front();
      }
    }

    const double f_drop = res.f - f_new;
    res.x = std::move(x_new);
    res.f = f_new;
    res.grad = g_new;
    if (f_drop <= opts.f_rel_tol * (std::abs(res.f) + 1.0)) {
      if (++small_steps >= 2) {
        res.converged = true;
        break;
      }
    } else {
      small_steps = 0;
    }
  }

  if (res.grad.lpNorm<Eigen::Infinity>() <= opts.grad_tol) res.converged = true;
  return res;
}

vec_t profile_beta(const den_mat_t& X, const vec_t& y,
                   const std::function<den_mat_t(const den_mat_t&)>& solve) {
  if (X.cols() == 0) return vec_t(0);
  den_mat_t SX = solve(X);
  den_mat_t G = X.transpose() * SX;
  return Eigen::LDLT<den_mat_t>(0.5 * (G + G.transpose())).solve(SX.transpose() * y);
}

std::string precond_type_name(PrecondType t) {
  switch (t) {
    case PrecondType::none: return "none";
    case PrecondType::diagonal: return "diagonal";
    case PrecondType::fitc: return "fitc";
    case PrecondType::pivchol: return "pivchol";
  }
  return "none";
}

PrecondType precond_type_from_string(const std::string& s) {
  if (s == "none") return PrecondType::none;
  if (s == "diagonal") return PrecondType::diagonal;
  if (s == "fitc") return PrecondType::fitc;
  if (s == "pivchol") return PrecondType::pivchol;
  throw std::invalid_argument("unknown preconditioner: " + s);
}

std::unique_ptr<Preconditioner> make_preconditioner(FsaModel& model, PrecondType type,
                                                    Eigen::Index pivchol_rank) {
  switch (type) {
    case PrecondType::none:
      return std::make_unique<IdentityPrecond>(model.n());
    case PrecondType::diagonal: {
      std::array<vec_t, kNumCovParams> derivs;
      for (int k = 0; k < kNumCovParams; ++k) derivs[static_cast<std::size_t>(k)] = model.deriv_sigma_s(k).diagonal();
      return std::make_unique<DiagPrecond>(model.sigma_s.diagonal(), std::move(derivs));
    }
    case PrecondType::fitc:
      return FitcPrecond::from_fsa(model, true);
    case PrecondType::pivchol:
      return PivCholPrecond::from_fsa(model, pivchol_rank);
  }
  throw std::invalid_argument("unknown preconditioner type");
}

IterativeNll iterative_nll_grad(FsaModel& model, const Preconditioner& P, const vec_t& y,
                                const den_mat_t& X, const IterativeNllOptions& opts,
                                bool want_grad) {
  const Eigen::Index n = model.n();
  const Eigen::Index p = X.cols();
  const int ell = opts.num_probes;
  require(y.size() == n && (p == 0 || X.rows() == n), "nll: shape mismatch");

  den_mat_t B(n, ell + 1 + p);
  B.leftCols(ell) = P.sample_probes(ell, opts.seed);
  B.col(ell) = y;
  if (p > 0) B.rightCols(p) = X;

  LinOp op = fsa_operator(model);
  CgMultiResult sol = pcg_solve_multi(op, P, B, opts.cg, true);
  if (!sol.all_converged()) throw NumericalError("nll: cg did not converge");

  IterativeNll out;
  out.cg_iterations = sol.max_iterations();

  double acc = 0.0;
  for (int i = 0; i < ell; ++i) acc += tridiag_log_quadrature(sol.tridiags[static_cast<std::size_t>(i)]);
  out.logdet = static_cast<double>(n) / static_cast<double>(ell) * acc + P.logdet();

  vec_t u = sol.X.col(ell);
  vec_t resid = y;
  if (p > 0) {
    den_mat_t SX = sol.X.rightCols(p);
    den_mat_t G = X.transpose() * SX;
    out.beta = Eigen::LDLT<den_mat_t>(0.5 * (G + G.transpose())).solve(SX.transpose() * y);
    u -= SX * out.beta;
    resid -= X * out.beta;
  } else {
    out.beta = vec_t(0);
  }

  constexpr double log2pi = 1.8378770664093454836;
  out.nll = 0.5 * (out.logdet + resid.dot(u) + static_cast<double>(n) * log2pi);

  if (want_grad) {
    den_mat_t Z = B.leftCols(ell);
    den_mat_t W = sol.X.leftCols(ell);
    for (int k = 0; k < kNumCovParams; ++k) {
      auto dmat = [&model, k](const den_mat_t& V) { return model.deriv_matmat(k, V); };
      TraceEstimate tr = ste_grad_trace(Z, W, dmat, P, k, opts.cv);
      out.grad(k) = 0.5 * (tr.value - u.dot(model.deriv_matvec(k, u)));
    }
  }
  return out;
}

FitResult fit_fsa(const LocationSet& locs, const vec_t& y, const den_mat_t& X,
                  const FitOptions& opts) {
  const Eigen::Index n = locs.size();
  require(y.size() == n, "fit: response length mismatch");
  require(X.rows() == n || X.cols() == 0, "fit: covariate rows mismatch");

  FitResult res;
  res.gamma = opts.taper_range > 0.0 ? opts.taper_range
                                     : gamma_for_avg_row_nnz(n, opts.target_row_nnz);
  res.inducing = select_kmeanspp(locs, opts.num_inducing, opts.seed);
  TaperSpec taper{opts.taper_family, res.gamma};

  vec_t resid0 = y;
  if (X.cols() > 0) {
    vec_t b0 = X.colPivHouseholderQr().solve(y);
    resid0 -= X * b0;
  }
  const double var0 = resid0.squaredNorm() / static_cast<double>(n);
  const den_mat_t& c = locs.coords;
  const double diag_len = (c.colwise().maxCoeff() - c.colwise().minCoeff()).norm();
  CovParams p0;
  p0.sigma2 = 0.5 * var0;
  p0.sigma1_2 = 0.5 * var0;
  p0.rho = rho_for_correlation_at(0.25 * diag_len, 0.05, opts.kernel.nu);

  vec_t beta_last;
  auto objective = [&](const vec_t& lx, vec_t& grad) {
    CovParams prm = p0;
    prm.sigma2 = std::exp(lx(0));
    prm.sigma1_2 = std::exp(lx(1));
    prm.rho = std::exp(lx(2));
    FsaModel model = FsaModel::assemble(locs, res.inducing, opts.kernel, taper, prm,
                                        opts.assemble);
    double nll;
    Eigen::Vector3d g;
    if (opts.backend == FitBackend::exact) {
      vec_t beta = profile_beta(X, y, [&](const den_mat_t& R) { return model.solve_mat(R); });
      nll = model.nll(y, X, beta);
      g = model.nll_grad(y, X, beta);
      beta_last = beta;
    } else {
      auto P = make_preconditioner(model, opts.precond, opts.pivchol_rank);
      IterativeNllOptions io;
      io.num_probes = opts.num_probes;
      io.seed = opts.seed;
      io.cg = opts.cg;
      io.cv = opts.cv;
      IterativeNll ev = iterative_nll_grad(model, *P, y, X, io, true);
      nll = ev.nll;
      g = ev.grad;
      beta_last = ev.beta;
    }
    grad = (g.array() * Eigen::Array3d(prm.sigma2, prm.sigma1_2, prm.rho)).matrix();
    res.nll_trace.push_back(nll);
    return nll;
  };

  vec_t x0(3);
  x0 << std::log(p0.sigma2), std::log(p0.sigma1_2), std::log(p0.rho);
  LbfgsOptions lopt = opts.opt;
  lopt.grad_tol = opts.grad_tol_per_n * static_cast<double>(n);
  LbfgsResult sol = lbfgs_minimize(objective, x0, lopt);

  vec_t g_final(3);
  res.nll = objective(sol.x, g_final);
  res.params = p0;
  res.params.sigma2 = std::exp(sol.x(0));
  res.params.sigma1_2 = std::exp(sol.x(1));
  res.params.rho = std::exp(sol.x(2));
  res.params.beta = beta_last;
  res.beta = beta_last;
  res.evals = sol.evals + 1;
  res.converged = sol.converged;
  return res;
}

Scores score_predictions(const vec_t& y_true, const vec_t& mean, const vec_t& var) {
  const Eigen::Index n = y_true.size();
  require(mean.size() == n && var.size() == n, "scores: length mismatch");
  require((var.array() > 0.0).all(), "scores: variances must be positive");
  constexpr double log2pi = 1.8378770664093454836;
  const double inv_sqrt_pi = 1.0 / std::sqrt(M_PI);
  double mse = 0.0, ls = 0.0, crps = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double e = y_true(i) - mean(i);
    const double sd = std::sqrt(var(i));
    const double z = e / sd;
    mse += e * e;
    ls += 0.5 * (log2pi + std::log(var(i)) + z * z);
    const double cdf = 0.5 * std::erfc(-z / std::sqrt(2.0));
    const double pdf = std::exp(-0.5 * z * z) / std::sqrt(2.0 * M_PI);
    crps += sd * (z * (2.0 * cdf - 1.0) + 2.0 * pdf - inv_sqrt_pi);
  }
  Scores out;
  out.rmse = std::sqrt(mse / static_cast<double>(n));
  out.log_score = ls / static_cast<double>(n);
  out.crps = crps / static_cast<double>(n);
  return out;
}

SimulateResult simulate_gp(const LocationSet& locs, KernelSpec kern, const CovParams& params,
                           const den_mat_t& X, std::uint64_t seed, Eigen::Index max_n) {
  const Eigen::Index n = locs.size();
  require(n <= max_n, "simulate: dense path refused for this size");
  params.validate();
  require(X.cols() == 0 || X.rows() == n, "simulate: covariate rows mismatch");
  require(X.cols() == params.beta.size() || X.cols() == 0, "simulate: beta length mismatch");

  den_mat_t S = cross_cov(locs, locs, kern, params);
  S.diagonal().array() += 1e-12 * params.sigma1_2;
  Eigen::LLT<den_mat_t> llt(S);
  if (llt.info() != Eigen::Success)
    throw NumericalError("simulate: covariance is not positive definite");

  rng_t rng(seed);
  SimulateResult out;
  out.latent = llt.matrixL() * gaussian_vector(rng, n);
  out.y = out.latent + std::sqrt(params.sigma2) * gaussian_vector(rng, n);
  if (X.cols() > 0) out.y += X * params.beta;
  return out;
}

vec_t simulate_fsa(const FsaModel& model, const den_mat_t& X, const vec_t& beta,
                   std::uint64_t seed) {
  const Eigen::Index n = model.n();
  require(X.cols() == 0 || (X.rows() == n && X.cols() == beta.size()),
          "simulate: covariate shape mismatch");

  sp_mat_cm_t resid = model.sigma_s;
  resid.diagonal().array() -= model.params.sigma2;
  resid.diagonal().array() += 1e-12 * model.params.sigma1_2;
  Eigen::SimplicialLLT<sp_mat_cm_t> llt(resid);
  if (llt.info() != Eigen::Success)
    throw NumericalError("simulate: residual block is not positive definite");

  rng_t rng(seed);
  vec_t f = model.U.transpose() * gaussian_vector(rng, model.m());
  vec_t t = llt.matrixL() * gaussian_vector(rng, n);
  f += vec_t(llt.permutationPinv() * t);
  vec_t y = f + std::sqrt(model.params.sigma2) * gaussian_vector(rng, n);
  if (X.cols() > 0) y += X * beta;
  return y;
}

}  // namespace fsagp
