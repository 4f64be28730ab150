#include "fsagp/krylov.h"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <limits>

namespace fsagp {

LinOp fsa_operator(const FsaModel& model) {
  LinOp op;
  op.n = model.locs.size();
  op.apply = [&model](const vec_t& v) { return model.matvec(v); };
  op.apply_mat = [&model](const den_mat_t& V) { return model.matmat(V); };
  return op;
}

CgMultiResult pcg_solve_multi(const LinOp& A, const Preconditioner& P, const den_mat_t& B,
                              const CgOptions& opts, bool batched) {
  const Eigen::Index n = B.rows();
  const Eigen::Index k = B.cols();
  require(A.n == n && P.size() == n, "cg: dimension mismatch");
  require(opts.tol > 0.0 && opts.max_iter > 0, "cg: invalid options");

  CgMultiResult res;
  res.X = den_mat_t::Zero(n, k);
  res.iterations.assign(static_cast<std::size_t>(k), 0);
  res.converged.assign(static_cast<std::size_t>(k), false);
  res.tridiags.resize(static_cast<std::size_t>(k));

  den_mat_t R = B;
  den_mat_t H = den_mat_t::Zero(n, k);
  den_mat_t V(n, k);
  std::vector<double> rz(static_cast<std::size_t>(k), 0.0);
  std::vector<double> alpha_prev(static_cast<std::size_t>(k), 1.0);
  std::vector<double> beta_prev(static_cast<std::size_t>(k), 0.0);
  std::vector<std::vector<double>> tdiag(static_cast<std::size_t>(k));
  std::vector<std::vector<double>> toff(static_cast<std::size_t>(k));
  std::vector<char> active(static_cast<std::size_t>(k), 1);
  Eigen::Index num_active = 0;

  for (Eigen::Index j = 0; j < k; ++j) {
    const std::size_t sj = static_cast<std::size_t>(j);
    if (R.col(j).norm() < opts.tol) {
      res.converged[sj] = true;
      active[sj] = 0;
      continue;
    }
    vec_t z = P.solve(R.col(j));
    rz[sj] = R.col(j).dot(z);
    if (!(rz[sj] > 0.0)) throw NumericalError("cg: preconditioner is not positive definite");
    H.col(j) = z;
    ++num_active;
  }

  for (int it = 0; it < opts.max_iter && num_active > 0; ++it) {
    if (batched) {
      V = A.apply_dense(H);
    } else {
      for (Eigen::Index j = 0; j < k; ++j)
        if (active[static_cast<std::size_t>(j)]) V.col(j) = A.apply(H.col(j));
    }
    for (Eigen::Index j = 0; j < k; ++j) {
      const std::size_t sj = static_cast<std::size_t>(j);
      if (!active[sj]) continue;
      const double hv = H.col(j).dot(V.col(j));
      if (!(hv > 0.0)) throw NumericalError("cg: operator is not positive definite");
      const double alpha = rz[sj] / hv;

      tdiag[sj].push_back(1.0 / alpha + beta_prev[sj] / alpha_prev[sj]);
      if (it > 0) toff[sj].push_back(std::sqrt(beta_prev[sj]) / alpha_prev[sj]);

      res.X.col(j) += alpha * H.col(j);
      R.col(j) -= alpha * V.col(j);
      res.iterations[sj] = it + 1;

      if (R.col(j).norm() < opts.tol) {
        res.converged[sj] = true;
        active[sj] = 0;
        --num_active;
        continue;
      }
      vec_t z = P.solve(R.col(j));
      const double rz_new = R.col(j).dot(z);
      if (!(rz_new > 0.0)) throw NumericalError("cg: preconditioner is not positive definite");
      const double beta = rz_new / rz[sj];
      H.col(j) = z + beta * H.col(j);
      beta_prev[sj] = beta;
      alpha_prev[sj] = alpha;
      rz[sj] = rz_new;
    }
    ++res.sweeps;
  }

  if (num_active > 0 && opts.error_on_max_iter)
    throw NumericalError("cg: no convergence within max_iter");

  for (Eigen::Index j = 0; j < k; ++j) {
    const std::size_t sj = static_cast<std::size_t>(j);
    const auto m = static_cast<Eigen::Index>(tdiag[sj].size());
    res.tridiags[sj].diag = Eigen::Map<const vec_t>(tdiag[sj].data(), m);
    res.tridiags[sj].offdiag =
        m > 1 ? vec_t(Eigen::Map<const vec_t>(toff[sj].data(), m - 1)) : vec_t(0);
  }
  return res;
}

CgResult pcg_solve(const LinOp& A, const Preconditioner& P, const vec_t& b,
                   const CgOptions& opts) {
  CgMultiResult multi = pcg_solve_multi(A, P, b, opts, false);
  CgResult res;
  res.x = multi.X.col(0);
  res.iterations = multi.iterations[0];
  res.converged = multi.converged[0];
  res.residual_norm = (b - A.apply(res.x)).norm();
  res.tridiag = std::move(multi.tridiags[0]);
  return res;
}

double tridiag_log_quadrature(const Tridiag& T) {
  const Eigen::Index m = T.diag.size();
  if (m == 0) return 0.0;
  Eigen::SelfAdjointEigenSolver<den_mat_t> es;
  es.computeFromTridiagonal(T.diag, T.offdiag, Eigen::ComputeEigenvectors);
  if (es.info() != Eigen::Success) {
    den_mat_t D = den_mat_t::Zero(m, m);
    D.diagonal() = T.diag;
    D.diagonal(1) = T.offdiag;
    D.diagonal(-1) = T.offdiag;
    es.compute(D);
    if (es.info() != Eigen::Success)
      throw NumericalError("tridiagonal eigendecomposition failed");
  }
  double q = 0.0;
  for (Eigen::Index i = 0; i < m; ++i) {
    const double lambda = es.eigenvalues()(i);
    if (!(lambda > 0.0)) throw NumericalError("tridiagonal has a nonpositive Ritz value");
    const double w = es.eigenvectors()(0, i);
    q += w * w * std::log(lambda);
  }
  return q;
}

SlqResult slq_logdet(const LinOp& A, const Preconditioner& P, const SlqOptions& opts) {
  require(opts.num_probes > 0, "slq: num_probes must be positive");
  const Eigen::Index n = A.n;
  SlqResult res;
  res.probes = P.sample_probes(opts.num_probes, opts.seed);
  CgMultiResult cg = pcg_solve_multi(A, P, res.probes, opts.cg, true);
  res.solves = std::move(cg.X);
  res.tridiags = std::move(cg.tridiags);
  res.iterations = std::move(cg.iterations);
  res.all_converged = true;
  for (bool c : cg.converged) res.all_converged = res.all_converged && c;

  double acc = 0.0;
  for (const Tridiag& T : res.tridiags) acc += tridiag_log_quadrature(T);
  res.logdet =
      static_cast<double>(n) / static_cast<double>(opts.num_probes) * acc + P.logdet();
  return res;
}

TraceEstimate ste_grad_trace(const den_mat_t& Z, const den_mat_t& W,
                             const std::function<den_mat_t(const den_mat_t&)>& dA_mat,
                             const Preconditioner& P, int which, CvMode mode) {
  const Eigen::Index ell = Z.cols();
  require(ell > 0 && W.cols() == ell && W.rows() == Z.rows(), "ste: probe shape mismatch");

  den_mat_t Y = P.solve_mat(Z);
  den_mat_t dAY = dA_mat(Y);
  vec_t a = (W.array() * dAY.array()).matrix().colwise().sum().transpose();

  TraceEstimate est;
  const double denom_l = static_cast<double>(ell);
  if (mode == CvMode::none || !P.has_derivs()) {
    est.value = a.mean();
    est.c_hat = 0.0;
    if (ell > 1) {
      const double var = (a.array() - est.value).square().sum() / (denom_l - 1.0);
      est.variance_of_mean = var / denom_l;
    }
    return est;
  }

  vec_t b(ell);
  for (Eigen::Index i = 0; i < ell; ++i) b(i) = Y.col(i).dot(P.deriv_apply(which, Y.col(i)));
  const double exact_b = P.deriv_trace(which);

  const double a_bar = a.mean();
  const double b_bar = b.mean();
  double c = 1.0;
  if (mode == CvMode::optimal) {
    const double sbb = (b.array() - b_bar).square().sum();
    const double sab = ((a.array() - a_bar) * (b.array() - b_bar)).sum();
    const double scale = std::max(b.array().abs().maxCoeff(), 1.0);
    c = sbb > denom_l * 1e-28 * scale * scale ? sab / sbb : 0.0;
  }
  est.c_hat = c;
  est.value = a_bar - c * (b_bar - exact_b);
  if (ell > 1) {
    vec_t d = a - c * (b.array() - exact_b).matrix();
    const double var = (d.array() - d.mean()).square().sum() / (denom_l - 1.0);
    est.variance_of_mean = var / denom_l;
  }
  return est;
}

namespace {

void accumulate_moments(const den_mat_t& vals, vec_t& s, vec_t& s2) {
  s += vals.rowwise().sum();
  s2 += vals.array().square().matrix().rowwise().sum();
}

StochasticDiag finish_moments(const vec_t& s, const vec_t& s2, int ell) {
  StochasticDiag out;
  const double l = static_cast<double>(ell);
  out.diag = s / l;
  if (ell > 1) {
    vec_t var = (s2 - l * out.diag.array().square().matrix()) / (l - 1.0);
    out.se = (var.array().max(0.0) / l).sqrt().matrix();
  } else {
    out.se = vec_t::Zero(s.size());
  }
  return out;
}

}  // namespace

StochasticDiag stochastic_diag(const std::function<den_mat_t(const den_mat_t&)>& op_mat,
                               Eigen::Index n, int num_probes, std::uint64_t seed, int batch) {
  require(num_probes > 0 && batch > 0, "stochastic_diag: invalid options");
  vec_t s = vec_t::Zero(n);
  vec_t s2 = vec_t::Zero(n);
  int done = 0;
  while (done < num_probes) {
    const int b = std::min(batch, num_probes - done);
    den_mat_t Z(n, b);
    for (int j = 0; j < b; ++j) {
      rng_t rng = probe_rng(seed, static_cast<std::uint64_t>(done + j));
      Z.col(j) = rademacher_vector(rng, n);
    }
    den_mat_t vals = (Z.array() * op_mat(Z).array()).matrix();
    accumulate_moments(vals, s, s2);
    done += b;
  }
  return finish_moments(s, s2, num_probes);
}

StochasticDiag stochastic_diag_cv(const std::function<den_mat_t(const den_mat_t&)>& op_mat,
                                  const std::function<den_mat_t(const den_mat_t&)>& control_mat,
                                  const vec_t& control_diag_exact, Eigen::Index n,
                                  int num_probes, std::uint64_t seed, int batch) {
  require(num_probes > 1 && batch > 0, "stochastic_diag_cv: needs at least two probes");
  vec_t sa = vec_t::Zero(n), sa2 = vec_t::Zero(n);
  vec_t sb = vec_t::Zero(n), sb2 = vec_t::Zero(n);
  vec_t sab = vec_t::Zero(n);
  int done = 0;
  while (done < num_probes) {
    const int b = std::min(batch, num_probes - done);
    den_mat_t Z(n, b);
    for (int j = 0; j < b; ++j) {
      rng_t rng = probe_rng(seed, static_cast<std::uint64_t>(done + j));
      Z.col(j) = rademacher_vector(rng, n);
    }
    den_mat_t va = (Z.array() * op_mat(Z).array()).matrix();
    den_mat_t vb = (Z.array() * control_mat(Z).array()).matrix();
    accumulate_moments(va, sa, sa2);
    accumulate_moments(vb, sb, sb2);
    sab += (va.array() * vb.array()).matrix().rowwise().sum();
    done += b;
  }
  const double l = static_cast<double>(num_probes);
  vec_t a_bar = sa / l;
  vec_t b_bar = sb / l;
  vec_t var_a = ((sa2 - l * a_bar.array().square().matrix()) / (l - 1.0)).cwiseMax(0.0);
  vec_t var_b = ((sb2 - l * b_bar.array().square().matrix()) / (l - 1.0)).cwiseMax(0.0);
  vec_t cov_ab = (sab - l * (a_bar.array() * b_bar.array()).matrix()) / (l - 1.0);

  StochasticDiag out;
  out.diag = vec_t(n);
  out.se = vec_t(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double scale = std::max(std::abs(b_bar(i)), 1.0);
    const double c = var_b(i) > 1e-28 * scale * scale ? cov_ab(i) / var_b(i) : 0.0;
    out.diag(i) = a_bar(i) - c * (b_bar(i) - control_diag_exact(i));
    const double var_d = std::max(var_a(i) - 2.0 * c * cov_ab(i) + c * c * var_b(i), 0.0);
    out.se(i) = std::sqrt(var_d / l);
  }
  return out;
}

LanczosResult lanczos(const LinOp& A, const vec_t& start, int k, bool full_reorth) {
  const Eigen::Index n = A.n;
  require(start.size() == n, "lanczos: start vector has wrong size");
  require(k > 0 && k <= n, "lanczos: rank out of range");
  const double start_norm = start.norm();
  require(start_norm > 0.0, "lanczos: start vector is zero");

  LanczosResult res;
  den_mat_t Q(n, k);
  std::vector<double> alphas, betas;
  Q.col(0) = start / start_norm;

  double beta_prev = 0.0;
  double anorm = 0.0;
  Eigen::Index m = 0;
  for (int j = 0; j < k; ++j) {
    vec_t w = A.apply(Q.col(j));
    if (j > 0) w -= beta_prev * Q.col(j - 1);
    const double alpha = Q.col(j).dot(w);
    w -= alpha * Q.col(j);
    if (full_reorth) {
      for (int pass = 0; pass < 2; ++pass)
        w -= Q.leftCols(j + 1) * (Q.leftCols(j + 1).transpose() * w);
    }
    alphas.push_back(alpha);
    m = j + 1;
    anorm = std::max(anorm, std::abs(alpha) + 2.0 * std::abs(beta_prev));
    const double beta = w.norm();
    if (j + 1 == k) break;
    if (beta <= std::numeric_limits<double>::epsilon() * 64.0 * std::max(anorm, 1.0)) {
      res.breakdown = true;
      break;
    }
    betas.push_back(beta);
    Q.col(j + 1) = w / beta;
    beta_prev = beta;
  }

  res.Q = Q.leftCols(m);
  res.T.diag = Eigen::Map<const vec_t>(alphas.data(), m);
  res.T.offdiag = m > 1 ? vec_t(Eigen::Map<const vec_t>(betas.data(), m - 1)) : vec_t(0);
  return res;
}

}  // namespace fsagp
