#include "fsagp/vecchia.h"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace fsagp {

den_mat_t VecchiaFactor::permute(const den_mat_t& V) const {
  den_mat_t out(V.rows(), V.cols());
  for (Eigen::Index i = 0; i < V.rows(); ++i) out.row(i) = V.row(perm[static_cast<std::size_t>(i)]);
  return out;
}

den_mat_t VecchiaFactor::unpermute(const den_mat_t& V) const {
  den_mat_t out(V.rows(), V.cols());
  for (Eigen::Index i = 0; i < V.rows(); ++i) out.row(perm[static_cast<std::size_t>(i)]) = V.row(i);
  return out;
}

den_mat_t VecchiaFactor::cov_matmat(const den_mat_t& V) const {
  den_mat_t t = permute(V);
  Bt.triangularView<Eigen::UnitUpper>().solveInPlace(t);
  t.array().colwise() *= D.array();
  B.triangularView<Eigen::UnitLower>().solveInPlace(t);
  return unpermute(t);
}

den_mat_t VecchiaFactor::prec_matmat(const den_mat_t& V) const {
  den_mat_t t = B * permute(V);
  t.array().colwise() /= D.array();
  return unpermute(Bt * t);
}

vec_t VecchiaFactor::sample(rng_t& rng) const {
  vec_t eps = gaussian_vector(rng, n());
  vec_t t = D.cwiseSqrt().cwiseProduct(eps);
  B.triangularView<Eigen::UnitLower>().solveInPlace(t);
  return unpermute(t);
}

VecchiaFactor build_vecchia(const LocationSet& locs, KernelSpec kern, const CovParams& params,
                            const VecchiaOptions& opts, const vec_t& diag_add) {
  const Eigen::Index n = locs.size();
  require(n > 0, "vecchia: empty location set");
  require(opts.num_neighbors > 0, "vecchia: num_neighbors must be positive");
  require(diag_add.size() == 0 || diag_add.size() == n, "vecchia: diag_add length mismatch");

  VecchiaFactor fac;
  fac.perm.resize(static_cast<std::size_t>(n));
  std::iota(fac.perm.begin(), fac.perm.end(), 0);
  if (opts.ordering == VecchiaOrdering::random) {
    rng_t rng(opts.seed);
    std::shuffle(fac.perm.begin(), fac.perm.end(), rng);
  }
  fac.inv_perm.resize(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) fac.inv_perm[static_cast<std::size_t>(fac.perm[static_cast<std::size_t>(i)])] = static_cast<int>(i);

  den_mat_t pts(n, locs.dim());
  for (Eigen::Index i = 0; i < n; ++i) pts.row(i) = locs.coords.row(fac.perm[static_cast<std::size_t>(i)]);
  KdTree tree(pts);

  auto add_at = [&](Eigen::Index pos) {
    return diag_add.size() > 0 ? diag_add(fac.perm[static_cast<std::size_t>(pos)]) : 0.0;
  };
  const double c0 = matern(0.0, kern.nu, params.sigma1_2, params.rho);

  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(static_cast<std::size_t>(n) * static_cast<std::size_t>(opts.num_neighbors + 1));
  fac.D = vec_t(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    trips.emplace_back(static_cast<int>(i), static_cast<int>(i), 1.0);
    const int k = std::min<int>(opts.num_neighbors, static_cast<int>(i));
    double cond = 0.0;
    if (k > 0) {
      std::vector<int> nb = tree.knn(pts.row(i), k, static_cast<int>(i));
      const auto kk = static_cast<Eigen::Index>(nb.size());
      den_mat_t S(kk, kk);
      vec_t c(kk);
      for (Eigen::Index a = 0; a < kk; ++a) {
        for (Eigen::Index b = 0; b < kk; ++b) {
          const double d = (pts.row(nb[static_cast<std::size_t>(a)]) - pts.row(nb[static_cast<std::size_t>(b)])).norm();
          S(a, b) = matern(d, kern.nu, params.sigma1_2, params.rho);
        }
        S(a, a) += add_at(nb[static_cast<std::size_t>(a)]);
        c(a) = matern((pts.row(i) - pts.row(nb[static_cast<std::size_t>(a)])).norm(), kern.nu,
                      params.sigma1_2, params.rho);
      }
      Eigen::LLT<den_mat_t> llt(S);
      if (llt.info() != Eigen::Success)
        throw NumericalError("vecchia: conditioning block is not positive definite");
      vec_t a = llt.solve(c);
      for (Eigen::Index t = 0; t < kk; ++t)
        trips.emplace_back(static_cast<int>(i), nb[static_cast<std::size_t>(t)], -a(t));
      cond = c.dot(a);
    }
    const double d_i = c0 + add_at(i) - cond;
    if (!(d_i > 0.0)) throw NumericalError("vecchia: nonpositive conditional variance");
    fac.D(i) = d_i;
  }

  fac.B = sp_mat_t(n, n);
  fac.B.setFromTriplets(trips.begin(), trips.end());
  fac.B.makeCompressed();
  fac.Bt = fac.B.transpose();
  fac.Bt.makeCompressed();
  return fac;
}

std::unique_ptr<FitcPrecond> fitc_for_vecchia(const LocationSet& locs,
                                              const LocationSet& inducing, KernelSpec kern,
                                              const CovParams& params, const vec_t& w_inv_diag,
                                              double jitter_rel) {
  require(w_inv_diag.size() == locs.size(), "fitc: diagonal length mismatch");
  den_mat_t sigma_m = cross_cov(inducing, inducing, kern, params);
  sigma_m.diagonal().array() += jitter_rel * params.sigma1_2;
  den_mat_t sigma_mn = cross_cov(inducing, locs, kern, params);
  Eigen::LLT<den_mat_t> chol(sigma_m);
  if (chol.info() != Eigen::Success)
    throw NumericalError("fitc: inducing block is not positive definite");
  den_mat_t U = chol.matrixL().solve(sigma_mn);
  vec_t d = (params.sigma1_2 - U.colwise().squaredNorm().transpose().array())
                .max(0.0)
                .matrix() +
            w_inv_diag;
  return std::make_unique<FitcPrecond>(std::move(sigma_m), std::move(sigma_mn), std::move(d));
}

LinOp vecchia_cov_operator(const VecchiaFactor& fac, const vec_t& w_inv_diag) {
  LinOp op;
  op.n = fac.n();
  op.apply = [&fac, &w_inv_diag](const vec_t& v) {
    return vec_t(fac.cov_matvec(v) + w_inv_diag.cwiseProduct(v));
  };
  op.apply_mat = [&fac, &w_inv_diag](const den_mat_t& V) {
    den_mat_t out = fac.cov_matmat(V);
    out += w_inv_diag.asDiagonal() * V;
    return out;
  };
  return op;
}

vec_t solve_vecchia_system(const VecchiaFactor& fac, const vec_t& w_diag, const vec_t& v,
                           VecchiaSolveRoute route, const Preconditioner& P,
                           const CgOptions& cg, int* iterations) {
  require(w_diag.size() == fac.n(), "vecchia solve: diagonal length mismatch");
  require((w_diag.array() > 0.0).all(), "vecchia solve: diagonal must be positive");

  if (route == VecchiaSolveRoute::precision) {
    LinOp op;
    op.n = fac.n();
    op.apply = [&fac, &w_diag](const vec_t& u) {
      return vec_t(fac.prec_matvec(u) + w_diag.cwiseProduct(u));
    };
    IdentityPrecond id(fac.n());
    CgResult sol = pcg_solve(op, id, v, cg);
    if (!sol.converged) throw NumericalError("vecchia solve: cg did not converge");
    if (iterations) *iterations = sol.iterations;
    return sol.x;
  }

  vec_t w_inv = w_diag.cwiseInverse();
  LinOp op = vecchia_cov_operator(fac, w_inv);
  CgResult sol = pcg_solve(op, P, fac.cov_matvec(v), cg);
  if (!sol.converged) throw NumericalError("vecchia solve: cg did not converge");
  if (iterations) *iterations = sol.iterations;
  return w_inv.cwiseProduct(sol.x);
}

double vecchia_cov_logdet_slq(const VecchiaFactor& fac, const vec_t& w_inv_diag,
                              const Preconditioner& P, const VecchiaSlqOptions& opts) {
  LinOp op = vecchia_cov_operator(fac, w_inv_diag);
  SlqOptions slq;
  slq.num_probes = opts.num_probes;
  slq.seed = opts.seed;
  slq.cg = opts.cg;
  return slq_logdet(op, P, slq).logdet;
}

double vecchia_prec_logdet_slq(const VecchiaFactor& fac, const vec_t& w_diag,
                               const Preconditioner& P, const VecchiaSlqOptions& opts) {
  const double cov_part = vecchia_cov_logdet_slq(fac, w_diag.cwiseInverse(), P, opts);
  return cov_part + w_diag.array().log().sum() - fac.logdet_cov();
}

double vecchia_nll_latent(const VecchiaFactor& fac, double sigma2, const vec_t& resid,
                          const Preconditioner& P, const VecchiaSlqOptions& opts) {
  require(sigma2 > 0.0, "vecchia: nugget must be positive");
  const Eigen::Index n = fac.n();
  vec_t w_inv = vec_t::Constant(n, sigma2);
  LinOp op = vecchia_cov_operator(fac, w_inv);
  CgResult sol = pcg_solve(op, P, resid, opts.cg);
  if (!sol.converged) throw NumericalError("vecchia: cg did not converge");
  const double logdet = vecchia_cov_logdet_slq(fac, w_inv, P, opts);
  constexpr double log2pi = 1.8378770664093454836;
  return 0.5 * (logdet + resid.dot(sol.x) + static_cast<double>(n) * log2pi);
}

double vecchia_nll_observable(const VecchiaFactor& fac_obs, const vec_t& resid) {
  const Eigen::Index n = fac_obs.n();
  require(resid.size() == n, "vecchia: residual length mismatch");
  den_mat_t rp = fac_obs.permute(resid);
  vec_t br = fac_obs.B * rp.col(0);
  const double quad = br.cwiseQuotient(fac_obs.D).dot(br);
  constexpr double log2pi = 1.8378770664093454836;
  return 0.5 * (fac_obs.logdet_cov() + quad + static_cast<double>(n) * log2pi);
}

}  // namespace fsagp
