#include <doctest.h>

#include <cmath>

#include "fsagp/inducing.h"
#include "fsagp/vecchia.h"
#include "oracles.h"

using namespace fsagp;

namespace {

CovParams default_params() {
  CovParams p;
  p.sigma2 = 0.5;
  p.sigma1_2 = 1.0;
  p.rho = 0.1;
  return p;
}

constexpr double log2pi = 1.8378770664093454836;

}  // namespace

TEST_SUITE("vecchia") {

TEST_CASE("full conditioning reproduces the dense covariance") {
  const Eigen::Index n = 90;
  LocationSet locs = uniform_locations(n, 2, 3);
  CovParams p = default_params();
  VecchiaOptions opts;
  opts.num_neighbors = static_cast<int>(n) - 1;
  opts.ordering = VecchiaOrdering::given;
  VecchiaFactor fac = build_vecchia(locs, KernelSpec{MaternNu::nu_3_2}, p, opts);

  const den_mat_t dense = oracle::dense_cov(locs, locs, 1.5, p.sigma1_2, p.rho);
  const den_mat_t got = fac.cov_matmat(den_mat_t::Identity(n, n));
  CHECK((got - dense).cwiseAbs().maxCoeff() < 1e-8);
  CHECK(fac.logdet_cov() == doctest::Approx(oracle::dense_logdet(dense)).epsilon(1e-8));
}

TEST_CASE("precision and covariance actions invert each other") {
  const Eigen::Index n = 300;
  LocationSet locs = uniform_locations(n, 2, 7);
  CovParams p = default_params();
  VecchiaOptions opts;
  opts.num_neighbors = 20;
  opts.seed = 11;
  VecchiaFactor fac = build_vecchia(locs, KernelSpec{MaternNu::nu_3_2}, p, opts);

  rng_t rng(13);
  const vec_t v = gaussian_vector(rng, n);
  CHECK((fac.prec_matvec(fac.cov_matvec(v)) - v).cwiseAbs().maxCoeff() < 1e-9);
  CHECK((fac.cov_matvec(fac.prec_matvec(v)) - v).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("random ordering permutation round-trips") {
  const Eigen::Index n = 50;
  LocationSet locs = uniform_locations(n, 2, 17);
  VecchiaOptions opts;
  opts.num_neighbors = 10;
  opts.seed = 19;
  VecchiaFactor fac = build_vecchia(locs, KernelSpec{MaternNu::nu_3_2}, default_params(), opts);
  rng_t rng(23);
  den_mat_t V(n, 2);
  V.col(0) = gaussian_vector(rng, n);
  V.col(1) = gaussian_vector(rng, n);
  CHECK((fac.unpermute(fac.permute(V)) - V).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("an added diagonal shifts the represented covariance") {
  const Eigen::Index n = 70;
  LocationSet locs = uniform_locations(n, 2, 29);
  CovParams p = default_params();
  VecchiaOptions opts;
  opts.num_neighbors = static_cast<int>(n) - 1;
  opts.ordering = VecchiaOrdering::given;
  const vec_t add = vec_t::Constant(n, 0.7);
  VecchiaFactor fac = build_vecchia(locs, KernelSpec{MaternNu::nu_3_2}, p, opts, add);

  den_mat_t dense = oracle::dense_cov(locs, locs, 1.5, p.sigma1_2, p.rho);
  dense.diagonal().array() += 0.7;
  const den_mat_t got = fac.cov_matmat(den_mat_t::Identity(n, n));
  CHECK((got - dense).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("samples are deterministic and have the right second moment scale") {
  const Eigen::Index n = 60;
  LocationSet locs = uniform_locations(n, 2, 31);
  VecchiaOptions opts;
  opts.num_neighbors = 15;
  opts.seed = 2;
  VecchiaFactor fac = build_vecchia(locs, KernelSpec{MaternNu::nu_3_2}, default_params(), opts);
  rng_t r1(5), r2(5);
  CHECK(fac.sample(r1) == fac.sample(r2));

  rng_t rng(7);
  double acc = 0.0;
  const int draws = 4000;
  for (int i = 0; i < draws; ++i) acc += fac.sample(rng).squaredNorm();
  const den_mat_t dense = fac.cov_matmat(den_mat_t::Identity(n, n));
  const double want = dense.trace();
  CHECK(acc / draws == doctest::Approx(want).epsilon(0.1));
}

TEST_CASE("latent marginal likelihood with full conditioning equals the dense one") {
  const Eigen::Index n = 120;
  LocationSet locs = uniform_locations(n, 2, 37);
  CovParams p = default_params();

  // Observable route: conditioning applied to the covariance with the nugget.
  VecchiaOptions opts;
  opts.num_neighbors = static_cast<int>(n) - 1;
  opts.ordering = VecchiaOrdering::given;
  const vec_t nugget = vec_t::Constant(n, p.sigma2);
  VecchiaFactor fac_obs =
      build_vecchia(locs, KernelSpec{MaternNu::nu_3_2}, p, opts, nugget);

  rng_t rng(41);
  const vec_t y = gaussian_vector(rng, n);
  const double got = vecchia_nll_observable(fac_obs, y);

  den_mat_t dense = oracle::dense_cov(locs, locs, 1.5, p.sigma1_2, p.rho);
  dense.diagonal().array() += p.sigma2;
  CHECK(got == doctest::Approx(oracle::dense_nll(dense, y)).epsilon(1e-8));
}

TEST_CASE("both solve routes agree with the dense posterior system") {
  const Eigen::Index n = 250;
  LocationSet locs = uniform_locations(n, 2, 43);
  CovParams p = default_params();
  VecchiaOptions opts;
  opts.num_neighbors = 25;
  opts.seed = 3;
  const KernelSpec kern{MaternNu::nu_3_2};
  VecchiaFactor fac = build_vecchia(locs, kern, p, opts);

  const vec_t w = vec_t::Constant(n, 1.0 / p.sigma2);
  const vec_t w_inv = vec_t::Constant(n, p.sigma2);
  rng_t rng(47);
  const vec_t v = gaussian_vector(rng, n);

  // Dense reference from the represented covariance.
  const den_mat_t cov = fac.cov_matmat(den_mat_t::Identity(n, n));
  const den_mat_t prec = cov.inverse();
  const vec_t want = (prec + den_mat_t(w.asDiagonal())).ldlt().solve(v);

  CgOptions cg;
  cg.tol = 1e-10;
  cg.max_iter = 4000;
  IdentityPrecond Pn(n);
  int it1 = 0, it2 = 0;
  const vec_t x1 =
      solve_vecchia_system(fac, w, v, VecchiaSolveRoute::precision, Pn, cg, &it1);

  LocationSet inducing = select_kmeanspp(locs, 30, 5);
  auto fitc = fitc_for_vecchia(locs, inducing, kern, p, w_inv);
  const vec_t x2 =
      solve_vecchia_system(fac, w, v, VecchiaSolveRoute::covariance, *fitc, cg, &it2);

  CHECK(it1 > 0);
  CHECK(it2 > 0);
  CHECK((x1 - want).norm() < 1e-7);
  CHECK((x2 - want).norm() < 1e-7);
  CHECK((x1 - x2).norm() < 1e-7);
}

TEST_CASE("low-rank preconditioner for the conditioned system matches its definition") {
  const Eigen::Index n = 120;
  LocationSet locs = uniform_locations(n, 2, 53);
  CovParams p = default_params();
  const KernelSpec kern{MaternNu::nu_3_2};
  LocationSet inducing = select_kmeanspp(locs, 15, 7);
  const vec_t w_inv = vec_t::Constant(n, p.sigma2);
  auto P = fitc_for_vecchia(locs, inducing, kern, p, w_inv);

  den_mat_t sm = oracle::dense_cov(inducing, inducing, 1.5, p.sigma1_2, p.rho);
  sm.diagonal().array() += 1e-10 * p.sigma1_2;
  const den_mat_t smn = oracle::dense_cov(inducing, locs, 1.5, p.sigma1_2, p.rho);
  const den_mat_t low = smn.transpose() * sm.fullPivLu().solve(smn);
  den_mat_t dense = low;
  for (Eigen::Index i = 0; i < n; ++i) {
    dense(i, i) += std::max(p.sigma1_2 - low(i, i), 0.0) + p.sigma2;
  }

  rng_t rng(59);
  const vec_t r = gaussian_vector(rng, n);
  CHECK((P->solve(r) - dense.llt().solve(r)).norm() / r.norm() < 1e-8);
  CHECK(P->logdet() == doctest::Approx(oracle::dense_logdet(dense)).epsilon(1e-9));
}

TEST_CASE("stochastic logdet of the observable covariance brackets the dense value") {
  const Eigen::Index n = 300;
  LocationSet locs = uniform_locations(n, 2, 61);
  CovParams p = default_params();
  const KernelSpec kern{MaternNu::nu_3_2};
  VecchiaOptions opts;
  opts.num_neighbors = 20;
  opts.seed = 9;
  VecchiaFactor fac = build_vecchia(locs, kern, p, opts);
  const vec_t w_inv = vec_t::Constant(n, p.sigma2);

  den_mat_t dense = fac.cov_matmat(den_mat_t::Identity(n, n));
  dense.diagonal().array() += p.sigma2;
  const double want = oracle::dense_logdet(dense);

  VecchiaSlqOptions sopts;
  sopts.num_probes = 120;
  sopts.seed = 11;
  sopts.cg.tol = 1e-8;

  LocationSet inducing = select_kmeanspp(locs, 30, 13);
  auto fitc = fitc_for_vecchia(locs, inducing, kern, p, w_inv);
  const double got_fitc = vecchia_cov_logdet_slq(fac, w_inv, *fitc, sopts);
  CHECK(std::abs(got_fitc - want) / std::abs(want) < 0.05);

  VecchiaOptions oopts = opts;
  oopts.seed = 15;
  auto obs = std::make_unique<ObsVecchiaPrecond>(build_vecchia(locs, kern, p, oopts, w_inv));
  CHECK(obs->name() == "obs_vecchia");
  const double got_obs = vecchia_cov_logdet_slq(fac, w_inv, *obs, sopts);
  CHECK(std::abs(got_obs - want) / std::abs(want) < 0.05);
}

TEST_CASE("latent likelihood from the iterative path tracks the dense value") {
  const Eigen::Index n = 200;
  LocationSet locs = uniform_locations(n, 2, 67);
  CovParams p = default_params();
  const KernelSpec kern{MaternNu::nu_3_2};
  VecchiaOptions opts;
  opts.num_neighbors = 25;
  opts.seed = 17;
  VecchiaFactor fac = build_vecchia(locs, kern, p, opts);

  rng_t rng(71);
  const vec_t y = gaussian_vector(rng, n);

  den_mat_t dense = fac.cov_matmat(den_mat_t::Identity(n, n));
  dense.diagonal().array() += p.sigma2;
  const double want = oracle::dense_nll(dense, y);

  const vec_t w_inv = vec_t::Constant(n, p.sigma2);
  LocationSet inducing = select_kmeanspp(locs, 25, 19);
  auto fitc = fitc_for_vecchia(locs, inducing, kern, p, w_inv);
  VecchiaSlqOptions sopts;
  sopts.num_probes = 150;
  sopts.seed = 21;
  sopts.cg.tol = 1e-8;
  const double got = vecchia_nll_latent(fac, p.sigma2, y, *fitc, sopts);
  CHECK(std::abs(got - want) / std::abs(want) < 0.05);
}

TEST_CASE("precision logdet identity holds") {
  const Eigen::Index n = 150;
  LocationSet locs = uniform_locations(n, 2, 73);
  CovParams p = default_params();
  const KernelSpec kern{MaternNu::nu_3_2};
  VecchiaOptions opts;
  opts.num_neighbors = 20;
  opts.seed = 23;
  VecchiaFactor fac = build_vecchia(locs, kern, p, opts);
  const vec_t w = vec_t::Constant(n, 1.0 / p.sigma2);
  const vec_t w_inv = vec_t::Constant(n, p.sigma2);

  const den_mat_t prec = fac.prec_matmat(den_mat_t::Identity(n, n));
  den_mat_t sum = prec;
  sum.diagonal() += w;
  const double want = oracle::dense_logdet(sum);

  LocationSet inducing = select_kmeanspp(locs, 25, 29);
  auto fitc = fitc_for_vecchia(locs, inducing, kern, p, w_inv);
  VecchiaSlqOptions sopts;
  sopts.num_probes = 200;
  sopts.seed = 31;
  sopts.cg.tol = 1e-8;
  const double got = vecchia_prec_logdet_slq(fac, w, *fitc, sopts);
  CHECK(std::abs(got - want) / std::abs(want) < 0.05);
  (void)log2pi;
}

}  // TEST_SUITE
