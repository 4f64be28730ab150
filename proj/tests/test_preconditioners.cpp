#include <doctest.h>

#include <cmath>

#include "fsagp/estimation.h"
#include "fsagp/fsa.h"
#include "fsagp/inducing.h"
#include "fsagp/krylov.h"
#include "fsagp/preconditioners.h"
#include "oracles.h"

using namespace fsagp;

namespace {

FsaModel test_model(Eigen::Index n, Eigen::Index m, double gamma, std::uint64_t seed,
                    double sigma2 = 0.5, double rho = 0.1) {
  CovParams p;
  p.sigma2 = sigma2;
  p.sigma1_2 = 1.0;
  p.rho = rho;
  LocationSet locs = uniform_locations(n, 2, seed);
  LocationSet inducing = select_kmeanspp(locs, m, seed + 1);
  return FsaModel::assemble(locs, inducing, KernelSpec{MaternNu::nu_3_2},
                            TaperSpec{TaperFamily::wendland1, gamma}, p);
}

den_mat_t dense_from_solve(const Preconditioner& P) {
  const Eigen::Index n = P.size();
  return P.solve_mat(den_mat_t::Identity(n, n)).inverse();
}

}  // namespace

TEST_SUITE("preconditioners") {

TEST_CASE("identity preconditioner draws sign probes") {
  IdentityPrecond P(20);
  CHECK(P.name() == "none");
  CHECK(P.logdet() == 0.0);
  const den_mat_t Z = P.sample_probes(6, 3);
  CHECK((Z.array().abs() - 1.0).abs().maxCoeff() == 0.0);
  rng_t rng(1);
  vec_t r = gaussian_vector(rng, 20);
  CHECK(P.solve(r) == r);
}

TEST_CASE("diagonal preconditioner solve, logdet and derivative traces") {
  rng_t rng(5);
  vec_t d = gaussian_vector(rng, 30).array().abs() + 0.2;
  std::array<vec_t, kNumCovParams> derivs;
  for (auto& v : derivs) v = gaussian_vector(rng, 30);
  DiagPrecond P(d, derivs);
  CHECK(P.name() == "diagonal");

  vec_t r = gaussian_vector(rng, 30);
  CHECK((P.solve(r) - (r.array() / d.array()).matrix()).cwiseAbs().maxCoeff() < 1e-14);
  CHECK(P.logdet() == doctest::Approx(d.array().log().sum()).epsilon(1e-12));
  REQUIRE(P.has_derivs());
  for (int k = 0; k < kNumCovParams; ++k) {
    CHECK(P.deriv_trace(k) ==
          doctest::Approx((derivs[static_cast<std::size_t>(k)].array() / d.array()).sum())
              .epsilon(1e-12));
    CHECK((P.deriv_apply(k, r) -
           (derivs[static_cast<std::size_t>(k)].array() * r.array()).matrix())
              .cwiseAbs()
              .maxCoeff() < 1e-14);
  }
}

TEST_CASE("low-rank plus diagonal preconditioner matches its dense form") {
  FsaModel model = test_model(120, 10, 0.2, 7);
  auto P = FitcPrecond::from_fsa(model, true);
  CHECK(P->name() == "fitc");

  // Dense mirror: low-rank part plus the short-range block diagonal.
  const den_mat_t low = model.sigma_mn.transpose() * model.chol_m.solve(model.sigma_mn);
  den_mat_t dense = low;
  dense.diagonal() += vec_t(model.sigma_s.diagonal());

  rng_t rng(9);
  const vec_t r = gaussian_vector(rng, model.n());
  CHECK((P->solve(r) - dense.llt().solve(r)).norm() / r.norm() < 1e-9);
  CHECK(P->logdet() == doctest::Approx(oracle::dense_logdet(dense)).epsilon(1e-9));

  den_mat_t R(model.n(), 3);
  for (int j = 0; j < 3; ++j) R.col(j) = gaussian_vector(rng, model.n());
  CHECK((P->solve_mat(R) - dense.llt().solve(R)).cwiseAbs().maxCoeff() < 1e-8);

  // Derivative traces: tr(P^{-1} dP) with dP reconstructed column by column.
  REQUIRE(P->has_derivs());
  const den_mat_t inv = dense.inverse();
  for (int k = 0; k < kNumCovParams; ++k) {
    den_mat_t dP(model.n(), model.n());
    for (Eigen::Index j = 0; j < model.n(); ++j) {
      dP.col(j) = P->deriv_apply(k, den_mat_t::Identity(model.n(), model.n()).col(j));
    }
    CHECK(P->deriv_trace(k) == doctest::Approx((inv * dP).trace()).epsilon(1e-8));
  }
}

TEST_CASE("low-rank preconditioner derivative matches finite differences") {
  const std::uint64_t seed = 11;
  const Eigen::Index n = 90, m = 8;
  const double gamma = 0.22;
  CovParams p;
  p.sigma2 = 0.4;
  p.sigma1_2 = 1.1;
  p.rho = 0.13;
  LocationSet locs = uniform_locations(n, 2, seed);
  LocationSet inducing = select_kmeanspp(locs, m, seed + 1);
  auto build = [&](const CovParams& q) {
    return FsaModel::assemble(locs, inducing, KernelSpec{MaternNu::nu_3_2},
                              TaperSpec{TaperFamily::wendland1, gamma}, q);
  };
  FsaModel model = build(p);
  auto P = FitcPrecond::from_fsa(model, true);
  rng_t rng(13);
  const vec_t v = gaussian_vector(rng, n);

  for (int k = 0; k < kNumCovParams; ++k) {
    const double h = 1e-5 * p.cov_vector()[k];
    CovParams pp = p, pm = p;
    Eigen::Vector3d tp = p.cov_vector(), tm = p.cov_vector();
    tp[k] += h;
    tm[k] -= h;
    pp.set_cov_vector(tp);
    pm.set_cov_vector(tm);
    FsaModel mp = build(pp);
    FsaModel mm = build(pm);
    auto Pp = FitcPrecond::from_fsa(mp, false);
    auto Pm = FitcPrecond::from_fsa(mm, false);
    // dP v from the dense difference of the two preconditioners.
    const Eigen::Index nn = n;
    den_mat_t Ip = den_mat_t::Identity(nn, nn);
    const den_mat_t Pp_dense = dense_from_solve(*Pp);
    const den_mat_t Pm_dense = dense_from_solve(*Pm);
    const vec_t fd = (Pp_dense * v - Pm_dense * v) / (2.0 * h);
    const vec_t got = P->deriv_apply(k, v);
    CHECK((got - fd).norm() / std::max(fd.norm(), 1e-8) < 1e-4);
    (void)Ip;
  }
}

TEST_CASE("vanishing taper range makes the low-rank preconditioner exact") {
  // With a taper below the point separation the short-range block is diagonal
  // and the preconditioner equals the operator.
  FsaModel model = test_model(150, 15, 1e-6, 17);
  CHECK(avg_row_nnz(model.dists) == doctest::Approx(1.0));
  auto P = FitcPrecond::from_fsa(model, false);
  rng_t rng(19);
  const vec_t b = gaussian_vector(rng, model.n());
  CgOptions opts;
  opts.tol = 1e-8;
  const CgResult r = pcg_solve(fsa_operator(model), *P, b, opts);
  CHECK(r.converged);
  CHECK(r.iterations <= 2);
}

TEST_CASE("pivoted cholesky recovers a low-rank matrix exactly") {
  const Eigen::Index n = 50, k = 6;
  rng_t rng(23);
  den_mat_t G(n, k);
  for (Eigen::Index j = 0; j < k; ++j) G.col(j) = gaussian_vector(rng, n);
  const den_mat_t S = G * G.transpose();
  auto column = [&](Eigen::Index j) { return vec_t(S.col(j)); };
  const den_mat_t L = pivoted_cholesky(S.diagonal(), column, 2 * k);
  CHECK(L.cols() <= k + 1);
  CHECK((L * L.transpose() - S).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("partial pivoted cholesky preconditioner matches its dense form") {
  FsaModel model = test_model(100, 8, 0.25, 29);
  auto P = PivCholPrecond::from_fsa(model, 20);
  CHECK(P->name() == "pivoted_cholesky");

  // Rebuild the dense form from a fresh factorization of the no-nugget operator.
  auto column = [&](Eigen::Index j) { return model.column_no_nugget(j); };
  const den_mat_t L = pivoted_cholesky(model.diag_no_nugget(), column, 20);
  den_mat_t dense = L * L.transpose();
  dense.diagonal().array() += model.params.sigma2;

  rng_t rng(31);
  const vec_t r = gaussian_vector(rng, model.n());
  CHECK((P->solve(r) - dense.llt().solve(r)).norm() / r.norm() < 1e-9);
  CHECK(P->logdet() == doctest::Approx(oracle::dense_logdet(dense)).epsilon(1e-9));
}

TEST_CASE("preconditioned solves agree across preconditioners") {
  FsaModel model = test_model(200, 15, 0.15, 37);
  const LinOp A = fsa_operator(model);
  rng_t rng(41);
  const vec_t b = gaussian_vector(rng, model.n());
  const vec_t want = model.solve(b);

  CgOptions opts;
  opts.tol = 1e-9;
  opts.max_iter = 3000;
  for (PrecondType type : {PrecondType::none, PrecondType::diagonal, PrecondType::fitc,
                           PrecondType::pivchol}) {
    auto P = make_preconditioner(model, type, 30);
    const CgResult r = pcg_solve(A, *P, b, opts);
    CHECK(r.converged);
    CHECK((r.x - want).norm() / want.norm() < 1e-7);
  }
}

TEST_CASE("preconditioner samples have the advertised covariance") {
  FsaModel model = test_model(40, 6, 0.3, 43);
  auto P = FitcPrecond::from_fsa(model, false);
  const den_mat_t low = model.sigma_mn.transpose() * model.chol_m.solve(model.sigma_mn);
  den_mat_t dense = low;
  dense.diagonal() += vec_t(model.sigma_s.diagonal());

  const int draws = 30000;
  rng_t rng(47);
  den_mat_t acc = den_mat_t::Zero(40, 40);
  for (int i = 0; i < draws; ++i) {
    const vec_t z = P->sample(rng);
    acc += z * z.transpose();
  }
  acc /= draws;
  // Entrywise Monte Carlo tolerance from the Gaussian fourth moment.
  int violations = 0;
  for (Eigen::Index i = 0; i < 40; ++i) {
    for (Eigen::Index j = 0; j < 40; ++j) {
      const double se = std::sqrt((dense(i, i) * dense(j, j) + dense(i, j) * dense(i, j)) /
                                  static_cast<double>(draws));
      if (std::abs(acc(i, j) - dense(i, j)) > 4.0 * se) ++violations;
    }
  }
  CHECK(violations < 20);
}

}  // TEST_SUITE
