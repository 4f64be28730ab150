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

FsaModel test_model(Eigen::Index n, Eigen::Index m, double gamma, CovParams p,
                    std::uint64_t seed) {
  LocationSet locs = uniform_locations(n, 2, seed);
  LocationSet inducing = select_kmeanspp(locs, m, seed + 1);
  return FsaModel::assemble(locs, inducing, KernelSpec{MaternNu::nu_3_2},
                            TaperSpec{TaperFamily::wendland1, gamma}, p);
}

CovParams default_params() {
  CovParams p;
  p.sigma2 = 0.5;
  p.sigma1_2 = 1.0;
  p.rho = 0.1;
  return p;
}

}  // namespace

TEST_SUITE("krylov") {

TEST_CASE("cg solves against the factorized reference") {
  FsaModel model = test_model(200, 15, 0.15, default_params(), 3);
  const LinOp A = fsa_operator(model);
  IdentityPrecond P(model.n());
  rng_t rng(7);
  const vec_t b = gaussian_vector(rng, model.n());

  CgOptions opts;
  opts.tol = 1e-10;
  opts.max_iter = 2000;
  const CgResult r = pcg_solve(A, P, b, opts);
  CHECK(r.converged);
  CHECK((A.apply(r.x) - b).norm() < 1e-9);
  CHECK((r.x - model.solve(b)).norm() / model.solve(b).norm() < 1e-8);
  CHECK(r.tridiag.diag.size() == r.iterations);
  CHECK(r.tridiag.offdiag.size() == r.iterations - 1);
}

TEST_CASE("cg on a zero right-hand side converges immediately") {
  FsaModel model = test_model(50, 6, 0.2, default_params(), 5);
  IdentityPrecond P(model.n());
  const CgResult r = pcg_solve(fsa_operator(model), P, vec_t::Zero(model.n()), CgOptions{});
  CHECK(r.converged);
  CHECK(r.iterations == 0);
  CHECK(r.x.norm() == 0.0);
}

TEST_CASE("cg rejects an indefinite operator") {
  LinOp A;
  A.n = 4;
  A.apply = [](const vec_t& v) { return vec_t(-v); };
  IdentityPrecond P(4);
  vec_t b(4);
  b << 1, 2, 3, 4;
  CHECK_THROWS_AS((void)pcg_solve(A, P, b, CgOptions{}), NumericalError);
}

TEST_CASE("strict multi right-hand-side run reproduces single solves bit for bit") {
  FsaModel model = test_model(150, 12, 0.18, default_params(), 11);
  const LinOp A = fsa_operator(model);
  auto fitc = FitcPrecond::from_fsa(model, false);
  rng_t rng(13);
  den_mat_t B(model.n(), 4);
  for (int j = 0; j < 4; ++j) B.col(j) = gaussian_vector(rng, model.n());

  CgOptions opts;
  opts.tol = 1e-6;
  const CgMultiResult multi = pcg_solve_multi(A, *fitc, B, opts, false);
  CHECK(multi.all_converged());
  for (int j = 0; j < 4; ++j) {
    const CgResult single = pcg_solve(A, *fitc, B.col(j), opts);
    CHECK(multi.X.col(j) == single.x);
    CHECK(multi.iterations[static_cast<std::size_t>(j)] == single.iterations);
    CHECK(multi.tridiags[static_cast<std::size_t>(j)].diag == single.tridiag.diag);
    CHECK(multi.tridiags[static_cast<std::size_t>(j)].offdiag == single.tridiag.offdiag);
  }
}

TEST_CASE("batched multi right-hand-side run matches the strict one") {
  FsaModel model = test_model(150, 12, 0.18, default_params(), 17);
  const LinOp A = fsa_operator(model);
  auto fitc = FitcPrecond::from_fsa(model, false);
  rng_t rng(19);
  den_mat_t B(model.n(), 5);
  for (int j = 0; j < 5; ++j) B.col(j) = gaussian_vector(rng, model.n());

  CgOptions opts;
  opts.tol = 1e-8;
  const CgMultiResult strict = pcg_solve_multi(A, *fitc, B, opts, false);
  const CgMultiResult batched = pcg_solve_multi(A, *fitc, B, opts, true);
  CHECK(batched.all_converged());
  CHECK((strict.X - batched.X).cwiseAbs().maxCoeff() < 1e-7);
  for (std::size_t j = 0; j < 5; ++j) {
    CHECK(strict.iterations[j] == batched.iterations[j]);
  }
}

TEST_CASE("tridiagonal quadrature equals the dense matrix logarithm form") {
  Tridiag T;
  T.diag.resize(5);
  T.diag << 2.0, 2.5, 3.0, 2.2, 1.8;
  T.offdiag.resize(4);
  T.offdiag << 0.4, 0.3, 0.5, 0.2;

  den_mat_t dense = den_mat_t::Zero(5, 5);
  for (int i = 0; i < 5; ++i) dense(i, i) = T.diag[i];
  for (int i = 0; i < 4; ++i) {
    dense(i, i + 1) = T.offdiag[i];
    dense(i + 1, i) = T.offdiag[i];
  }
  Eigen::SelfAdjointEigenSolver<den_mat_t> eig(dense);
  const vec_t w = eig.eigenvectors().row(0).transpose();
  const double want = (w.array().square() * eig.eigenvalues().array().log()).sum();
  CHECK(tridiag_log_quadrature(T) == doctest::Approx(want).epsilon(1e-12));

  Tridiag empty;
  CHECK(tridiag_log_quadrature(empty) == 0.0);

  Tridiag bad;
  bad.diag.resize(1);
  bad.diag << -1.0;
  bad.offdiag.resize(0);
  CHECK_THROWS_AS((void)tridiag_log_quadrature(bad), NumericalError);
}

TEST_CASE("stochastic logdet estimate brackets the exact value") {
  FsaModel model = test_model(250, 15, 0.15, default_params(), 23);
  const double exact = model.logdet();
  const LinOp A = fsa_operator(model);
  auto fitc = FitcPrecond::from_fsa(model, false);

  SlqOptions opts;
  opts.num_probes = 150;
  opts.seed = 29;
  opts.cg.tol = 1e-8;
  const SlqResult r = slq_logdet(A, *fitc, opts);
  CHECK(r.all_converged);
  REQUIRE(r.tridiags.size() == 150);
  CHECK(r.probes.cols() == 150);
  CHECK(r.probes.rows() == model.n());

  vec_t q(150);
  for (int i = 0; i < 150; ++i) q[i] = tridiag_log_quadrature(r.tridiags[static_cast<std::size_t>(i)]);
  const double n_d = static_cast<double>(model.n());
  CHECK(r.logdet ==
        doctest::Approx(n_d / 150.0 * q.sum() + fitc->logdet()).epsilon(1e-10));

  const double qm = q.mean();
  const double s2 = (q.array() - qm).square().sum() / 149.0;
  const double se = n_d * std::sqrt(s2 / 150.0);
  CHECK(std::abs(r.logdet - exact) < 4.0 * se + 1e-6);
  CHECK(std::abs(r.logdet - exact) / std::abs(exact) < 0.05);
}

TEST_CASE("probe draws are keyed per column") {
  FsaModel model = test_model(60, 6, 0.2, default_params(), 31);
  auto fitc = FitcPrecond::from_fsa(model, false);
  const den_mat_t Z5 = fitc->sample_probes(5, 77);
  const den_mat_t Z3 = fitc->sample_probes(3, 77);
  CHECK(Z5.leftCols(3) == Z3);
}

TEST_CASE("stochastic derivative trace is unbiased and control variates shrink it") {
  FsaModel model = test_model(200, 12, 0.15, default_params(), 37);
  auto fitc = FitcPrecond::from_fsa(model, true);
  REQUIRE(fitc->has_derivs());

  const Eigen::Index n = model.n();
  const den_mat_t dense = model.matmat(den_mat_t::Identity(n, n));
  const den_mat_t inv = dense.inverse();

  for (int which = 0; which < kNumCovParams; ++which) {
    const den_mat_t dA = model.deriv_matmat(which, den_mat_t::Identity(n, n));
    const double exact = (inv * dA).trace();

    const den_mat_t Z = fitc->sample_probes(400, 41);
    CgOptions cg;
    cg.tol = 1e-8;
    const CgMultiResult sol = pcg_solve_multi(fsa_operator(model), *fitc, Z, cg, true);
    REQUIRE(sol.all_converged());

    auto dA_mat = [&](const den_mat_t& V) { return model.deriv_matmat(which, V); };
    const TraceEstimate plain = ste_grad_trace(Z, sol.X, dA_mat, *fitc, which, CvMode::none);
    const TraceEstimate cv = ste_grad_trace(Z, sol.X, dA_mat, *fitc, which, CvMode::optimal);

    CHECK(std::abs(plain.value - exact) < 4.0 * std::sqrt(plain.variance_of_mean) + 1e-8);
    CHECK(std::abs(cv.value - exact) < 4.0 * std::sqrt(cv.variance_of_mean) + 1e-8);
    CHECK(cv.variance_of_mean <= plain.variance_of_mean + 1e-12);
  }
}

TEST_CASE("stochastic diagonal is exact for diagonal operators with one probe") {
  const Eigen::Index n = 40;
  rng_t rng(43);
  vec_t d = gaussian_vector(rng, n).array().abs() + 0.1;
  auto op = [&](const den_mat_t& V) { return den_mat_t(d.asDiagonal() * V); };
  const StochasticDiag r = stochastic_diag(op, n, 1, 7);
  CHECK((r.diag - d).cwiseAbs().maxCoeff() < 1e-14);
  CHECK(r.se.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("stochastic diagonal with a perfect control has zero error") {
  const Eigen::Index n = 30;
  rng_t rng(47);
  vec_t d = gaussian_vector(rng, n).array().abs() + 0.5;
  auto op = [&](const den_mat_t& V) { return den_mat_t(d.asDiagonal() * V); };
  const StochasticDiag r = stochastic_diag_cv(op, op, d, n, 8, 9);
  CHECK((r.diag - d).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("stochastic diagonal converges on a dense operator") {
  const Eigen::Index n = 50;
  LocationSet locs = uniform_locations(n, 2, 51);
  den_mat_t S = oracle::dense_cov(locs, locs, 1.5, 1.0, 0.2);
  S.diagonal().array() += 0.3;
  auto op = [&](const den_mat_t& V) { return den_mat_t(S * V); };
  const StochasticDiag r = stochastic_diag(op, n, 4000, 11);
  for (Eigen::Index i = 0; i < n; ++i) {
    CHECK(std::abs(r.diag[i] - S(i, i)) < 5.0 * r.se[i] + 1e-10);
  }
}

TEST_CASE("lanczos with full rank reconstructs the operator") {
  const Eigen::Index n = 40;
  LocationSet locs = uniform_locations(n, 2, 53);
  den_mat_t S = oracle::dense_cov(locs, locs, 1.5, 1.0, 0.15);
  S.diagonal().array() += 0.5;
  LinOp A;
  A.n = n;
  A.apply = [&](const vec_t& v) { return vec_t(S * v); };

  const vec_t start = vec_t::Ones(n);
  const LanczosResult r = lanczos(A, start, static_cast<int>(n), true);
  const Eigen::Index k = r.T.diag.size();
  REQUIRE(k == n);

  CHECK((r.Q.transpose() * r.Q - den_mat_t::Identity(k, k)).cwiseAbs().maxCoeff() < 1e-9);
  den_mat_t T = den_mat_t::Zero(k, k);
  for (Eigen::Index i = 0; i < k; ++i) T(i, i) = r.T.diag[i];
  for (Eigen::Index i = 0; i + 1 < k; ++i) {
    T(i, i + 1) = r.T.offdiag[i];
    T(i + 1, i) = r.T.offdiag[i];
  }
  CHECK((r.Q * T * r.Q.transpose() - S).cwiseAbs().maxCoeff() < 1e-7);
}

}  // TEST_SUITE
