#include <doctest.h>

#include <cmath>

#include "fsagp/estimation.h"
#include "fsagp/fsa.h"
#include "fsagp/inducing.h"
#include "oracles.h"

using namespace fsagp;

namespace {

struct Setup {
  FsaModel model;
  den_mat_t dense;
};

Setup small_model(Eigen::Index n, Eigen::Index m, double gamma, CovParams params,
                  std::uint64_t seed, TaperFamily family = TaperFamily::wendland1,
                  MaternNu nu = MaternNu::nu_3_2) {
  LocationSet locs = uniform_locations(n, 2, seed);
  LocationSet inducing = select_kmeanspp(locs, m, seed + 1);
  TaperSpec taper{family, gamma};
  Setup s{FsaModel::assemble(locs, inducing, KernelSpec{nu}, taper, params),
          oracle::dense_fsa_cov(locs, inducing, matern_nu_value(nu),
                                family == TaperFamily::wendland1 ? 1 : 2, gamma, params.sigma2,
                                params.sigma1_2, params.rho)};
  return s;
}

}  // namespace

TEST_SUITE("fsa") {

TEST_CASE("operator matches the dense reference") {
  CovParams p;
  p.sigma2 = 0.4;
  p.sigma1_2 = 1.3;
  p.rho = 0.12;
  Setup s = small_model(150, 12, 0.2, p, 3);

  rng_t rng(9);
  const vec_t v = gaussian_vector(rng, s.model.n());
  CHECK((s.model.matvec(v) - s.dense * v).cwiseAbs().maxCoeff() < 1e-10);

  den_mat_t V(s.model.n(), 3);
  for (int j = 0; j < 3; ++j) V.col(j) = gaussian_vector(rng, s.model.n());
  CHECK((s.model.matmat(V) - s.dense * V).cwiseAbs().maxCoeff() < 1e-10);

  CHECK((s.model.diag_no_nugget() - (s.dense.diagonal().array() - p.sigma2).matrix())
            .cwiseAbs()
            .maxCoeff() < 1e-10);
  for (Eigen::Index j : {Eigen::Index(0), Eigen::Index(7), s.model.n() - 1}) {
    vec_t col = s.model.column_no_nugget(j);
    vec_t want = s.dense.col(j);
    want[j] -= p.sigma2;
    CHECK((col - want).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("operator is positive definite") {
  CovParams p;
  p.sigma2 = 0.05;
  p.sigma1_2 = 1.0;
  p.rho = 0.2;
  Setup s = small_model(120, 10, 0.25, p, 13);
  Eigen::SelfAdjointEigenSolver<den_mat_t> eig(s.dense);
  CHECK(eig.eigenvalues().minCoeff() >= p.sigma2 * (1.0 - 1e-10));
}

TEST_CASE("factorized solve, logdet and likelihood match the dense reference") {
  CovParams p;
  p.sigma2 = 0.3;
  p.sigma1_2 = 1.1;
  p.rho = 0.1;
  Setup s = small_model(180, 15, 0.18, p, 23);

  rng_t rng(4);
  const vec_t b = gaussian_vector(rng, s.model.n());
  const vec_t got = s.model.solve(b);
  const vec_t want = s.dense.llt().solve(b);
  CHECK((got - want).norm() / want.norm() < 1e-8);

  CHECK(s.model.logdet() ==
        doctest::Approx(oracle::dense_logdet(s.dense)).epsilon(1e-9));

  const vec_t y = gaussian_vector(rng, s.model.n());
  const den_mat_t X(s.model.n(), 0);
  CHECK(s.model.nll(y, X, vec_t()) ==
        doctest::Approx(oracle::dense_nll(s.dense, y)).epsilon(1e-9));
}

TEST_CASE("likelihood accounts for fixed effects") {
  CovParams p;
  p.sigma2 = 0.3;
  p.sigma1_2 = 1.0;
  p.rho = 0.1;
  Setup s = small_model(100, 10, 0.2, p, 33);
  rng_t rng(6);
  den_mat_t X(100, 2);
  X.col(0).setOnes();
  X.col(1) = gaussian_vector(rng, 100);
  vec_t beta(2);
  beta << 0.7, -0.3;
  const vec_t y = gaussian_vector(rng, 100) + X * beta;
  CHECK(s.model.nll(y, X, beta) ==
        doctest::Approx(oracle::dense_nll(s.dense, y - X * beta)).epsilon(1e-9));
}

TEST_CASE("derivative operator matches finite differences") {
  CovParams p;
  p.sigma2 = 0.4;
  p.sigma1_2 = 1.2;
  p.rho = 0.15;
  const std::uint64_t seed = 43;
  Setup s = small_model(90, 9, 0.22, p, seed);
  rng_t rng(8);
  const vec_t v = gaussian_vector(rng, s.model.n());

  for (int which = 0; which < kNumCovParams; ++which) {
    Eigen::Vector3d theta = p.cov_vector();
    const double h = 1e-5 * theta[which];
    CovParams pp = p, pm = p;
    Eigen::Vector3d tp = theta, tm = theta;
    tp[which] += h;
    tm[which] -= h;
    pp.set_cov_vector(tp);
    pm.set_cov_vector(tm);
    Setup sp = small_model(90, 9, 0.22, pp, seed);
    Setup sm = small_model(90, 9, 0.22, pm, seed);
    const vec_t fd = (sp.model.matvec(v) - sm.model.matvec(v)) / (2.0 * h);
    const vec_t got = s.model.deriv_matvec(which, v);
    CHECK((got - fd).norm() / std::max(fd.norm(), 1e-8) < 1e-5);
  }
}

TEST_CASE("likelihood gradient matches central finite differences") {
  CovParams p;
  p.sigma2 = 0.5;
  p.sigma1_2 = 1.0;
  p.rho = 0.1;
  const std::uint64_t seed = 53;
  Setup s = small_model(140, 12, 0.2, p, seed);
  rng_t rng(12);
  const vec_t y = gaussian_vector(rng, s.model.n());
  const den_mat_t X(s.model.n(), 0);

  const Eigen::Vector3d grad = s.model.nll_grad(y, X, vec_t());
  for (int which = 0; which < kNumCovParams; ++which) {
    const double h = 1e-4 * p.cov_vector()[which];
    CovParams pp = p, pm = p;
    Eigen::Vector3d tp = p.cov_vector(), tm = p.cov_vector();
    tp[which] += h;
    tm[which] -= h;
    pp.set_cov_vector(tp);
    pm.set_cov_vector(tm);
    Setup sp = small_model(140, 12, 0.2, pp, seed);
    Setup sm = small_model(140, 12, 0.2, pm, seed);
    const double fd =
        (sp.model.nll(y, X, vec_t()) - sm.model.nll(y, X, vec_t())) / (2.0 * h);
    CHECK(std::abs(grad[which] - fd) / std::max(std::abs(fd), 1e-8) < 1e-5);
  }
}

TEST_CASE("likelihood is exact when inducing points cover every location") {
  // Residual shrinks to zero; clamping must keep the model usable.
  CovParams p;
  p.sigma2 = 0.2;
  p.sigma1_2 = 1.0;
  p.rho = 0.15;
  LocationSet locs = uniform_locations(60, 2, 63);
  TaperSpec taper{TaperFamily::wendland1, 0.2};
  FsaModel model = FsaModel::assemble(locs, locs, KernelSpec{MaternNu::nu_3_2}, taper, p);
  den_mat_t dense = oracle::dense_cov(locs, locs, 1.5, p.sigma1_2, p.rho);
  dense.diagonal().array() += p.sigma2;
  rng_t rng(2);
  const vec_t y = gaussian_vector(rng, 60);
  const den_mat_t X(60, 0);
  CHECK(model.nll(y, X, vec_t()) == doctest::Approx(oracle::dense_nll(dense, y)).epsilon(1e-5));
}

TEST_CASE("stochastic Fisher information approximates the dense one") {
  CovParams p;
  p.sigma2 = 0.5;
  p.sigma1_2 = 1.0;
  p.rho = 0.12;
  Setup s = small_model(100, 10, 0.2, p, 73);

  // Dense reference: F_kl = tr(S^-1 dS_k S^-1 dS_l) / 2.
  const den_mat_t inv = s.dense.inverse();
  den_mat_t dS[3];
  const Eigen::Index n = s.model.n();
  for (int k = 0; k < 3; ++k) {
    dS[k].resize(n, n);
    dS[k] = s.model.deriv_matmat(k, den_mat_t::Identity(n, n));
  }
  den_mat_t want(3, 3);
  for (int k = 0; k < 3; ++k) {
    for (int l = 0; l < 3; ++l) {
      want(k, l) = 0.5 * (inv * dS[k] * inv * dS[l]).trace();
    }
  }

  FisherOptions fopts;
  fopts.num_probes = 600;
  fopts.seed = 5;
  const den_mat_t got = fisher_ste(s.model, fopts);
  CHECK((got - got.transpose()).cwiseAbs().maxCoeff() < 1e-10);
  for (int k = 0; k < 3; ++k) {
    for (int l = 0; l < 3; ++l) {
      CHECK(std::abs(got(k, l) - want(k, l)) / std::max(std::abs(want(k, l)), 1.0) < 0.2);
    }
  }
}

}  // TEST_SUITE
