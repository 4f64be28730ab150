import numpy as np
import pytest

import fsagp


def grid(n_side):
    xs = np.linspace(0.0, 1.0, n_side)
    xx, yy = np.meshgrid(xs, xs)
    return np.column_stack([xx.ravel(), yy.ravel()])


def test_matern_value():
    val = fsagp.matern(0.5, 1.5, 2.0, 0.5)
    s3 = np.sqrt(3.0)
    assert val == pytest.approx(2.0 * (1.0 + s3) * np.exp(-s3), rel=1e-12)


def test_simulate_shapes_and_determinism():
    coords = grid(10)
    y1 = fsagp.simulate(coords, nu=1.5, sigma2=0.5, sigma1_2=1.0, rho=0.1, seed=7)
    y2 = fsagp.simulate(coords, nu=1.5, sigma2=0.5, sigma1_2=1.0, rho=0.1, seed=7)
    assert y1.shape == (100,)
    assert np.array_equal(y1, y2)


def test_model_solve_roundtrip():
    coords = grid(8)
    inducing = fsagp.select_inducing(coords, 10, seed=3)
    gamma = fsagp.taper_range_for_row_nnz(coords.shape[0], 10.0)
    model = fsagp.Model(coords, inducing, nu=1.5, gamma=gamma,
                        sigma2=0.5, sigma1_2=1.0, rho=0.1)
    rng = np.random.default_rng(0)
    b = rng.standard_normal(model.n)
    x = model.solve(b)
    assert np.allclose(model.matvec(x), b, atol=1e-8)
    assert np.isfinite(model.logdet())


def test_nll_iterative_close_to_exact():
    coords = grid(12)
    y = fsagp.simulate(coords, nu=1.5, sigma2=0.5, sigma1_2=1.0, rho=0.1, seed=11)
    inducing = fsagp.select_inducing(coords, 20, seed=3)
    gamma = fsagp.taper_range_for_row_nnz(coords.shape[0], 15.0)
    model = fsagp.Model(coords, inducing, nu=1.5, gamma=gamma,
                        sigma2=0.5, sigma1_2=1.0, rho=0.1)
    exact = model.nll(y)
    approx, iters = model.nll_iterative(y, probes=40, seed=5, cg_tol=1e-6)
    assert iters > 0
    assert approx == pytest.approx(exact, rel=0.05)


def test_predict_and_scores():
    coords = grid(10)
    y = fsagp.simulate(coords, nu=1.5, sigma2=0.1, sigma1_2=1.0, rho=0.1, seed=2)
    inducing = fsagp.select_inducing(coords, 15, seed=3)
    gamma = fsagp.taper_range_for_row_nnz(coords.shape[0], 12.0)
    model = fsagp.Model(coords, inducing, nu=1.5, gamma=gamma,
                        sigma2=0.1, sigma1_2=1.0, rho=0.1)
    rng = np.random.default_rng(4)
    pred_coords = rng.uniform(size=(20, 2))
    mean, var = model.predict(pred_coords, y, var_method="exact")
    assert mean.shape == (20,)
    assert np.all(var > 0)
    s = fsagp.scores(np.zeros(20), mean, var)
    assert set(s) == {"rmse", "log_score", "crps"}
    assert np.isfinite(list(s.values())).all()


def test_vecchia_nll_matches_dense_when_full():
    coords = grid(7)
    n = coords.shape[0]
    y = fsagp.simulate(coords, nu=1.5, sigma2=0.5, sigma1_2=1.0, rho=0.1, seed=9)
    nll_v = fsagp.vecchia_nll(coords, y, nu=1.5, sigma2=0.5, sigma1_2=1.0, rho=0.1,
                              num_neighbors=n - 1)
    d = np.linalg.norm(coords[:, None, :] - coords[None, :, :], axis=2)
    s3 = np.sqrt(3.0)
    cov = (1.0 + s3 * d / 0.1) * np.exp(-s3 * d / 0.1) + 0.5 * np.eye(n)
    sign, logdet = np.linalg.slogdet(cov)
    assert sign > 0
    nll_dense = 0.5 * (logdet + y @ np.linalg.solve(cov, y) + n * np.log(2.0 * np.pi))
    assert nll_v == pytest.approx(nll_dense, abs=1e-6)


def test_fit_recovers_scale_roughly():
    coords = np.random.default_rng(1).uniform(size=(400, 2))
    y = fsagp.simulate(coords, nu=1.5, sigma2=0.5, sigma1_2=1.0, rho=0.07, seed=21)
    X = np.empty((400, 0))
    out = fsagp.fit(coords, y, X, backend="cholesky", m=30, target_row_nnz=15,
                    seed=2, max_evals=60)
    assert out["converged"] or out["evals"] >= 60
    assert 0.05 < out["sigma2"] < 5.0
    assert 0.05 < out["sigma1_2"] < 10.0


def test_numerical_error_is_exposed():
    assert issubclass(fsagp.NumericalError, Exception)
