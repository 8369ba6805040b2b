"""Smoke tests of the Python module: shapes, invariants, and agreement
with closed forms on small problems."""

import math

import numpy as np
import pytest

import tmm

PARAMS = {"sigma1": 1.0, "sigma2": 1.0, "rho12": 0.4,
          "nu1": 3.0, "nu2": 4.0, "inv_a": 0.5}


def test_grids():
    g = tmm.regular_grid_latlon(4, 8, -80.0, 80.0)
    assert g.shape == (32, 2)
    assert g[0, 0] == pytest.approx(80.0)
    assert g[-1, 0] == pytest.approx(-80.0)
    f = tmm.fibonacci_latlon(50)
    assert f.shape == (50, 2)
    assert np.all(np.abs(f[:, 0]) <= 90.0)


def test_scalar_kernels():
    assert tmm.matern(0.0, 3.0, 2.0) == 1.0
    assert 0 < tmm.matern(1.0, 3.0, 2.0) < 1.0
    assert tmm.rho_bound(3.0, 4.0) == pytest.approx(0.9863359289574883, abs=1e-14)
    assert tmm.rho_bound(2.5, 2.5) == pytest.approx(1.0, abs=1e-12)
    # CRPS of a standard normal at its center: sigma (sqrt(2) - 1) / sqrt(pi).
    assert tmm.crps_gaussian(0.0, 0.0, 1.0) == pytest.approx(
        (math.sqrt(2.0) - 1.0) / math.sqrt(math.pi), abs=1e-12)


def test_cov_matrix_properties():
    g = tmm.regular_grid_latlon(4, 8)
    C = tmm.cov_matrix(PARAMS, g)
    assert C.shape == (64, 64)
    assert np.array_equal(C, C.T)
    # Co-located variance of the unit-variance model at nu = (3, 4):
    # -(F1(0) + F2(0)) = a^2 (1/4 + 1/6) at a = 2.
    assert np.allclose(np.diag(C), 5.0 / 3.0, atol=1e-12)
    eigvals = np.linalg.eigvalsh(C)
    assert eigvals.min() > -1e-10 * eigvals.max()


def test_cross_cov_consistency():
    g = tmm.regular_grid_latlon(3, 6)
    full = tmm.cov_matrix(PARAMS, g)  # tau = 0: diagonal is signal only
    cross = tmm.cross_cov_matrix(PARAMS, g[:4], g[:4])
    assert np.allclose(cross, full[:8, :8], atol=1e-12)


def test_simulate_deterministic():
    g = tmm.regular_grid_latlon(4, 8)
    a = tmm.simulate(PARAMS, g, n_reps=3, seed=7)
    b = tmm.simulate(PARAMS, g, n_reps=3, seed=7)
    c = tmm.simulate(PARAMS, g, n_reps=3, seed=8)
    assert a.shape == (3, 64)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)
    assert np.array_equal(a, tmm.simulate(PARAMS, g, n_reps=3, seed=7,
                                          threads=4))


def test_nll_spectral_matches_dense():
    g = tmm.regular_grid_latlon(4, 8)
    y = tmm.simulate(PARAMS, g, n_reps=2, seed=3)
    dense = tmm.nll(PARAMS, g, y, method="dense")
    spectral = tmm.nll(PARAMS, g, y, method="spectral")
    assert spectral == pytest.approx(dense, rel=1e-8)
    assert tmm.nll(PARAMS, g, y) == spectral  # auto picks the grid path


def test_nll_spectral_requires_grid():
    f = tmm.fibonacci_latlon(20)
    y = tmm.simulate(PARAMS, f, n_reps=1, seed=1)
    with pytest.raises(ValueError):
        tmm.nll(PARAMS, f, y, method="spectral")
    assert math.isfinite(tmm.nll(PARAMS, f, y))


def test_invalid_model_raises():
    g = tmm.regular_grid_latlon(3, 6)
    with pytest.raises(tmm.TmmError):
        tmm.cov_matrix({"rho12": 0.999}, g)
    with pytest.raises(ValueError):
        tmm.cov_matrix({"rho12": 0.4, "banana": 1.0}, g)


def test_fit_recovers_parameters():
    g = tmm.regular_grid_latlon(4, 8)
    y = tmm.simulate(PARAMS, g, n_reps=5, seed=7)
    r = tmm.fit(g, y, seed=11, n_lhs=6, max_iters=400)
    assert r["converged"]
    assert r["family"] == "tmm"
    assert abs(r["params"]["rho12"] - 0.4) < 0.45
    assert 0.3 < r["params"]["sigma1"] < 4.0
    assert math.isfinite(r["nll"])


def test_cokrige_interpolates_without_nugget():
    g = tmm.regular_grid_latlon(4, 8)
    y = tmm.simulate(PARAMS, g, n_reps=2, seed=5)
    pred = tmm.cokrige(PARAMS, g, y, g[:5])
    assert pred["mean"].shape == (2, 10)
    assert pred["sd"].shape == (10,)
    # tau = 0 and targets are training points: exact interpolation.
    assert np.allclose(pred["mean"][0], y[0, :10], atol=1e-6)
    assert np.all(pred["sd"] < 1e-3)


def test_cokrige_joint_cov():
    g = tmm.regular_grid_latlon(4, 8)
    y = tmm.simulate(PARAMS, g, n_reps=1, seed=5)
    pred = tmm.cokrige(PARAMS, g[:20], y[:, :40], g[25:30],
                       with_joint_cov=True)
    joint = pred["joint_cov"]
    assert joint.shape == (10, 10)
    assert np.allclose(np.sqrt(np.diag(joint)), pred["sd"], atol=1e-10)


def test_score_predictions():
    mean = np.zeros((1, 4))
    sd = np.full(4, 1.0)
    truth = np.zeros((1, 4))
    s = tmm.score_predictions(mean, sd, truth)
    assert s["pooled"]["mspe"] == 0.0
    assert s["pooled"]["logs"] == pytest.approx(0.5 * math.log(2 * math.pi),
                                                abs=1e-12)
    assert s["u"]["crps"] == pytest.approx(
        (math.sqrt(2.0) - 1.0) / math.sqrt(math.pi), abs=1e-12)


def test_empirical_cov_counts():
    g = tmm.regular_grid_latlon(4, 8)
    y = tmm.simulate(PARAMS, g, n_reps=4, seed=2)
    emp = tmm.empirical_cov(g, y, n_bins=10)
    n = 32
    assert sum(int(c) for c in emp["uu"]["count"]) == n * (n + 1) // 2
    assert emp["uu"]["bin_lo"][0] == 0.0
    # Zero-distance bin holds the self products: positive sample variance.
    assert emp["uu"]["mean"][0] > 0
    assert emp["vv"]["mean"][0] > 0


def test_veof_rank_recovery():
    rng = np.random.default_rng(42)
    t, n2 = 24, 16
    base = rng.standard_normal((t, 3)) @ rng.standard_normal((3, n2))
    noisy = base + 1e-8 * rng.standard_normal((t, n2))
    res = tmm.veof(noisy, k=-1, target_fraction=0.95)
    assert res["k"] == 3
    assert np.linalg.norm(res["residual"]) < 1e-6 * np.linalg.norm(base)
    assert res["singular_values"].shape == (min(t, n2),)
    assert res["explained"][:3].sum() > 0.999
