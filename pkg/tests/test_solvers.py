import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_system
from noisemap.operators import RealizedSystem
from noisemap.solvers import (
    SolverConfig,
    WhiteningMatrix,
    kaczmarz_regularized,
    tikhonov_objective,
    tikhonov_solve,
    weighted_tikhonov_solve,
    whitening_matrix,
    wrk_solve,
)


def rel(a, b):
    return np.linalg.norm(a - b) / np.linalg.norm(b)


def test_tikhonov_identity_cases(rng):
    sys = RealizedSystem(np.eye(4))
    y = rng.standard_normal(4)
    np.testing.assert_allclose(tikhonov_solve(sys, y, 0.0), y, rtol=1e-15)
    np.testing.assert_allclose(tikhonov_solve(sys, y, 1.0), y / 2, rtol=1e-15)


def test_tikhonov_matches_explicit_inverse(rng):
    sys = random_system(rng, 6, 5)
    y = rng.standard_normal(12)
    B = sys.rows
    ref = np.linalg.inv(B.T @ B + 0.3 * np.eye(5)) @ B.T @ y
    x = tikhonov_solve(sys, y, 0.3)
    np.testing.assert_allclose(x, ref, rtol=1e-10)
    normal = B.T @ B @ x + 0.3 * x - B.T @ y
    assert np.linalg.norm(normal) < 1e-10 * np.linalg.norm(B.T @ y)
    # the minimiser beats nearby points
    for _ in range(5):
        d = 1e-4 * rng.standard_normal(5)
        assert tikhonov_objective(sys, x + d, y, 0.3) > tikhonov_objective(sys, x, y, 0.3)


def test_tikhonov_batch_and_errors(rng):
    sys = random_system(rng, 6, 5)
    Y = rng.standard_normal((3, 12))
    X = tikhonov_solve(sys, Y, 0.5)
    for i in range(3):
        np.testing.assert_allclose(X[i], tikhonov_solve(sys, Y[i], 0.5), rtol=1e-12)
    with pytest.raises(np.linalg.LinAlgError):
        tikhonov_solve(RealizedSystem(np.zeros((2, 3))), np.zeros(2), 0.0)
    with pytest.raises(ValueError):
        tikhonov_solve(sys, np.zeros(11), 0.5)
    with pytest.raises(ValueError):
        tikhonov_solve(sys, Y, -1.0)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**31), st.floats(-10, 10))
def test_tikhonov_scaling_equivariance(seed, c):
    r = np.random.default_rng(seed)
    sys = random_system(r, 5, 4)
    y = r.standard_normal(10)
    x = tikhonov_solve(sys, y, 0.2)
    np.testing.assert_allclose(tikhonov_solve(sys, c * y, 0.2), c * x, rtol=1e-12, atol=1e-300)


def test_kaczmarz_zero_data(rng):
    sys = random_system(rng, 4, 3)
    assert not kaczmarz_regularized(sys, np.zeros(8), SolverConfig(0.5, 7)).any()


def test_kaczmarz_consistent_square_system(rng):
    q, _ = np.linalg.qr(rng.standard_normal((6, 6)))
    B = q * np.linspace(1.0, 2.0, 6)
    x_true = rng.standard_normal(6)
    sys = RealizedSystem(B)
    x = kaczmarz_regularized(sys, B @ x_true, SolverConfig(alpha=0.0, sweeps=10_000))
    np.testing.assert_allclose(x, x_true, atol=1e-8)


def test_kaczmarz_converges_to_tikhonov(rng):
    sys = random_system(rng, 10, 12)
    y = rng.standard_normal(20)
    x = kaczmarz_regularized(sys, y, SolverConfig(alpha=0.1, sweeps=10_000))
    assert rel(x, tikhonov_solve(sys, y, 0.1)) < 1e-6


@pytest.mark.parametrize("seed", range(5))
def test_kaczmarz_distance_decreases_with_sweeps(seed):
    r = np.random.default_rng(seed)
    sys = random_system(r, 10, 12)
    y = r.standard_normal(20)
    ref = tikhonov_solve(sys, y, 0.1)
    # the pixel-space error is only guaranteed to shrink once sweeps dominate the
    # transient; the joint (x, v) error of the augmented system shrinks every step
    dists = [rel(kaczmarz_regularized(sys, y, SolverConfig(0.1, k)), ref) for k in (10, 30, 100, 300, 1000)]
    assert all(b < a for a, b in zip(dists, dists[1:]))


def test_kaczmarz_options(rng):
    sys = random_system(rng, 10, 12)
    y = rng.standard_normal(20)
    ref = tikhonov_solve(sys, y, 0.1)
    shuffled = kaczmarz_regularized(sys, y, SolverConfig(0.1, 5000, shuffle=True, seed=3))
    assert rel(shuffled, ref) < 1e-6
    np.testing.assert_array_equal(shuffled, kaczmarz_regularized(sys, y, SolverConfig(0.1, 5000, True, 3)))
    early = kaczmarz_regularized(sys, y, SolverConfig(0.1, 10_000, tol=1e-12))
    assert rel(early, ref) < 1e-6
    Y = rng.standard_normal((3, 20))
    batch = kaczmarz_regularized(sys, Y, SolverConfig(0.1, 20))
    for i in range(3):
        np.testing.assert_array_equal(batch[i], kaczmarz_regularized(sys, Y[i], SolverConfig(0.1, 20)))
    with pytest.raises(ValueError):
        kaczmarz_regularized(sys, np.zeros(19))
    with pytest.raises(ValueError):
        SolverConfig(alpha=-1.0)
    with pytest.raises(ValueError):
        SolverConfig(sweeps=0)


def test_kaczmarz_skips_zero_rows(rng):
    rows = rng.standard_normal((8, 3))
    rows[2] = 0.0
    sys = RealizedSystem(rows)
    x_true = rng.standard_normal(3)
    x = kaczmarz_regularized(sys, rows @ x_true, SolverConfig(alpha=0.0, sweeps=20_000))
    assert np.all(np.isfinite(x))
    np.testing.assert_allclose(x, x_true, atol=1e-8)


def test_threaded_batch_is_identical(rng, monkeypatch):
    sys = random_system(rng, 10, 12)
    Y = rng.standard_normal((6, 20))
    serial = kaczmarz_regularized(sys, Y, SolverConfig(0.1, 50))
    monkeypatch.setenv("NOISEMAP_THREADS", "3")
    np.testing.assert_array_equal(kaczmarz_regularized(sys, Y, SolverConfig(0.1, 50)), serial)


def test_whitening_from_exact_stds():
    base = np.array([[1.0, -1.0, 0.0], [-1.0, 1.0, 0.0], [1.0, 1.0, 0.0], [-1.0, -1.0, 0.0]])
    real = np.hstack([base[:, :1] * 1.0, base[:, 1:2] * 2.0, base[:, :1] * 4.0, base[:, 1:2] * 1.0])
    w = whitening_matrix(real)
    np.testing.assert_allclose(w.diag, [1.0, 0.5, 0.25, 1.0], rtol=1e-15)
    assert w.diag.max() == 1.0


def test_whitening_statistics_and_degenerate_component(rng):
    noise = rng.standard_normal((100_000, 3)) + 1j * rng.standard_normal((100_000, 3))
    d = whitening_matrix(noise).diag
    assert d.size == 6 and np.all((d >= 0.97) & (d <= 1.0))
    data = rng.standard_normal((50, 4))
    data[:, 1] = 3.0
    w = whitening_matrix(data)
    assert w.diag[1] == 1.0
    assert np.all(np.isfinite(w.diag)) and np.all(w.diag > 0)
    with pytest.raises(ValueError):
        whitening_matrix(rng.standard_normal((1, 4)))
    with pytest.raises(ValueError):
        WhiteningMatrix(np.array([0.5, 1.5]))


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**31), st.floats(1e-3, 1e3))
def test_whitening_scale_invariance(seed, c):
    r = np.random.default_rng(seed)
    noise = r.standard_normal((20, 6)) * r.uniform(0.5, 3, 6)
    np.testing.assert_allclose(whitening_matrix(c * noise).diag, whitening_matrix(noise).diag, rtol=1e-12)


def test_wrk_identity_matches_rk_bitwise(rng):
    for _ in range(5):
        sys = random_system(rng, 8, 6)
        y = rng.standard_normal(16)
        cfg = SolverConfig(0.3, 25)
        np.testing.assert_array_equal(wrk_solve(sys, y, WhiteningMatrix.identity(16), cfg),
                                      kaczmarz_regularized(sys, y, cfg))


def test_wrk_is_rk_on_scaled_rows(rng):
    sys = random_system(rng, 8, 6)
    y = rng.standard_normal(16)
    d = rng.uniform(0.1, 1.0, 16)
    d[0] = 1.0
    cfg = SolverConfig(0.3, 25)
    scaled = RealizedSystem(sys.rows * d[:, None])
    np.testing.assert_array_equal(wrk_solve(sys, y, WhiteningMatrix(d), cfg),
                                  kaczmarz_regularized(scaled, y * d, cfg))


def test_wrk_limit_is_weighted_tikhonov(rng):
    sys = random_system(rng, 10, 6)
    stds = np.repeat([0.5, 1.0, 2.0, 4.0, 1.0], 4)
    noise = rng.standard_normal((50_000, 20)) * stds
    w = whitening_matrix(noise)
    y = rng.standard_normal(20)
    x = wrk_solve(sys, y, w, SolverConfig(0.2, 20_000))
    ref = weighted_tikhonov_solve(sys, y, w.diag ** 2, 0.2)
    B, W2 = sys.rows, np.diag(w.diag ** 2)
    explicit = np.linalg.solve(B.T @ W2 @ B + 0.2 * np.eye(6), B.T @ W2 @ y)
    np.testing.assert_allclose(ref, explicit, rtol=1e-10)
    assert rel(x, ref) < 1e-6


def test_wrk_tiny_weight_row_is_negligible(rng):
    sys = random_system(rng, 6, 4)
    y = rng.standard_normal(12)
    d = np.ones(12)
    d[3] = 1e-12
    cfg = SolverConfig(0.5, 20_000)
    full = wrk_solve(sys, y, WhiteningMatrix(d), cfg)
    keep = (np.arange(12) != 3).astype(float)
    dropped = weighted_tikhonov_solve(sys, y, keep, 0.5)
    assert np.abs(full - dropped).max() < 1e-8
