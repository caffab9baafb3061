import math

import numpy as np
import pytest
from scipy.integrate import trapezoid

from conftest import random_system, randomize_flow
from noisemap.flow import FlowModel, TrainConfig, train
from noisemap.lda import LdaConfig, lda_objective, lda_reconstruct
from noisemap.phantoms import NoiseSample
from noisemap.probability import (
    GaussianDensity,
    kl_estimate,
    log_posterior_unnormalized,
    log_prior,
    posterior_offset,
)
from noisemap.solvers import tikhonov_solve

LOG_2PI = math.log(2 * math.pi)


def test_gaussian_density_values():
    assert GaussianDensity(3).log_density(np.zeros(3)) == pytest.approx(-1.5 * LOG_2PI, rel=1e-15)
    v = np.array([0.3, -1.2])
    d = GaussianDensity(2, [4.0, 0.25])
    ref = sum(-0.5 * math.log(2 * math.pi * s2) - 0.5 * vi ** 2 / s2 for vi, s2 in zip(v, [4.0, 0.25]))
    assert d.log_density(v) == pytest.approx(ref, rel=1e-14)
    with pytest.raises(ValueError):
        d.log_density(np.zeros(3))


def test_gaussian_density_normalises():
    g = np.linspace(-12, 12, 4801)
    one = np.exp(GaussianDensity(1, 1.7).log_density(g[:, None]))
    assert abs(trapezoid(one, g) - 1.0) < 1e-6
    xx, yy = np.meshgrid(g[::4], g[::4], indexing="ij")
    two = np.exp(GaussianDensity(2, [0.5, 2.0]).log_density(np.stack([xx, yy], -1)))
    assert abs(trapezoid(trapezoid(two, g[::4], axis=1), g[::4]) - 1.0) < 1e-6


def test_log_prior():
    x = np.array([1.0, -2.0])
    assert log_prior(x, 2.0) == pytest.approx(math.log(2 / (2 * math.pi)) - 0.5 * 2.0 * 5.0, rel=1e-14)
    with pytest.raises(ValueError):
        log_prior(x, 0.0)


def test_posterior_at_origin_identity_flow(rng):
    sys = random_system(rng, 4, 6)
    model = FlowModel.multiscale(4, (4, 2, 2), depth=1)
    val = log_posterior_unnormalized(model, sys, np.zeros(6), np.zeros(8), 1.0)
    assert val == pytest.approx(-4 * LOG_2PI + 3 * math.log(1 / (2 * math.pi)), rel=1e-14)


def test_posterior_plus_objective_is_constant(rng):
    sys = random_system(rng, 4, 6)
    y = rng.standard_normal(8)
    model = randomize_flow(FlowModel.multiscale(4, (4, 2, 2), depth=1), rng)
    const = posterior_offset(model, sys, 0.8)
    for _ in range(10):
        x = rng.standard_normal(6)
        total = log_posterior_unnormalized(model, sys, x, y, 0.8) + lda_objective(model, sys, x, y, 0.8)
        assert total == pytest.approx(const, rel=1e-12)
    with pytest.raises(ValueError):
        log_posterior_unnormalized(model, sys, np.zeros(5), y, 0.8)


def test_map_on_one_pixel_grid(rng):
    sys = random_system(rng, 4, 1)
    y = rng.standard_normal(8)
    # a mild perturbation keeps the one-pixel posterior unimodal
    model = randomize_flow(FlowModel.multiscale(4, (8, 4, 4), depth=2), rng, 0.1)
    x_lda, _ = lda_reconstruct(model, sys, y, LdaConfig(alpha=0.5, max_iterations=2000))
    grid = np.linspace(x_lda[0] - 3, x_lda[0] + 3, 60_001)
    post = log_posterior_unnormalized(model, sys, grid[:, None], np.broadcast_to(y, (grid.size, 8)), 0.5)
    assert abs(grid[np.argmax(post)] - x_lda[0]) <= 1e-4


def test_map_equivalence_identity_flow(rng):
    sys = random_system(rng, 5, 3)
    y = rng.standard_normal(10)
    model = FlowModel.single_scale(5, n_couplings=2, width=4, depth=1)
    x_tik = tikhonov_solve(sys, y, 0.4)
    best = log_posterior_unnormalized(model, sys, x_tik, y, 0.4)
    for _ in range(10):
        x = x_tik + 1e-3 * rng.standard_normal(3)
        assert log_posterior_unnormalized(model, sys, x, y, 0.4) < best


def test_kl_estimate_standard_normal():
    model = FlowModel.multiscale(4, (4, 2, 2), depth=1)
    r = np.random.default_rng(0)
    noise = r.standard_normal((100_000, 4)) + 1j * r.standard_normal((100_000, 4))
    entropy = 4 * (1 + LOG_2PI)
    assert abs(kl_estimate(model, noise) - entropy) < 0.02 * entropy
    samples = [NoiseSample(v) for v in noise[:50]]
    assert kl_estimate(model, samples + samples) == pytest.approx(kl_estimate(model, samples), rel=1e-14)
    with pytest.raises(ValueError):
        kl_estimate(model, [])


def test_kl_estimate_drops_after_training():
    r = np.random.default_rng(3)
    noise = (r.standard_normal((3000, 4)) + 1j * r.standard_normal((3000, 4))) * [0.3, 3.0, 1.0, 0.5]
    model = FlowModel.multiscale(4, (8, 4, 4), depth=2)
    before = kl_estimate(model, noise)
    train(model, noise, TrainConfig(batch_size=128, epochs=5, learning_rate=1e-2))
    assert kl_estimate(model, noise) < before
