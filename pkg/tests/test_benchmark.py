import numpy as np
import pytest

from noisemap.benchmark import check_params, make_reconstructor, reconstruct_images, run_benchmark
from noisemap.config import RunConfig
from noisemap.dataset import generate
from noisemap.errors import ConfigError
from noisemap.operators import realize, realize_data
from noisemap.solvers import tikhonov_solve


def tiny_config(**kw):
    base = dict(
        seed=2, concentrations=[2, 20], n_phantoms=5, n_validation=2, n_noise_bank=200,
        operator={"K": 16, "band": [0, 16], "upsample": 2},
        methods=["tikhonov", "lda"],
        grids={"tikhonov": {"alpha": [0.1, 1.0]}, "rk": {"alpha": [0.1, 1.0], "sweeps": [3]},
               "lda": {"alpha": [1.0], "iterations": [5]}},
        flow={"widths": [4, 4, 4], "depth": 1, "epochs": 1, "batch_size": 50},
    )
    base.update(kw)
    return RunConfig.from_dict(base)


@pytest.mark.parametrize("method, params, field", [
    ("svd", {}, "method"),
    ("tikhonov", {"sweeps": 3}, "sweeps"),
    ("rk", {"sweeps": 0}, "sweeps"),
    ("rk", {"alpha": "x"}, "alpha"),
    ("lda", {"step_size": 0.0}, "step_size"),
])
def test_check_params(method, params, field):
    with pytest.raises(ConfigError) as err:
        check_params(method, params)
    assert err.value.field == field


def test_make_reconstructor_requirements():
    ds = generate(tiny_config())
    with pytest.raises(ConfigError):
        make_reconstructor("wrk", {}, ds.operator_rec)
    with pytest.raises(ConfigError):
        make_reconstructor("lda", {}, ds.operator_rec)
    recs = reconstruct_images("tikhonov", {"alpha": 0.5}, ds.operator_rec, ds.measurements(2))
    assert recs.shape == (5, 17, 15)
    ref = tikhonov_solve(realize(ds.operator_rec), realize_data(ds.measurements(2)), 0.5)
    np.testing.assert_array_equal(recs.reshape(5, -1), ref)


def test_run_benchmark_adds_rk_for_lda():
    cfg = tiny_config()
    result = run_benchmark(generate(cfg), cfg)
    assert {m for m, _ in result.reports} == {"tikhonov", "rk", "lda"}
    for c in (2.0, 20.0):
        best = result.best_params[("lda", c)]
        rk = result.best_params[("rk", c)]
        assert best["rk_alpha"] == rk["alpha"] and best["rk_sweeps"] == rk["sweeps"]
        assert result.reports[("tikhonov", c)].n == 3
    table = result.table()
    assert table.splitlines()[0].split() == ["method", "c=2", "c=20"]
    assert result.flow_history is not None


def test_run_benchmark_needs_validation():
    cfg = tiny_config(n_validation=0, methods=["tikhonov"])
    with pytest.raises(ConfigError):
        run_benchmark(generate(cfg), cfg)
