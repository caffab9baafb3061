"""Method dispatch, per-concentration grid search and the desk-scale benchmark."""
import logging
import time
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError
from .estimators import (
    KaczmarzReconstructor,
    LearnedDiscrepancyReconstructor,
    NoiseFlowDensity,
    TikhonovReconstructor,
    WhitenedKaczmarzReconstructor,
)
from .metrics import MetricConfig, evaluate_set, grid_search
from .operators import realize, realize_data

log = logging.getLogger(__name__)

METHOD_PARAMS = {
    "tikhonov": {"alpha"},
    "rk": {"alpha", "sweeps"},
    "wrk": {"alpha", "sweeps"},
    "lda": {"alpha", "iterations", "step_size", "rk_alpha", "rk_sweeps"},
}


def check_params(method, params):
    if method not in METHOD_PARAMS:
        raise ConfigError(f"unknown method {method!r}", "method")
    extra = set(params) - METHOD_PARAMS[method]
    if extra:
        name = sorted(extra)[0]
        raise ConfigError(f"method {method!r} takes no parameter {name!r}", name)
    for key, value in params.items():
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"parameter {key!r} must be numeric", key)
        if key in ("sweeps", "iterations", "rk_sweeps") and (int(value) != value or value < 1):
            raise ConfigError(f"{key} must be a positive integer", key)
        if key in ("alpha", "rk_alpha") and value < 0:
            raise ConfigError(f"{key} must be nonnegative", key)
        if key == "step_size" and value <= 0:
            raise ConfigError("step_size must be positive", key)


def make_reconstructor(method, params, operator, noise=None, flow=None):
    """Fitted estimator for ``method`` with ``params`` on ``operator``.

    ``wrk`` estimates its whitening from ``noise``; ``lda`` needs a trained
    ``flow``.
    """
    check_params(method, params)
    alpha = float(params.get("alpha", 1.0))
    if method == "tikhonov":
        return TikhonovReconstructor(operator, alpha).fit()
    if method == "rk":
        return KaczmarzReconstructor(operator, alpha, int(params.get("sweeps", 10))).fit()
    if method == "wrk":
        if noise is None:
            raise ConfigError("wrk needs a noise bank for whitening", "noise_bank")
        return WhitenedKaczmarzReconstructor(operator, alpha, int(params.get("sweeps", 10))).fit(noise)
    if flow is None:
        raise ConfigError("lda needs a trained flow checkpoint", "checkpoint")
    return LearnedDiscrepancyReconstructor(
        operator,
        alpha,
        flow=flow,
        step_size=float(params.get("step_size", 1.0)),
        max_iterations=int(params.get("iterations", 100)),
        rk_alpha=params.get("rk_alpha"),
        rk_sweeps=int(params.get("rk_sweeps", 10)),
    ).fit()


def reconstruct_images(method, params, operator, measurements, noise=None, flow=None):
    """Reconstruct a batch of complex measurements into images on the operator grid."""
    est = make_reconstructor(method, params, operator, noise, flow)
    x = est.transform(realize_data(measurements))
    return x.reshape((-1,) + tuple(operator.grid))


def density_from_config(cfg, seed):
    return NoiseFlowDensity(
        architecture=cfg.flow_setting("architecture"),
        widths=tuple(cfg.flow_setting("widths")),
        depth=int(cfg.flow_setting("depth")),
        n_couplings=int(cfg.flow_setting("n_couplings")),
        batch_size=int(cfg.flow_setting("batch_size")),
        epochs=int(cfg.flow_setting("epochs")),
        learning_rate=float(cfg.flow_setting("learning_rate")),
        validation_fraction=float(cfg.flow_setting("validation_fraction")),
        seed=seed,
    )


def _plain(params):
    return {k: (int(v) if isinstance(v, (int, np.integer)) else float(v)) for k, v in params.items()}


@dataclass
class BenchmarkResult:
    reports: dict = field(default_factory=dict)
    best_params: dict = field(default_factory=dict)
    searches: dict = field(default_factory=dict)
    flow_history: object = None

    def mean_ssim(self, method, c):
        return self.reports[(method, float(c))].ssim_mean

    def table(self):
        """Text table of mean SSIM/PSNR per method and concentration."""
        conc = sorted({c for _, c in self.reports})
        methods = [m for m in ("tikhonov", "rk", "wrk", "lda") if any(k[0] == m for k in self.reports)]
        lines = ["method    " + "".join(f"  c={c:<8g}" for c in conc)]
        for m in methods:
            lines.append(f"{m:<10}" + "".join(f"  {self.mean_ssim(m, c):<10.4f}" for c in conc))
        lines.append("")
        for m in methods:
            lines.append(f"{m:<10}" + "".join(f"  {self.reports[(m, c)].psnr_mean:<10.2f}" for c in conc))
        return "\n".join(lines) + "\n"


def run_benchmark(dataset, cfg, flow=None):
    """Grid-search every method on the validation split and score the rest.

    The first ``dataset.n_validation`` samples select the parameters for
    each method and concentration. ``lda`` starts from ``rk`` with the
    parameters ``rk`` selected at the same concentration. If ``flow`` is
    None and ``lda`` is requested, a flow is trained on the noise bank.
    """
    result = BenchmarkResult()
    op = dataset.operator_rec
    nv = dataset.n_validation
    if nv < 1:
        raise ConfigError("the benchmark needs validation samples", "n_validation")
    methods = [m for m in ("tikhonov", "rk", "wrk", "lda") if m in cfg.methods]
    if "lda" in methods and "rk" not in methods:
        methods.insert(methods.index("lda"), "rk")
    if "lda" in methods and flow is None:
        start = time.perf_counter()
        density = density_from_config(cfg, cfg.seed).fit(dataset.noise_bank)
        flow, result.flow_history = density.flow_, density.history_
        log.info("flow trained in %.1f s", time.perf_counter() - start)
    realize(op)  # fail early on a malformed operator
    for c in sorted(set(cfg.concentrations)):
        Y = dataset.measurements(c)
        gts = dataset.ground_truth(c)
        mcfg = MetricConfig(data_range=c)
        for method in methods:
            grid = {k: list(v) for k, v in cfg.grid(method).items()}
            if method == "lda":
                rk_best = result.best_params[("rk", c)]
                grid.setdefault("rk_alpha", [rk_best["alpha"]])
                grid.setdefault("rk_sweeps", [rk_best["sweeps"]])

            def run(params, meas, method=method):
                return reconstruct_images(method, params, op, meas, dataset.noise_bank, flow)

            search = grid_search(run, grid, Y[:nv], gts[:nv], mcfg)
            best = _plain(search.best_params)
            start = time.perf_counter()
            recs = run(best, Y[nv:])
            elapsed = time.perf_counter() - start
            n = len(recs)
            report = evaluate_set(recs, gts[nv:], mcfg, method, best, c, [elapsed / n] * n)
            result.best_params[(method, c)] = best
            result.searches[(method, c)] = search
            result.reports[(method, c)] = report
            log.info("c=%g %s %s ssim %.4f", c, method, best, report.ssim_mean)
    return result
