"""SSIM/PSNR metrics, dataset aggregation and parameter grid search."""
import math
import time
from dataclasses import asdict, dataclass, field

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from sklearn.model_selection import ParameterGrid


@dataclass(frozen=True)
class MetricConfig:
    data_range: float = 10.0
    window: int = 7
    sigma: float = 1.5
    k1: float = 0.01
    k2: float = 0.03

    def __post_init__(self):
        if self.window < 1 or self.window % 2 == 0:
            raise ValueError("SSIM window must be a positive odd integer")
        if not self.data_range > 0:
            raise ValueError("data_range must be positive")


def gaussian_window(size, sigma):
    r = np.arange(size) - (size - 1) / 2.0
    g = np.exp(-0.5 * (r / sigma) ** 2)
    w = np.outer(g, g)
    return w / w.sum()


def _as_image(a):
    return np.asarray(getattr(a, "pixels", a), dtype=np.float64)


def ssim(x, x_hat, cfg=None):
    """Mean SSIM over all fully-contained Gaussian-weighted windows."""
    cfg = cfg or MetricConfig()
    x, x_hat = _as_image(x), _as_image(x_hat)
    if x.shape != x_hat.shape:
        raise ValueError(f"image shapes differ: {x.shape} vs {x_hat.shape}")
    if x.ndim != 2 or cfg.window > min(x.shape):
        raise ValueError(f"window {cfg.window} does not fit image of shape {x.shape}")
    w = gaussian_window(cfg.window, cfg.sigma)

    def wmean(img):
        return np.einsum("ijkl,kl->ij", sliding_window_view(img, w.shape), w)

    c1 = (cfg.k1 * cfg.data_range) ** 2
    c2 = (cfg.k2 * cfg.data_range) ** 2
    mx, my = wmean(x), wmean(x_hat)
    sxx = wmean(x * x) - mx * mx
    syy = wmean(x_hat * x_hat) - my * my
    sxy = wmean(x * x_hat) - mx * my
    num = (2 * mx * my + c1) * (2 * sxy + c2)
    den = (mx * mx + my * my + c1) * (sxx + syy + c2)
    return float(np.mean(num / den))


def psnr(x, x_hat, data_range):
    x, x_hat = _as_image(x), _as_image(x_hat)
    if x.shape != x_hat.shape:
        raise ValueError(f"image shapes differ: {x.shape} vs {x_hat.shape}")
    mse = float(np.mean((x - x_hat) ** 2))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(data_range ** 2 / mse)


def _mean_std(values):
    n = len(values)
    if n == 0:
        return math.nan, math.nan
    mean = math.fsum(values) / n
    if n == 1:
        return mean, 0.0
    return mean, math.sqrt(math.fsum((v - mean) ** 2 for v in values) / (n - 1))


@dataclass
class ReconstructionReport:
    method: str
    params: dict
    concentration: float
    ssim: list
    psnr: list
    seconds: list = field(default_factory=list)
    metric_config: dict = field(default_factory=dict)

    @property
    def n(self):
        return len(self.ssim)

    @property
    def ssim_mean(self):
        return _mean_std(self.ssim)[0]

    @property
    def ssim_std(self):
        return _mean_std(self.ssim)[1]

    @property
    def finite_psnr(self):
        return [v for v in self.psnr if math.isfinite(v)]

    @property
    def psnr_mean(self):
        return _mean_std(self.finite_psnr)[0]

    @property
    def psnr_std(self):
        return _mean_std(self.finite_psnr)[1]

    @property
    def n_infinite_psnr(self):
        return len(self.psnr) - len(self.finite_psnr)

    def summary(self):
        return {
            "method": self.method,
            "params": self.params,
            "concentration": self.concentration,
            "n": self.n,
            "ssim_mean": self.ssim_mean,
            "ssim_std": self.ssim_std,
            "psnr_mean": self.psnr_mean,
            "psnr_std": self.psnr_std,
            "n_infinite_psnr": self.n_infinite_psnr,
            "seconds_mean": _mean_std(self.seconds)[0] if self.seconds else None,
            "metric_config": self.metric_config,
        }

    def to_text(self):
        s = self.summary()
        lines = [
            f"method          {s['method']}",
            f"params          {s['params']}",
            f"concentration   {s['concentration']:g}",
            f"samples         {s['n']}",
            f"SSIM mean/std   {s['ssim_mean']:.4f} / {s['ssim_std']:.4f}",
            f"PSNR mean/std   {s['psnr_mean']:.2f} / {s['psnr_std']:.2f}  ({s['n_infinite_psnr']} infinite excluded)",
        ]
        if s["seconds_mean"] is not None:
            lines.append(f"seconds/recon   {s['seconds_mean']:.4g}")
        lines.append("")
        lines.append("index      ssim       psnr")
        for i, (a, b) in enumerate(zip(self.ssim, self.psnr)):
            lines.append(f"{i:5d}  {a:8.4f}  {b:9.3f}")
        return "\n".join(lines) + "\n"


def evaluate_set(reconstructions, ground_truths, cfg=None, method="", params=None,
                 concentration=None, seconds=None):
    cfg = cfg or MetricConfig()
    recs = [_as_image(r) for r in reconstructions]
    gts = [_as_image(g) for g in ground_truths]
    if len(recs) != len(gts):
        raise ValueError(f"{len(recs)} reconstructions for {len(gts)} ground truths")
    if not recs:
        raise ValueError("nothing to evaluate")
    return ReconstructionReport(
        method=method,
        params=dict(params or {}),
        concentration=cfg.data_range if concentration is None else concentration,
        ssim=[ssim(g, r, cfg) for r, g in zip(recs, gts)],
        psnr=[psnr(g, r, cfg.data_range) for r, g in zip(recs, gts)],
        seconds=list(seconds or []),
        metric_config=asdict(cfg),
    )


def _tie_key(params):
    return (params.get("alpha", 0.0), params.get("iterations", params.get("sweeps", 0)))


@dataclass
class GridSearchResult:
    best_params: dict
    best_score: float
    table: list


def grid_search(method, param_grid, measurements, ground_truths, cfg=None):
    """Pick the grid point with the highest mean SSIM.

    ``method(params, measurements)`` returns one reconstruction per
    measurement, already shaped like the ground truths. ``param_grid`` is a
    dict of lists or a list of such dicts (as accepted by scikit-learn's
    ``ParameterGrid``). Ties go to the smaller ``alpha``, then to fewer
    iterations, then to the earlier grid point.
    """
    cfg = cfg or MetricConfig()
    points = list(ParameterGrid(param_grid))
    if not points:
        raise ValueError("parameter grid is empty")
    if len(measurements) == 0:
        raise ValueError("no samples to search on")
    table = []
    for params in points:
        start = time.perf_counter()
        recs = method(params, measurements)
        elapsed = time.perf_counter() - start
        score = math.fsum(ssim(g, r, cfg) for r, g in zip(recs, ground_truths)) / len(ground_truths)
        table.append({"params": params, "ssim_mean": score, "seconds": elapsed})
    best = max(
        range(len(table)),
        key=lambda i: (table[i]["ssim_mean"], tuple(-v for v in _tie_key(table[i]["params"])), -i),
    )
    return GridSearchResult(dict(table[best]["params"]), table[best]["ssim_mean"], table)
