"""Learned-discrepancy MAP reconstruction.

The data term is the negative log-density of the residual ``y - Bx`` under a
trained flow, dropping the constant ``(M/2) ln 2pi``:

    D(x) = 0.5 * ||phi(r)||^2 - logdet J_phi(r)

and the objective adds ``0.5 * alpha * ||x||^2``. Residuals are fed to the
flow as ``[2, K']`` arrays, channel 0 holding real parts.
"""
from dataclasses import dataclass, field

import numpy as np

from .errors import DescentError
from .solvers import SolverConfig, kaczmarz_regularized

ARMIJO_SLOPE = 1e-4
GRAD_TOL = 1e-9


@dataclass
class LdaConfig:
    alpha: float = 1.0
    step_size: float = 1.0
    max_iterations: int = 2000
    backtracking: bool = True
    init: object = "rk"
    rk: SolverConfig = field(default_factory=SolverConfig)

    def __post_init__(self):
        if not self.alpha >= 0:
            raise ValueError("alpha must be nonnegative")
        if not self.step_size > 0:
            raise ValueError("step_size must be positive")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be at least 1")


def to_flow(r):
    """Realized residual ``(.., 2K')`` -> flow input ``(.., 2, K')``."""
    r = np.asarray(r, dtype=np.float64)
    return np.swapaxes(r.reshape(r.shape[:-1] + (-1, 2)), -1, -2)


def from_flow(g):
    g = np.asarray(g)
    return np.swapaxes(g, -1, -2).reshape(g.shape[:-2] + (-1,))


def _check(model, sys, y_real):
    y_real = np.asarray(y_real, dtype=np.float64)
    if y_real.shape[-1] != sys.n_measurements:
        raise ValueError(f"expected {sys.n_measurements} realized measurements, got {y_real.shape[-1]}")
    if model.input_shape != (2, sys.n_measurements // 2):
        raise ValueError(f"flow shape {model.input_shape} does not fit {sys.n_measurements} measurements")
    return y_real


def lda_discrepancy(model, sys, x, y_real):
    y_real = _check(model, sys, y_real)
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != sys.n_pixels:
        raise ValueError(f"expected {sys.n_pixels} pixels, got {x.shape[-1]}")
    z, logdet = model.forward(to_flow(y_real - x @ sys.rows.T))
    return 0.5 * np.sum(z * z, axis=(-2, -1)) - logdet


def lda_objective(model, sys, x, y_real, alpha):
    x = np.asarray(x, dtype=np.float64)
    return lda_discrepancy(model, sys, x, y_real) + 0.5 * alpha * np.sum(x * x, axis=-1)


def lda_gradient(model, sys, x, y_real, alpha):
    y_real = _check(model, sys, y_real)
    x = np.asarray(x, dtype=np.float64)
    g_quad, g_logdet = model.grad_input(to_flow(y_real - x @ sys.rows.T))
    return -from_flow(g_quad - g_logdet) @ sys.rows + alpha * x


def _value_and_grad(model, sys, x, y_real, alpha):
    val, g = model.value_and_grad_input(to_flow(y_real - x @ sys.rows.T))
    val = val + 0.5 * alpha * np.sum(x * x, axis=-1)
    return val, -from_flow(g) @ sys.rows + alpha * x


def lipschitz_estimate(sys, alpha=0.0, iterations=100):
    """Power-iteration estimate of ``||B||^2 + alpha``."""
    rng = np.random.default_rng(0)
    v = rng.standard_normal(sys.n_pixels)
    lam = 0.0
    for _ in range(iterations):
        w = sys.rows.T @ (sys.rows @ v)
        lam = np.linalg.norm(w)
        if lam == 0:
            break
        v = w / lam
    return float(lam) + alpha


def _initial(sys, y_real, cfg):
    if isinstance(cfg.init, str):
        if cfg.init == "zero":
            return np.zeros(y_real.shape[:-1] + (sys.n_pixels,))
        if cfg.init == "rk":
            return np.asarray(kaczmarz_regularized(sys, y_real, cfg.rk), dtype=np.float64)
        raise ValueError(f"unknown initialisation {cfg.init!r}")
    x0 = np.asarray(cfg.init, dtype=np.float64)
    return np.broadcast_to(x0, y_real.shape[:-1] + (sys.n_pixels,)).copy()


def lda_reconstruct(model, sys, y_real, cfg=None, x0=None):
    """Gradient descent on the learned-discrepancy objective.

    The base step is ``cfg.step_size / L`` with ``L`` the power-iteration
    estimate of ``||B||^2 + alpha``. With backtracking, every iteration
    first tries twice the last accepted step and halves it until the Armijo
    condition holds, so the objective trace never increases. ``y_real`` may
    be a batch; steps are then tracked per sample.

    Returns ``(x, trace)``; ``trace`` has one objective value per
    iteration, starting with the initial point.
    """
    cfg = cfg or LdaConfig()
    y_real = _check(model, sys, y_real)
    single = y_real.ndim == 1
    y = y_real[None] if single else y_real
    if x0 is None:
        x = _initial(sys, y, cfg)
    else:
        x = np.array(np.broadcast_to(x0, y.shape[:-1] + (sys.n_pixels,)), dtype=np.float64)
    alpha = cfg.alpha
    base = cfg.step_size / lipschitz_estimate(sys, alpha)
    step = np.full(y.shape[0], base)
    active = np.ones(y.shape[0], dtype=bool)
    val, grad = _value_and_grad(model, sys, x, y, alpha)
    trace = [val.copy()]
    for it in range(cfg.max_iterations):
        if not np.all(np.isfinite(val)):
            raise DescentError(f"non-finite objective at iteration {it}", it)
        active &= np.abs(grad).max(axis=1) >= GRAD_TOL
        if not active.any():
            break
        idx = np.flatnonzero(active)
        if not cfg.backtracking:
            x[idx] -= base * grad[idx]
            val[idx], grad[idx] = _value_and_grad(model, sys, x[idx], y[idx], alpha)
        else:
            trial = np.minimum(2.0 * step[idx], 1e3 * base)
            pending = idx
            gsq = np.sum(grad[idx] ** 2, axis=1)
            for _ in range(60):
                cand = x[pending] - trial[:, None] * grad[pending]
                cval, cgrad = _value_and_grad(model, sys, cand, y[pending], alpha)
                ok = np.isfinite(cval) & (cval <= val[pending] - ARMIJO_SLOPE * trial * gsq)
                acc = pending[ok]
                x[acc], val[acc], grad[acc], step[acc] = cand[ok], cval[ok], cgrad[ok], trial[ok]
                pending, trial, gsq = pending[~ok], 0.5 * trial[~ok], gsq[~ok]
                if pending.size == 0:
                    break
            # no admissible step left: treat as converged to working precision
            active[pending] = False
        trace.append(val.copy())
    trace = np.array(trace)
    if single:
        return x[0], trace[:, 0]
    return x, trace
