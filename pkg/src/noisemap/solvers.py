"""Classical baselines: Tikhonov, regularized Kaczmarz, whitened Kaczmarz.

All solvers act on a :class:`~noisemap.operators.RealizedSystem` and realized
(real/imaginary interleaved) data.
"""
from dataclasses import dataclass

import numba
import numpy as np

from ._parallel import ordered_map
from .operators import realize_data
from .phantoms import stack_noise

STD_FLOOR = 1e-12


@dataclass(frozen=True)
class SolverConfig:
    alpha: float = 1.0
    sweeps: int = 10
    shuffle: bool = False
    seed: int = 0
    tol: float = None

    def __post_init__(self):
        if not self.alpha >= 0:
            raise ValueError("alpha must be nonnegative")
        if self.sweeps < 1:
            raise ValueError("sweeps must be at least 1")


@dataclass(frozen=True, eq=False)
class WhiteningMatrix:
    diag: np.ndarray

    def __post_init__(self):
        diag = np.asarray(self.diag, dtype=np.float64)
        if diag.ndim != 1 or not np.all((diag > 0) & (diag <= 1)):
            raise ValueError("whitening weights must lie in (0, 1]")
        object.__setattr__(self, "diag", diag)

    @classmethod
    def identity(cls, n):
        return cls(np.ones(n))


def _check(sys, y_real):
    y_real = np.asarray(y_real, dtype=np.float64)
    if y_real.shape[-1] != sys.n_measurements:
        raise ValueError(f"expected {sys.n_measurements} realized measurements, got {y_real.shape[-1]}")
    return y_real


def tikhonov_solve(sys, y_real, alpha):
    """Minimiser of ``||y - Bx||^2 + alpha ||x||^2`` via the normal equations.

    ``y_real`` may be a batch ``(n, 2K')``. A singular system at ``alpha = 0``
    raises ``numpy.linalg.LinAlgError``.
    """
    if alpha < 0:
        raise ValueError("alpha must be nonnegative")
    y_real = _check(sys, y_real)
    B = sys.rows
    gram = B.T @ B + alpha * np.eye(B.shape[1])
    return np.linalg.solve(gram, (y_real @ B).T).T


def tikhonov_objective(sys, x, y_real, alpha):
    r = np.asarray(y_real) - sys.rows @ np.asarray(x)
    return float(r @ r + alpha * np.asarray(x) @ np.asarray(x))


@numba.njit(cache=True, nogil=True)
def _kaczmarz_sweeps(rows, norms, y, alpha, order, sweeps, tol):
    m, n = rows.shape
    x = np.zeros(n)
    v = np.zeros(m)
    sa = np.sqrt(alpha)
    for _ in range(sweeps):
        if tol > 0:
            x_old = x.copy()
        for idx in range(m):
            i = order[idx]
            denom = norms[i] + alpha
            if denom == 0.0:
                continue
            dot = 0.0
            for j in range(n):
                dot += rows[i, j] * x[j]
            beta = (y[i] - dot - sa * v[i]) / denom
            for j in range(n):
                x[j] += beta * rows[i, j]
            v[i] += beta * sa
        if tol > 0:
            num = 0.0
            den = 0.0
            for j in range(n):
                num += (x[j] - x_old[j]) ** 2
                den += x[j] ** 2
            if den > 0 and np.sqrt(num / den) < tol:
                break
    return x


def _row_order(m, cfg):
    if cfg.shuffle:
        return np.random.default_rng(cfg.seed).permutation(m).astype(np.int64)
    return np.arange(m, dtype=np.int64)


def kaczmarz_regularized(sys, y_real, cfg=None):
    """Regularized Kaczmarz sweeps on the augmented system ``[B, sqrt(alpha) I]``.

    Starts from ``x = 0, v = 0``; in the limit of many sweeps the iterate is
    the Tikhonov minimiser. Rows with zero norm are skipped when
    ``alpha = 0``. ``y_real`` may be a batch.
    """
    cfg = cfg or SolverConfig()
    y_real = _check(sys, y_real)
    order = _row_order(sys.n_measurements, cfg)
    tol = float(cfg.tol) if cfg.tol else 0.0

    def one(y):
        return _kaczmarz_sweeps(sys.rows, sys.row_norms_sq, np.ascontiguousarray(y), float(cfg.alpha),
                                order, int(cfg.sweeps), tol)

    if y_real.ndim == 1:
        return one(y_real)
    return np.stack(ordered_map(one, y_real))


def realized_noise(noise):
    """Noise samples (complex list/array or realized array) -> ``(n, 2K')`` reals."""
    if isinstance(noise, np.ndarray) and not np.iscomplexobj(noise):
        return np.atleast_2d(noise.astype(np.float64))
    return realize_data(stack_noise(noise))


def whitening_matrix(noise):
    """Diagonal weights ``min_k std_k / std_j`` over realized noise components."""
    data = realized_noise(noise)
    if data.shape[0] < 2:
        raise ValueError("at least two noise samples are required")
    std = np.maximum(data.std(axis=0, ddof=1), STD_FLOOR)
    return WhiteningMatrix(std.min() / std)


def wrk_solve(sys, y_real, w, cfg=None):
    """Regularized Kaczmarz on the row-weighted system ``W B x = W y``."""
    diag = getattr(w, "diag", w)
    y_real = _check(sys, y_real)
    return kaczmarz_regularized(sys.scaled(diag), y_real * diag, cfg)


def weighted_tikhonov_solve(sys, y_real, weights_sq, alpha):
    """Dense reference ``(B^T D B + alpha I)^{-1} B^T D y`` for a diagonal ``D``."""
    B = sys.rows
    d = np.asarray(weights_sq, dtype=np.float64)
    gram = B.T @ (d[:, None] * B) + alpha * np.eye(B.shape[1])
    return np.linalg.solve(gram, (np.asarray(y_real) * d) @ B)
