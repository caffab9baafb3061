"""Complex forward operators: frequency selection, stacking, realization.

Row layout conventions used everywhere in the package:

* a :class:`RawOperator` holds ``channels x K x N`` entries;
* a :class:`ForwardOperator` stacks the retained frequencies channel-major,
  so stacked row ``c * len(band) + i`` is channel ``c``, frequency ``band[i]``;
* a :class:`RealizedSystem` splits every complex row ``r`` into real rows
  ``2r`` (real part) and ``2r + 1`` (imaginary part).

Columns follow the pixel flattening of :func:`noisemap.phantoms.flatten`.
"""
from dataclasses import dataclass, field

import numpy as np


def _grid(grid, n):
    if grid is None:
        return (n, 1)
    grid = (int(grid[0]), int(grid[1]))
    if grid[0] * grid[1] != n:
        raise ValueError(f"grid {grid} does not match {n} pixels")
    return grid


@dataclass(frozen=True, eq=False)
class RawOperator:
    entries: np.ndarray
    grid: tuple = None

    def __post_init__(self):
        entries = np.asarray(self.entries, dtype=np.complex128)
        if entries.ndim != 3 or min(entries.shape) < 1:
            raise ValueError(f"expected a channels x K x N tensor, got shape {entries.shape}")
        if not np.all(np.isfinite(entries)):
            raise ValueError("operator entries must be finite")
        entries.setflags(write=False)
        object.__setattr__(self, "entries", entries)
        object.__setattr__(self, "grid", _grid(self.grid, entries.shape[2]))

    @property
    def channels(self):
        return self.entries.shape[0]

    @property
    def n_freq(self):
        return self.entries.shape[1]

    @property
    def n_pixels(self):
        return self.entries.shape[2]


@dataclass(frozen=True, eq=False)
class ForwardOperator:
    entries: np.ndarray
    freq_index_set: tuple = None
    channels: int = 1
    grid: tuple = None

    def __post_init__(self):
        entries = np.asarray(self.entries, dtype=np.complex128)
        if entries.ndim != 2:
            raise ValueError(f"expected a K' x N matrix, got shape {entries.shape}")
        if not np.all(np.isfinite(entries)):
            raise ValueError("operator entries must be finite")
        channels = int(self.channels)
        freqs = self.freq_index_set
        if freqs is None:
            if entries.shape[0] % channels:
                raise ValueError("row count is not a multiple of the channel count")
            freqs = range(entries.shape[0] // channels)
        freqs = tuple(int(k) for k in freqs)
        if channels * len(freqs) != entries.shape[0]:
            raise ValueError(
                f"{entries.shape[0]} rows do not match {channels} channels x {len(freqs)} frequencies"
            )
        if any(b <= a for a, b in zip(freqs, freqs[1:])) or (freqs and freqs[0] < 0):
            raise ValueError("frequency indices must be strictly increasing and nonnegative")
        entries.setflags(write=False)
        object.__setattr__(self, "entries", entries)
        object.__setattr__(self, "freq_index_set", freqs)
        object.__setattr__(self, "channels", channels)
        object.__setattr__(self, "grid", _grid(self.grid, entries.shape[1]))

    @property
    def shape(self):
        return self.entries.shape

    @property
    def n_rows(self):
        return self.entries.shape[0]

    @property
    def n_pixels(self):
        return self.entries.shape[1]

    def _like(self, entries):
        return ForwardOperator(entries, self.freq_index_set, self.channels, self.grid)


@dataclass(frozen=True, eq=False)
class RealizedSystem:
    """Real-valued form of a complex operator, ``2K' x N``."""

    rows: np.ndarray
    row_norms_sq: np.ndarray = field(default=None)

    def __post_init__(self):
        rows = np.ascontiguousarray(self.rows, dtype=np.float64)
        if rows.ndim != 2 or rows.shape[0] % 2:
            raise ValueError(f"realized system needs an even number of rows, got {rows.shape}")
        norms = np.einsum("ij,ij->i", rows, rows)
        rows.setflags(write=False)
        norms.setflags(write=False)
        object.__setattr__(self, "rows", rows)
        object.__setattr__(self, "row_norms_sq", norms)

    @property
    def shape(self):
        return self.rows.shape

    @property
    def n_measurements(self):
        return self.rows.shape[0]

    @property
    def n_pixels(self):
        return self.rows.shape[1]

    def scaled(self, weights):
        """Row-scaled copy ``diag(weights) @ rows``."""
        weights = np.asarray(weights, dtype=np.float64)
        if weights.shape != (self.rows.shape[0],):
            raise ValueError("one weight per realized row is required")
        return RealizedSystem(self.rows * weights[:, None])


def as_forward_operator(op):
    if isinstance(op, ForwardOperator):
        return op
    return ForwardOperator(np.asarray(op))


def select_frequencies(raw, band):
    """Keep the frequencies in ``band`` for every channel and stack channel-major."""
    band = np.asarray(list(band), dtype=np.int64)
    if band.size == 0:
        raise ValueError("frequency band is empty")
    if band.min() < 0 or band.max() >= raw.n_freq:
        raise IndexError(f"band exceeds the available frequency range [0, {raw.n_freq - 1}]")
    band = np.unique(band)
    stacked = raw.entries[:, band, :].reshape(raw.channels * band.size, raw.n_pixels)
    return ForwardOperator(stacked, tuple(band.tolist()), raw.channels, raw.grid)


def select_measurement(values, n_freq, band, channels):
    """Apply the same stacking as :func:`select_frequencies` to raw ``channels x K`` data.

    ``values`` may carry leading batch axes; the trailing axis has length
    ``channels * n_freq`` (or trailing axes ``(channels, n_freq)``).
    """
    values = np.asarray(values)
    band = np.unique(np.asarray(list(band), dtype=np.int64))
    if band.size == 0:
        raise ValueError("frequency band is empty")
    if band.min() < 0 or band.max() >= n_freq:
        raise IndexError(f"band exceeds the available frequency range [0, {n_freq - 1}]")
    lead = values.shape[:-1] if values.shape[-1] == channels * n_freq else values.shape[:-2]
    blocks = values.reshape(lead + (channels, n_freq))[..., band]
    return blocks.reshape(lead + (channels * band.size,))


def apply(op, x):
    """Complex matrix-vector product; ``x`` may also be a batch ``(n, N)``."""
    op = as_forward_operator(op)
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != op.n_pixels:
        raise ValueError(f"expected {op.n_pixels} pixels, got {x.shape[-1]}")
    return x @ op.entries.T


def realize(op):
    op = as_forward_operator(op)
    rows = np.empty((2 * op.n_rows, op.n_pixels))
    rows[0::2] = op.entries.real
    rows[1::2] = op.entries.imag
    return RealizedSystem(rows)


def realize_data(y):
    """Interleave real and imaginary parts along the last axis."""
    y = np.asarray(y, dtype=np.complex128)
    out = np.empty(y.shape[:-1] + (2 * y.shape[-1],))
    out[..., 0::2] = y.real
    out[..., 1::2] = y.imag
    return out


def complexify_data(y_real):
    y_real = np.asarray(y_real, dtype=np.float64)
    if y_real.shape[-1] % 2:
        raise ValueError("realized data must have even length")
    return y_real[..., 0::2] + 1j * y_real[..., 1::2]


def add_operator_noise(op, pixel_noise):
    pixel_noise = np.asarray(pixel_noise, dtype=np.complex128)
    if pixel_noise.shape != op.shape:
        raise ValueError(f"noise shape {pixel_noise.shape} does not match operator {op.shape}")
    return op._like(op.entries + pixel_noise)


def operator_deviation(a_tilde, a_rec, x):
    """Model error ``a_tilde @ x - a_rec @ x`` for a reconstruction operator."""
    if a_tilde.shape != a_rec.shape:
        raise ValueError(f"operator shapes differ: {a_tilde.shape} vs {a_rec.shape}")
    return apply(a_tilde, x) - apply(a_rec, x)


def _largest_eigenvalue(gram, rng, iterations=1000, tol=1e-12):
    v = rng.standard_normal(gram.shape[0])
    v /= np.linalg.norm(v)
    lam = 0.0
    for _ in range(iterations):
        w = gram @ v
        norm = np.linalg.norm(w)
        if norm == 0.0:
            return 0.0
        v = w / norm
        new = float(v @ gram @ v)
        if abs(new - lam) <= tol * abs(new):
            return new
        lam = new
    return lam


def fit_operator_mixture(candidates, reference, max_iter=100_000, tol=1e-10):
    """Nonnegative least-squares weights for a combination of operators.

    Minimises ``||reference - sum_i w_i candidates_i||_F`` over ``w >= 0`` by
    projected gradient descent on the Gram system with step ``1 / L``.

    Returns ``(weights, objective)`` where ``objective`` is the squared
    Frobenius residual.
    """
    if len(candidates) == 0:
        raise ValueError("at least one candidate operator is required")
    ref = np.asarray(getattr(reference, "entries", reference), dtype=np.complex128)
    mats = []
    for cand in candidates:
        mat = np.asarray(getattr(cand, "entries", cand), dtype=np.complex128)
        if mat.shape != ref.shape:
            raise ValueError(f"candidate shape {mat.shape} does not match reference {ref.shape}")
        mats.append(mat.ravel())
    stack = np.stack(mats)
    gram = (stack.conj() @ stack.T).real
    rhs = (stack.conj() @ ref.ravel()).real
    lipschitz = _largest_eigenvalue(gram, np.random.default_rng(0))
    w = np.zeros(len(mats))
    if lipschitz > 0:
        step = 1.0 / lipschitz
        for _ in range(max_iter):
            grad = gram @ w - rhs
            # projected-gradient stationarity measure
            pg = np.where(w > 0, grad, np.minimum(grad, 0.0))
            if np.linalg.norm(pg) < tol:
                break
            w = np.maximum(w - step * grad, 0.0)
    residual = ref.ravel() - w @ stack
    return w, float(np.vdot(residual, residual).real)


def synth_operator(seed, channels, K, N, decay=0.0, grid=None):
    """Random complex operator with magnitude envelope ``(1 + k) ** -decay``."""
    if min(channels, K, N) < 1:
        raise ValueError("operator dimensions must be positive")
    rng = np.random.default_rng(seed)
    shape = (channels, K, N)
    entries = (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)
    envelope = (1.0 + np.arange(K)) ** (-float(decay))
    return RawOperator(entries * envelope[None, :, None], grid)


def pixel_centers(grid):
    """Pixel-centre coordinates in ``[0, 1]^2`` in flattening order."""
    w, h = grid
    u = (np.arange(w) + 0.5) / w
    v = (np.arange(h) + 0.5) / h
    uu, vv = np.meshgrid(u, v, indexing="ij")
    return uu.ravel(), vv.ravel()


def synth_smooth_operator(seed, channels, K, grid, decay=0.5, max_wavenumber=6.0, terms=2):
    """Spatially smooth operator sampled from a continuous field of view.

    Each ``(channel, frequency)`` row is a sum of ``terms`` separable cosine
    patterns whose wavenumbers grow with the frequency index, mimicking the
    increasing spatial detail of higher harmonics. The same seed evaluated on
    two grids gives two discretisations of one continuous model, so data
    simulated on a fine grid and reconstructed on a coarse one carry a small
    model error instead of an inverse crime. Entries are scaled by the pixel
    area relative to a 17 x 15 reference grid.
    """
    grid = (int(grid[0]), int(grid[1]))
    rng = np.random.default_rng(seed)
    u, v = pixel_centers(grid)
    area = (17 * 15) / (grid[0] * grid[1])
    reach = max_wavenumber * (np.arange(K) + 1.0) / K
    entries = np.zeros((channels, K, u.size), dtype=np.complex128)
    for c in range(channels):
        for k in range(K):
            for _ in range(terms):
                f1, f2 = rng.uniform(0.0, reach[k], size=2)
                p1, p2 = rng.uniform(0.0, 2 * np.pi, size=2)
                amp = rng.standard_normal() + 1j * rng.standard_normal()
                entries[c, k] += amp * np.cos(np.pi * f1 * u + p1) * np.cos(np.pi * f2 * v + p2)
    envelope = (1.0 + np.arange(K)) ** (-float(decay))
    return RawOperator(entries * envelope[None, :, None] * area, grid)
