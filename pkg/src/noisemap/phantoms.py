"""Phantom preprocessing, measurement simulation and noise generation.

Images are stored as ``(width, height)`` arrays, so the coarse grid is
``17 x 15``. Flattening is C-order on that array: pixel ``(j, k)`` lands at
index ``j * height + k``. Operator columns use the same order.
"""
from dataclasses import dataclass

import numpy as np

from .operators import apply

COARSE_GRID = (17, 15)
INNER_SIZE = 11
RESOLUTIONS = {(17, 15): "coarse", (51, 45): "int", (85, 75): "fine"}


@dataclass(frozen=True, eq=False)
class Phantom:
    pixels: np.ndarray
    concentration: float
    resolution: str = None

    def __post_init__(self):
        pixels = np.asarray(self.pixels, dtype=np.float64)
        if pixels.ndim != 2:
            raise ValueError("phantom pixels must be a 2-D array")
        if self.concentration <= 0:
            raise ValueError("concentration must be positive")
        object.__setattr__(self, "pixels", pixels)
        object.__setattr__(self, "concentration", float(self.concentration))
        if self.resolution is None:
            object.__setattr__(self, "resolution", RESOLUTIONS.get(pixels.shape))

    @property
    def grid(self):
        return self.pixels.shape


@dataclass(frozen=True, eq=False)
class MeasurementTuple:
    x: np.ndarray
    y: np.ndarray
    y_delta: np.ndarray
    eta: np.ndarray
    concentration: float


@dataclass(frozen=True, eq=False)
class NoiseSample:
    values: np.ndarray
    provenance: str = "measured"

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.complex128)
        if not np.all(np.isfinite(values)):
            raise ValueError("noise sample contains non-finite values")
        object.__setattr__(self, "values", values)


def stack_noise(samples):
    """``(count, length)`` complex array from a list of samples or an array."""
    if isinstance(samples, np.ndarray):
        return np.atleast_2d(samples.astype(np.complex128, copy=False))
    return np.stack([np.asarray(getattr(s, "values", s), dtype=np.complex128) for s in samples])


def nearest_indices(n_in, n_out):
    """Source index sampled for each output pixel of a nearest-neighbour resize."""
    return np.floor(np.arange(n_out) * n_in / n_out + 0.5).astype(np.int64)


def shrink_image(img):
    """Nearest-neighbour resize of a 28 x 28 image to 11 x 11."""
    img = np.asarray(img, dtype=np.float64)
    if img.shape != (28, 28):
        raise ValueError(f"expected a 28 x 28 image, got {img.shape}")
    idx = nearest_indices(28, INNER_SIZE)
    return img[np.ix_(idx, idx)]


def preprocess_phantom(img, c):
    """28 x 28 image in [0, 1] -> 17 x 15 coarse phantom in [0, c]."""
    img = np.asarray(img, dtype=np.float64)
    small = shrink_image(img)
    if not np.all(np.isfinite(img)):
        raise ValueError("image contains non-finite values")
    if np.any(img < 0):
        raise ValueError("image entries must be nonnegative")
    if c <= 0:
        raise ValueError("concentration must be positive")
    peak = small.max()
    if peak > 0:
        small = small * (c / peak)
    out = np.zeros(COARSE_GRID)
    top = (COARSE_GRID[0] - INNER_SIZE) // 2
    left = (COARSE_GRID[1] - INNER_SIZE) // 2
    out[top:top + INNER_SIZE, left:left + INNER_SIZE] = small
    return Phantom(out, c, "coarse")


def upsample(ph, s):
    if int(s) != s or s < 1:
        raise ValueError("upsampling factor must be a positive integer")
    s = int(s)
    pixels = np.repeat(np.repeat(ph.pixels, s, axis=0), s, axis=1)
    return Phantom(pixels, ph.concentration)


def block_average(pixels, s):
    """Mean over ``s x s`` blocks; exact on blocks that are constant."""
    pixels = np.asarray(getattr(pixels, "pixels", pixels), dtype=np.float64)
    w, h = pixels.shape
    if w % s or h % s:
        raise ValueError(f"grid {pixels.shape} is not divisible by {s}")
    # averaging offsets from one corner keeps constant blocks bit-exact
    corner = pixels[::s, ::s]
    offsets = pixels - np.repeat(np.repeat(corner, s, axis=0), s, axis=1)
    return corner + offsets.reshape(w // s, s, h // s, s).mean(axis=(1, 3))


def flatten(ph):
    return np.ascontiguousarray(getattr(ph, "pixels", ph)).ravel()


def unflatten(vec, grid, concentration=None):
    pixels = np.asarray(vec, dtype=np.float64).reshape(grid)
    if concentration is None:
        return pixels
    return Phantom(pixels, concentration)


def simulate_measurement(op_fine, ph_coarse, noise, s):
    """Fine-grid measurement of a coarse phantom plus additive noise."""
    fine = upsample(ph_coarse, s)
    if op_fine.n_pixels != fine.pixels.size:
        raise ValueError(
            f"operator has {op_fine.n_pixels} pixels, upsampled phantom has {fine.pixels.size}"
        )
    eta = np.asarray(getattr(noise, "values", noise), dtype=np.complex128)
    if eta.shape != (op_fine.n_rows,):
        raise ValueError(f"noise length {eta.shape} does not match {op_fine.n_rows} rows")
    y = apply(op_fine, flatten(fine))
    return MeasurementTuple(flatten(ph_coarse), y, y + eta, eta, ph_coarse.concentration)


def average_noise_frames(frames, window=10):
    if window < 1:
        raise ValueError("window must be at least 1")
    data = stack_noise(frames)
    if data.shape[0] % window:
        raise ValueError(f"{data.shape[0]} frames are not divisible by window {window}")
    means = data.reshape(-1, window, data.shape[1]).mean(axis=1)
    return [NoiseSample(v, "averaged") for v in means]


def rescale_concentration(t, c_new):
    if c_new <= 0:
        raise ValueError("new concentration must be positive")
    if t.concentration <= 0:
        raise ValueError("tuple concentration must be positive")
    if c_new == t.concentration:
        return t
    factor = c_new / t.concentration
    y = t.y * factor
    return MeasurementTuple(t.x * factor, y, y + t.eta, t.eta, float(c_new))


# --- synthetic noise -------------------------------------------------------

@dataclass(frozen=True)
class IidGaussian:
    sigma: float = 1.0

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError("sigma must be positive")

    def draw(self, rng, shape):
        return self.sigma * rng.standard_normal(shape)


@dataclass(frozen=True)
class DiagGaussian:
    sigmas: tuple

    def __post_init__(self):
        sig = np.asarray(self.sigmas, dtype=np.float64)
        if sig.ndim != 1 or not np.all(sig > 0):
            raise ValueError("sigmas must be a vector of positive values")
        object.__setattr__(self, "sigmas", tuple(sig.tolist()))

    def draw(self, rng, shape):
        if shape[-1] != len(self.sigmas):
            raise ValueError(f"model has {len(self.sigmas)} components, {shape[-1]} requested")
        return rng.standard_normal(shape) * np.asarray(self.sigmas)


@dataclass(frozen=True)
class AR1:
    """Stationary autoregressive noise along the component axis."""

    rho: float
    sigma: float = 1.0

    def __post_init__(self):
        if not abs(self.rho) < 1:
            raise ValueError("|rho| must be below 1")
        if not self.sigma > 0:
            raise ValueError("sigma must be positive")

    def draw(self, rng, shape):
        xi = rng.standard_normal(shape)
        out = np.empty(shape)
        out[..., 0] = xi[..., 0]
        scale = np.sqrt(1.0 - self.rho ** 2)
        for j in range(1, shape[-1]):
            out[..., j] = self.rho * out[..., j - 1] + scale * xi[..., j]
        return self.sigma * out


@dataclass(frozen=True)
class GaussianMixture:
    weights: tuple
    means: tuple
    sigmas: tuple

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64)
        m = np.asarray(self.means, dtype=np.float64)
        s = np.asarray(self.sigmas, dtype=np.float64)
        if not (w.shape == m.shape == s.shape) or w.ndim != 1 or w.size == 0:
            raise ValueError("weights, means and sigmas must be equal-length vectors")
        if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-9:
            raise ValueError("mixture weights must be nonnegative and sum to 1")
        if not np.all(s > 0):
            raise ValueError("sigmas must be positive")
        for name, arr in (("weights", w), ("means", m), ("sigmas", s)):
            object.__setattr__(self, name, tuple(arr.tolist()))

    def draw(self, rng, shape):
        comp = rng.choice(len(self.weights), size=shape, p=self.weights)
        return np.asarray(self.means)[comp] + np.asarray(self.sigmas)[comp] * rng.standard_normal(shape)


@dataclass(frozen=True)
class SumNoise:
    """Sum of independent draws from several noise models."""

    components: tuple

    def __post_init__(self):
        if len(self.components) == 0:
            raise ValueError("a noise sum needs at least one component")
        object.__setattr__(self, "components", tuple(self.components))

    def draw(self, rng, shape):
        return sum(m.draw(rng, shape) for m in self.components)


def noise_model_from_dict(spec):
    """Build a noise model from ``{"kind": ..., **params}``.

    ``{"kind": "sum", "components": [...]}`` nests other specs.
    """
    spec = dict(spec)
    kind = spec.pop("kind", None)
    if kind == "sum":
        return SumNoise(tuple(noise_model_from_dict(c) for c in spec.get("components", ())))
    models = {
        "iid_gaussian": IidGaussian,
        "diag_gaussian": DiagGaussian,
        "ar1": AR1,
        "gaussian_mixture": GaussianMixture,
    }
    if kind not in models:
        raise ValueError(f"unknown noise model {kind!r}")
    return models[kind](**spec)


def synth_noise_array(model, length, count, seed):
    """``(count, length)`` complex noise; real and imaginary parts drawn independently."""
    if length < 1 or count < 1:
        raise ValueError("length and count must be positive")
    rng = np.random.default_rng(seed)
    re = model.draw(rng, (count, length))
    im = model.draw(rng, (count, length))
    return re + 1j * im


def synth_noise(model, length, count, seed):
    tag = f"synthetic:{type(model).__name__}"
    return [NoiseSample(v, tag) for v in synth_noise_array(model, length, count, seed)]


def digit_images(count, seed=0):
    """MNIST-style 28 x 28 digit images in [0, 1].

    Built from the 8 x 8 handwritten digits bundled with scikit-learn,
    bilinearly enlarged to 20 x 20 and centred in a 28 x 28 canvas the way
    MNIST digits are. Deterministic for a given seed.
    """
    from scipy.ndimage import zoom
    from sklearn.datasets import load_digits

    digits = load_digits().images
    rng = np.random.default_rng(seed)
    order = rng.permutation(len(digits))
    if count > len(order):
        order = np.resize(order, count)
    out = np.zeros((count, 28, 28))
    for i, idx in enumerate(order[:count]):
        big = np.clip(zoom(digits[idx] / 16.0, 2.5, order=1), 0.0, 1.0)
        out[i, 4:24, 4:24] = big
    return out
