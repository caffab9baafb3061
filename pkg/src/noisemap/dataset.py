"""Synthetic measurement datasets and their container layout.

A dataset holds the fine (simulation) and coarse (reconstruction) operators,
the ground-truth phantoms and measurement tuples for every concentration,
and an independent noise bank for training noise models. The noise vector
of sample ``i`` is shared across concentrations, so lowering the
concentration raises the relative noise level only through the signal.
"""
from dataclasses import dataclass

import numpy as np

from .container import Container, write_container
from .errors import ConfigError, DataError
from .operators import ForwardOperator, RawOperator, select_frequencies, synth_smooth_operator
from .phantoms import (
    AR1,
    COARSE_GRID,
    DiagGaussian,
    GaussianMixture,
    SumNoise,
    digit_images,
    noise_model_from_dict,
    preprocess_phantom,
    simulate_measurement,
    synth_noise_array,
)


def structured_noise(length, channels, level=1.0):
    """Heteroscedastic, correlated, heavy-tailed noise for desk-scale benchmarks.

    Per-component standard deviations decay with the frequency index inside
    each channel and differ between channels; an AR(1) term correlates
    neighbouring components and a two-component mixture adds occasional
    large deviations.
    """
    if length % channels:
        raise ValueError(f"length {length} is not a multiple of {channels} channels")
    n = length // channels
    gains = 1.0 + 0.4 * np.cos(np.pi * np.arange(channels) / max(channels - 1, 1))
    profile = np.concatenate([g * (0.3 + 1.5 * np.exp(-np.arange(n) / 10.0)) for g in gains])
    return SumNoise((
        DiagGaussian(tuple(level * profile)),
        AR1(0.9, 0.5 * level),
        GaussianMixture((0.9, 0.1), (0.0, 0.0), (0.1 * level, 1.5 * level)),
    ))


def concentration_key(c):
    return f"c{float(c):g}"


@dataclass(eq=False)
class Dataset:
    images: np.ndarray
    operator_fine: ForwardOperator
    operator_rec: ForwardOperator
    eta: np.ndarray
    noise_bank: np.ndarray
    phantoms: dict
    y: dict
    y_delta: dict
    upsample: int
    n_validation: int = 0

    @property
    def concentrations(self):
        return sorted(self.phantoms)

    def _nearest(self, c):
        for k in self.phantoms:
            if abs(k - float(c)) <= 1e-12 * max(1.0, abs(k)):
                return k
        raise DataError(f"no measurements for concentration {c:g}; available: {self.concentrations}")

    def measurements(self, c):
        return self.y_delta[self._nearest(c)]

    def ground_truth(self, c):
        return self.phantoms[self._nearest(c)]

    def to_arrays(self):
        arrays = {
            "images": self.images,
            "eta": self.eta,
            "noise_bank": self.noise_bank,
            "operator_fine": self.operator_fine.entries,
            "operator_rec": self.operator_rec.entries,
            "band": np.asarray(self.operator_rec.freq_index_set, dtype=np.float64),
        }
        for c in self.concentrations:
            key = concentration_key(c)
            arrays[f"x_{key}"] = self.phantoms[c]
            arrays[f"y_{key}"] = self.y[c]
            arrays[f"y_delta_{key}"] = self.y_delta[c]
        return arrays

    def attrs(self):
        return {
            "kind": "dataset",
            "concentrations": self.concentrations,
            "channels": self.operator_rec.channels,
            "grid_fine": list(self.operator_fine.grid),
            "grid_rec": list(self.operator_rec.grid),
            "upsample": self.upsample,
            "n_validation": self.n_validation,
        }

    def save(self, path, seed=None):
        seeds = {}
        if seed is not None:
            seeds = {"eta": seed + 1, "noise_bank": seed + 2, "images": seed}
        return write_container(path, self.to_arrays(), self.attrs(), seeds)


def load_dataset(path):
    c = Container(path)
    attrs = c.attrs
    if attrs.get("kind") != "dataset":
        raise DataError(f"{path} is not a dataset container")
    band = tuple(int(b) for b in c["band"])
    channels = int(attrs["channels"])
    phantoms, y, y_delta = {}, {}, {}
    for conc in attrs["concentrations"]:
        key = concentration_key(conc)
        phantoms[float(conc)] = c[f"x_{key}"]
        y[float(conc)] = c[f"y_{key}"]
        y_delta[float(conc)] = c[f"y_delta_{key}"]
    return Dataset(
        images=c["images"],
        operator_fine=ForwardOperator(c["operator_fine"], band, channels, tuple(attrs["grid_fine"])),
        operator_rec=ForwardOperator(c["operator_rec"], band, channels, tuple(attrs["grid_rec"])),
        eta=c["eta"],
        noise_bank=c["noise_bank"],
        phantoms=phantoms,
        y=y,
        y_delta=y_delta,
        upsample=int(attrs["upsample"]),
        n_validation=int(attrs.get("n_validation", 0)),
    )


def load_noise_bank(path):
    """Noise bank of a dataset or any container holding a ``noise_bank`` array."""
    return Container(path)["noise_bank"]


def build_operators(cfg):
    """Fine and coarse forward operators after frequency selection."""
    s = int(cfg.op_setting("upsample"))
    if cfg.operator["kind"] == "container":
        c = Container(cfg.operator["path"])
        grid_fine = tuple(c.attrs.get("grid_fine", (COARSE_GRID[0] * s, COARSE_GRID[1] * s)))
        raw_fine = RawOperator(c["operator_fine"], grid_fine)
        raw_rec = RawOperator(c["operator_rec"], tuple(c.attrs.get("grid_rec", COARSE_GRID)))
    else:
        kw = dict(
            decay=float(cfg.op_setting("decay")),
            max_wavenumber=float(cfg.op_setting("max_wavenumber")),
            terms=int(cfg.op_setting("terms")),
        )
        seed, channels, K = cfg.op_setting("seed"), cfg.op_setting("channels"), cfg.op_setting("K")
        fine_grid = (COARSE_GRID[0] * s, COARSE_GRID[1] * s)
        raw_fine = synth_smooth_operator(seed, channels, K, fine_grid, **kw)
        raw_rec = synth_smooth_operator(seed, channels, K, COARSE_GRID, **kw)
    lo, hi = cfg.band
    if hi > raw_rec.n_freq:
        raise ConfigError(f"band end {hi} exceeds the {raw_rec.n_freq} available frequencies", "operator.band")
    band = range(lo, hi)
    return select_frequencies(raw_fine, band), select_frequencies(raw_rec, band)


def build_noise_model(cfg, length, channels):
    spec = dict(cfg.noise)
    try:
        if spec["kind"] == "structured":
            return structured_noise(length, channels, float(spec.get("level", 1.0)))
        return noise_model_from_dict(spec)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid noise model: {exc}", "noise") from exc


def generate(cfg):
    """Deterministic synthetic dataset for a :class:`~noisemap.config.RunConfig`."""
    op_fine, op_rec = build_operators(cfg)
    s = int(cfg.op_setting("upsample"))
    if op_fine.n_pixels != op_rec.n_pixels * s * s:
        raise ConfigError("fine operator grid is not the upsampled coarse grid", "operator.upsample")
    length = op_rec.n_rows
    model = build_noise_model(cfg, length, op_rec.channels)
    images = digit_images(cfg.n_phantoms, cfg.seed)
    eta = synth_noise_array(model, length, cfg.n_phantoms, cfg.seed + 1)
    bank = synth_noise_array(model, length, cfg.n_noise_bank, cfg.seed + 2)
    phantoms, y, y_delta = {}, {}, {}
    for c in sorted(set(cfg.concentrations)):
        tuples = [simulate_measurement(op_fine, preprocess_phantom(img, c), e, s) for img, e in zip(images, eta)]
        phantoms[c] = np.stack([t.x.reshape(op_rec.grid) for t in tuples])
        y[c] = np.stack([t.y for t in tuples])
        y_delta[c] = np.stack([t.y_delta for t in tuples])
    return Dataset(images, op_fine, op_rec, eta, bank, phantoms, y, y_delta, s, cfg.n_validation)
