"""Run configuration shared by the command-line tools and the benchmark.

A configuration is a JSON object; every key is optional. Unknown keys and
invalid values raise :class:`~noisemap.errors.ConfigError` naming the field.
"""
import copy
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

from .errors import ConfigError

METHODS = ("tikhonov", "rk", "wrk", "lda")

DEFAULT_OPERATOR = {
    "kind": "synthetic",
    "seed": 1,
    "channels": 3,
    "K": 64,
    "band": [8, 64],
    "upsample": 5,
    "decay": 0.5,
    "max_wavenumber": 6.0,
    "terms": 2,
}

DEFAULT_NOISE = {
    "kind": "structured",
    "level": 1.0,
}

DEFAULT_GRIDS = {
    "tikhonov": {"alpha": [0.001, 0.003, 0.01, 0.03, 0.1, 0.3, 1.0, 3.0, 10.0]},
    "rk": {"alpha": [0.001, 0.01, 0.1, 1.0, 10.0], "sweeps": [3, 10, 30]},
    "wrk": {"alpha": [0.001, 0.01, 0.1, 1.0, 10.0], "sweeps": [3, 10, 30]},
    "lda": {"alpha": [0.1, 1.0, 10.0], "iterations": [100]},
}

DEFAULT_FLOW = {
    "architecture": "multiscale",
    "widths": [16, 8, 8],
    "depth": 6,
    "n_couplings": 2,
    "batch_size": 256,
    "epochs": 12,
    "learning_rate": 1e-2,
    "validation_fraction": 0.1,
}


@dataclass
class RunConfig:
    seed: int = 0
    concentrations: list = field(default_factory=lambda: [2.0, 5.0, 10.0, 20.0, 50.0])
    n_phantoms: int = 100
    n_validation: int = 20
    n_noise_bank: int = 20000
    operator: dict = field(default_factory=lambda: copy.deepcopy(DEFAULT_OPERATOR))
    noise: dict = field(default_factory=lambda: copy.deepcopy(DEFAULT_NOISE))
    methods: list = field(default_factory=lambda: list(METHODS))
    grids: dict = field(default_factory=lambda: copy.deepcopy(DEFAULT_GRIDS))
    flow: dict = field(default_factory=lambda: copy.deepcopy(DEFAULT_FLOW))
    out: str = None

    def __post_init__(self):
        self.validate()

    def validate(self):
        if not isinstance(self.seed, int) or isinstance(self.seed, bool) or self.seed < 0:
            raise ConfigError("seed must be a nonnegative integer", "seed")
        try:
            self.concentrations = [float(c) for c in self.concentrations]
        except (TypeError, ValueError):
            raise ConfigError("concentrations must be numbers", "concentrations") from None
        if not self.concentrations or not all(c > 0 for c in self.concentrations):
            raise ConfigError("concentrations must be a nonempty list of positive values", "concentrations")
        for name in ("n_phantoms", "n_noise_bank"):
            v = getattr(self, name)
            if not isinstance(v, int) or v < 1:
                raise ConfigError(f"{name} must be a positive integer", name)
        if not isinstance(self.n_validation, int) or not 0 <= self.n_validation < self.n_phantoms:
            raise ConfigError("n_validation must lie in [0, n_phantoms)", "n_validation")
        bad = [m for m in self.methods if m not in METHODS]
        if bad or not self.methods:
            raise ConfigError(f"unknown methods {bad}; choose from {list(METHODS)}", "methods")
        for method, grid in self.grids.items():
            if method not in METHODS:
                raise ConfigError(f"grid for unknown method {method!r}", f"grids.{method}")
            if not isinstance(grid, dict) or not all(isinstance(v, list) and v for v in grid.values()):
                raise ConfigError("a grid maps parameter names to nonempty lists", f"grids.{method}")
        self._validate_operator()
        if not isinstance(self.noise, dict) or "kind" not in self.noise:
            raise ConfigError("noise needs a 'kind'", "noise.kind")
        unknown = set(self.flow) - set(DEFAULT_FLOW)
        if unknown:
            raise ConfigError(f"unknown flow settings {sorted(unknown)}", f"flow.{sorted(unknown)[0]}")
        if self.flow.get("architecture", "multiscale") not in ("multiscale", "single_scale"):
            raise ConfigError("architecture must be 'multiscale' or 'single_scale'", "flow.architecture")

    def _validate_operator(self):
        op = self.operator
        kind = op.get("kind")
        if kind == "container":
            if not op.get("path"):
                raise ConfigError("a container operator needs a path", "operator.path")
            return
        if kind != "synthetic":
            raise ConfigError("operator kind must be 'synthetic' or 'container'", "operator.kind")
        for key in ("channels", "K", "upsample"):
            v = op.get(key, DEFAULT_OPERATOR[key])
            if not isinstance(v, int) or v < 1:
                raise ConfigError(f"{key} must be a positive integer", f"operator.{key}")
        lo, hi = self.band
        if not 0 <= lo < hi <= op.get("K", DEFAULT_OPERATOR["K"]):
            raise ConfigError("band must satisfy 0 <= lo < hi <= K", "operator.band")

    @property
    def band(self):
        band = self.operator.get("band", DEFAULT_OPERATOR["band"])
        if not (isinstance(band, (list, tuple)) and len(band) == 2):
            raise ConfigError("band is a [lo, hi) pair", "operator.band")
        return int(band[0]), int(band[1])

    def op_setting(self, key):
        return self.operator.get(key, DEFAULT_OPERATOR.get(key))

    def flow_setting(self, key):
        return self.flow.get(key, DEFAULT_FLOW[key])

    def grid(self, method):
        return self.grids.get(method, DEFAULT_GRIDS[method])

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, data):
        if not isinstance(data, dict):
            raise ConfigError("configuration must be a JSON object")
        known = set(cls.__dataclass_fields__)
        unknown = set(data) - known
        if unknown:
            name = sorted(unknown)[0]
            raise ConfigError(f"unknown configuration field {name!r}", name)
        data = copy.deepcopy(data)
        if "operator" in data:
            data["operator"] = {**DEFAULT_OPERATOR, **data["operator"]} \
                if data["operator"].get("kind", "synthetic") == "synthetic" else data["operator"]
        if "grids" in data:
            data["grids"] = {**DEFAULT_GRIDS, **data["grids"]}
        if "flow" in data:
            data["flow"] = {**DEFAULT_FLOW, **data["flow"]}
        return cls(**data)

    @classmethod
    def load(cls, path):
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}", "config") from exc
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {path} is not valid JSON: {exc}", "config") from exc
        return cls.from_dict(data)
