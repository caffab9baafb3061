"""Directory container: ``manifest.json`` plus one little-endian payload file.

Arrays are stored as ``f64`` (``<f8``) or ``c128`` (interleaved ``<f8``
real/imaginary pairs, i.e. ``<c16``), concatenated in name order into
``data.bin``. The manifest records name, type, shape, byte offset, byte
length, payload file and optional seed provenance for every array, plus free
``attrs``. Writing is deterministic, so identical inputs give identical bytes.

Importing published MDF/HDF5 files is left to an external converter; it only
has to populate the arrays named in :data:`MDF_ARRAY_MAP`.
"""
import json
import os
from pathlib import Path

import numpy as np

from .errors import DataError, ManifestError

FORMAT = "noisemap-container"
VERSION = 1
MANIFEST = "manifest.json"
PAYLOAD = "data.bin"
DTYPES = {"f64": np.dtype("<f8"), "c128": np.dtype("<c16")}

# container array name -> source in the published dataset layout
MDF_ARRAY_MAP = {
    "operator_fine": "SM/SM_{model}_fine.mdf: /measurement/data (3 x K x N_fine, complex)",
    "operator_rec": "SM/SM_{model}_coarse.mdf: /measurement/data (3 x K x N_coarse, complex)",
    "phantoms": "phantom/{split}_phantoms.h5: 17 x 15 ground truth images",
    "eta": "noise/{split}_phantom_noise.mdf: /measurement/data (3 x K per sample)",
    "noise_bank": "noise/large_NoiseMeas.mdf: /measurement/data (3 x K per sample)",
    "y_delta": "measurements/{split}_{model}_{resolution}.mdf: /measurement/data",
}


def _kind(arr):
    if np.iscomplexobj(arr):
        return "c128"
    if np.issubdtype(arr.dtype, np.number) or arr.dtype == bool:
        return "f64"
    raise DataError(f"unsupported array dtype {arr.dtype}")


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def dumps_manifest(manifest):
    return json.dumps(_jsonable(manifest), indent=2, sort_keys=True, allow_nan=True) + "\n"


def write_container(path, arrays, attrs=None, seeds=None):
    """Write ``arrays`` (name -> ndarray) and ``attrs`` to directory ``path``."""
    path = Path(path)
    try:
        path.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create container directory {path}: {exc}") from exc
    seeds = seeds or {}
    entries = []
    offset = 0
    chunks = []
    for name in sorted(arrays):
        arr = np.asarray(arrays[name])
        kind = _kind(arr)
        data = np.ascontiguousarray(arr, dtype=DTYPES[kind]).tobytes()
        entry = {
            "name": name,
            "type": kind,
            "shape": list(arr.shape),
            "file": PAYLOAD,
            "offset": offset,
            "nbytes": len(data),
        }
        if name in seeds:
            entry["seed"] = seeds[name]
        entries.append(entry)
        chunks.append(data)
        offset += len(data)
    manifest = {"format": FORMAT, "version": VERSION, "attrs": attrs or {}, "arrays": entries}
    tmp = path / (PAYLOAD + ".tmp")
    with open(tmp, "wb") as fh:
        for chunk in chunks:
            fh.write(chunk)
    os.replace(tmp, path / PAYLOAD)
    (path / MANIFEST).write_text(dumps_manifest(manifest))
    return manifest


class Container:
    """Read access to a container directory; arrays load lazily."""

    def __init__(self, path):
        self.path = Path(path)
        mpath = self.path / MANIFEST
        if not mpath.is_file():
            raise DataError(f"no {MANIFEST} in {self.path}")
        try:
            self.manifest = json.loads(mpath.read_text())
        except json.JSONDecodeError as exc:
            raise DataError(f"malformed manifest in {self.path}: {exc}") from exc
        if self.manifest.get("format") != FORMAT:
            raise DataError(f"{self.path} is not a {FORMAT}")
        self.entries = {e["name"]: e for e in self.manifest.get("arrays", [])}
        for e in self.entries.values():
            expected = int(np.prod(e["shape"], dtype=np.int64)) * DTYPES[e["type"]].itemsize
            if expected != e["nbytes"]:
                raise DataError(f"array {e['name']!r}: {e['nbytes']} bytes, expected {expected}")

    @property
    def attrs(self):
        return self.manifest.get("attrs", {})

    @property
    def names(self):
        return list(self.entries)

    def __contains__(self, name):
        return name in self.entries

    def __getitem__(self, name):
        if name not in self.entries:
            raise ManifestError(f"array {name!r} missing from {self.path / MANIFEST}")
        e = self.entries[name]
        with open(self.path / e["file"], "rb") as fh:
            fh.seek(e["offset"])
            raw = fh.read(e["nbytes"])
        if len(raw) != e["nbytes"]:
            raise DataError(f"payload for {name!r} is truncated")
        dtype = DTYPES[e["type"]]
        arr = np.frombuffer(raw, dtype=dtype).astype(dtype.newbyteorder("="))
        return arr.reshape(e["shape"])

    def arrays(self):
        return {name: self[name] for name in self.entries}

    def seeds(self):
        return {n: e["seed"] for n, e in self.entries.items() if "seed" in e}


def read_container(path):
    c = Container(path)
    return c.arrays(), c.attrs
