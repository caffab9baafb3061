"""Flow checkpoints stored as containers (``flow_format = 1``)."""
from ..container import Container, write_container
from ..errors import DataError
from .model import FlowModel

FLOW_FORMAT = 1


def save_flow(model, path, extra=None):
    if model.architecture is None:
        raise ValueError("only models built by FlowModel factories can be saved")
    arrays = {f"param_{i:04d}": p for i, p in enumerate(model.params)}
    attrs = {
        "flow_format": FLOW_FORMAT,
        "architecture": model.architecture,
        "input_shape": list(model.input_shape),
        "layers": model.describe(),
        "n_params": model.n_params,
    }
    if extra:
        attrs.update(extra)
    return write_container(path, arrays, attrs)


def load_flow(path):
    c = Container(path)
    if c.attrs.get("flow_format") != FLOW_FORMAT:
        raise DataError(f"{path} is not a flow checkpoint (flow_format {FLOW_FORMAT})")
    model = FlowModel.from_architecture(c.attrs["architecture"])
    if len(c.names) != len(model.params):
        raise DataError(f"checkpoint holds {len(c.names)} arrays, model needs {len(model.params)}")
    for i, p in enumerate(model.params):
        arr = c[f"param_{i:04d}"]
        if arr.shape != p.shape:
            raise DataError(f"parameter {i} has shape {arr.shape}, expected {p.shape}")
        p[...] = arr
    return model
