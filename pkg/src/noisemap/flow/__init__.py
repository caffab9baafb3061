"""Normalizing flow for learning measurement-noise densities."""
import numpy as np

from .layers import AffineCoupling, SplitBranch, Squeeze, Unsqueeze, concat, split, squeeze, unsqueeze
from .model import LOG_2PI, FlowModel
from .nets import CouplingNet
from .train import Adam, TrainConfig, TrainHistory, noise_to_flow, train


def coupling_forward(layer, x):
    """Single-sample or batched coupling; returns ``(y, logdet)``."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 2:
        y, ld, _ = layer.forward(x[None])
        return y[0], float(ld[0])
    y, ld, _ = layer.forward(x)
    return y, ld


def coupling_inverse(layer, y):
    y = np.asarray(y, dtype=np.float64)
    if y.ndim == 2:
        return layer.inverse(y[None])[0]
    return layer.inverse(y)


def flow_forward(model, eta):
    return model.forward(eta)


def flow_inverse(model, z):
    return model.inverse(z)


def log_prob(model, eta):
    return model.log_prob(eta)


def nll_loss(model, batch):
    return model.nll_loss(batch)


def grad_input(model, eta):
    return model.grad_input(eta)


def grad_params(model, batch):
    return model.grad_params(batch)


__all__ = [
    "Adam", "AffineCoupling", "CouplingNet", "FlowModel", "LOG_2PI", "SplitBranch", "Squeeze",
    "TrainConfig", "TrainHistory", "Unsqueeze", "concat", "coupling_forward", "coupling_inverse",
    "flow_forward", "flow_inverse", "grad_input", "grad_params", "log_prob", "nll_loss",
    "noise_to_flow", "split", "squeeze", "train", "unsqueeze",
]

from .checkpoint import FLOW_FORMAT, load_flow, save_flow  # noqa: E402

__all__ += ["FLOW_FORMAT", "load_flow", "save_flow"]
