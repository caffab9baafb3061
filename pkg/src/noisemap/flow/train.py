"""Maximum-likelihood training of a flow with Adam."""
import logging
from dataclasses import dataclass, field

import numpy as np

from ..errors import TrainingError
from ..phantoms import stack_noise

log = logging.getLogger(__name__)


@dataclass
class TrainConfig:
    batch_size: int = 256
    epochs: int = 25
    learning_rate: float = 1e-3
    seed: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    validation_fraction: float = 0.1

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValueError("batch_size must be at least 1")
        if self.epochs < 1:
            raise ValueError("epochs must be at least 1")
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")
        if not 0 <= self.validation_fraction < 1:
            raise ValueError("validation_fraction must lie in [0, 1)")


@dataclass
class TrainHistory:
    train_nll: list = field(default_factory=list)
    val_nll: list = field(default_factory=list)
    steps: int = 0


class Adam:
    def __init__(self, params, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        self.params = params
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.t = 0

    def step(self, grads):
        self.t += 1
        c1 = 1.0 - self.beta1 ** self.t
        c2 = 1.0 - self.beta2 ** self.t
        for p, g, m, v in zip(self.params, grads, self.m, self.v):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


def noise_to_flow(samples):
    """Complex ``(n, K')`` noise -> real ``(n, 2, K')`` flow inputs (Re, Im channels)."""
    if not isinstance(samples, np.ndarray):
        samples = stack_noise(samples)
    if np.iscomplexobj(samples):
        return np.stack([samples.real, samples.imag], axis=-2)
    return samples


def train(model, samples, cfg=None, callback=None):
    """Train ``model`` in place; returns ``(model, history)``.

    ``samples`` are complex noise vectors ``(n, K')`` or real flow inputs
    ``(n, 2, K')``. The last ``validation_fraction`` of a seeded permutation
    is held out and scored after every epoch.
    """
    cfg = cfg or TrainConfig()
    data = noise_to_flow(samples).astype(np.float64)
    if data.ndim != 3 or data.shape[0] < 1:
        raise ValueError("need at least one training sample of shape (2, m)")
    rng = np.random.default_rng(cfg.seed)
    order = rng.permutation(data.shape[0])
    n_val = int(round(cfg.validation_fraction * data.shape[0]))
    if n_val >= data.shape[0]:
        n_val = 0
    val = data[order[data.shape[0] - n_val:]] if n_val else None
    tr = data[order[: data.shape[0] - n_val]]

    opt = Adam(model.params, cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.adam_eps)
    history = TrainHistory()
    last_good = None
    for epoch in range(cfg.epochs):
        perm = rng.permutation(tr.shape[0])
        total, count = 0.0, 0
        for start in range(0, tr.shape[0], cfg.batch_size):
            batch = tr[perm[start:start + cfg.batch_size]]
            loss, grads = model.loss_and_grad_params(batch)
            if not np.isfinite(loss) or not all(np.all(np.isfinite(g)) for g in grads):
                raise TrainingError(
                    f"non-finite loss in epoch {epoch}; last finite epoch: {last_good}",
                    last_good,
                )
            opt.step(grads)
            history.steps += 1
            total += loss * batch.shape[0]
            count += batch.shape[0]
        history.train_nll.append(total / count)
        if val is not None:
            v = model.nll_loss(val)
            if not np.isfinite(v):
                raise TrainingError(
                    f"non-finite validation loss in epoch {epoch}; last finite epoch: {last_good}",
                    last_good,
                )
            history.val_nll.append(v)
        last_good = epoch
        log.info("epoch %d train nll %.5f val nll %s", epoch, history.train_nll[-1],
                 history.val_nll[-1] if history.val_nll else "-")
        if callback is not None:
            callback(epoch, history)
    return model, history
