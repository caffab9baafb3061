"""Posterior, likelihood and prior evaluators behind the learned discrepancy."""
import math
from dataclasses import dataclass

import numpy as np

from .flow.train import noise_to_flow
from .lda import _check, to_flow
from .phantoms import stack_noise

LOG_2PI = math.log(2.0 * math.pi)


@dataclass(frozen=True)
class GaussianDensity:
    """Zero-mean Gaussian with diagonal variance (standard normal by default)."""

    dim: int
    variance: object = 1.0

    def log_density(self, v):
        v = np.asarray(v, dtype=np.float64)
        var = np.broadcast_to(np.asarray(self.variance, dtype=np.float64), (self.dim,))
        if v.shape[-1] != self.dim:
            raise ValueError(f"expected dimension {self.dim}, got {v.shape[-1]}")
        return -0.5 * (self.dim * LOG_2PI + np.sum(np.log(var)) + np.sum(v * v / var, axis=-1))


def log_prior(x, alpha):
    """``log N(x; 0, alpha^{-1} I)``."""
    if not alpha > 0:
        raise ValueError("a Gaussian prior needs alpha > 0")
    x = np.asarray(x, dtype=np.float64)
    return GaussianDensity(x.shape[-1], 1.0 / alpha).log_density(x)


def log_posterior_unnormalized(model, sys, x, y_real, alpha):
    """``log p_theta(y - Bx) + log p_X(x)``; the evidence term is omitted."""
    y_real = _check(model, sys, y_real)
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != sys.n_pixels:
        raise ValueError(f"expected {sys.n_pixels} pixels, got {x.shape[-1]}")
    likelihood = model.log_prob(to_flow(y_real - x @ sys.rows.T))
    return likelihood + log_prior(x, alpha)


def posterior_offset(model, sys, alpha):
    """Constant ``c`` with ``log_posterior = -lda_objective + c``."""
    return -0.5 * model.dim * LOG_2PI + 0.5 * sys.n_pixels * math.log(alpha / (2.0 * math.pi))


def kl_estimate(model, samples):
    """Mean negative log-likelihood of noise samples.

    This is the cross-entropy of the data under the flow, i.e. the KL
    divergence from the noise distribution plus its (unknown) entropy.
    """
    if not isinstance(samples, np.ndarray):
        if len(samples) == 0:
            raise ValueError("no samples given")
        samples = stack_noise(samples)
    data = noise_to_flow(samples)
    if data.shape[0] == 0:
        raise ValueError("no samples given")
    return model.nll_loss(data)
