"""Multi-scale affine-coupling flow with exact log-determinant."""
import math

import numpy as np

from .layers import AffineCoupling, SplitBranch, Squeeze, Unsqueeze

LOG_2PI = math.log(2.0 * math.pi)
DEFAULT_WIDTHS = (512, 256, 128)


class FlowModel:
    """Ordered invertible layers mapping ``[p, m]`` inputs to a Gaussian latent.

    Inputs may be a single sample ``(p, m)`` or a batch ``(b, p, m)``; outputs
    keep the same batching.
    """

    def __init__(self, layers, input_shape, architecture=None):
        self.layers = list(layers)
        self.input_shape = tuple(int(v) for v in input_shape)
        self.architecture = architecture
        shape = self.input_shape
        for layer in self.layers:
            shape = layer.out_shape(shape)
        if shape != self.input_shape:
            raise ValueError(f"layers map {self.input_shape} to {shape}")
        self.params = [p for layer in self.layers for p in layer.params]

    # -- construction --------------------------------------------------------

    @classmethod
    def multiscale(cls, m, widths=DEFAULT_WIDTHS, depth=6, p=2, seed=0):
        """Two couplings, squeeze, two couplings, then a deeper branch on half
        the channels (squeeze, four couplings, unsqueeze), and a final
        unsqueeze back to ``[p, m]``."""
        if m % 4:
            raise ValueError(f"multi-scale flow needs m divisible by 4, got {m}")
        w1, w2, w3 = widths
        rng = np.random.default_rng(seed)
        layers = [
            AffineCoupling((p, m), 0, w1, depth, rng),
            AffineCoupling((p, m), 1, w1, depth, rng),
            Squeeze(),
            AffineCoupling((2 * p, m // 2), 0, w2, depth, rng),
            AffineCoupling((2 * p, m // 2), 1, w2, depth, rng),
            SplitBranch(
                [Squeeze()]
                + [AffineCoupling((2 * p, m // 4), i % 2, w3, depth, rng) for i in range(4)]
                + [Unsqueeze()]
            ),
            Unsqueeze(),
        ]
        arch = {"kind": "multiscale", "m": m, "p": p, "widths": list(widths), "depth": depth, "seed": seed}
        return cls(layers, (p, m), arch)

    @classmethod
    def single_scale(cls, m, n_couplings=2, width=16, depth=6, p=2, seed=0):
        rng = np.random.default_rng(seed)
        layers = [AffineCoupling((p, m), i % 2, width, depth, rng) for i in range(n_couplings)]
        arch = {
            "kind": "single_scale", "m": m, "p": p, "n_couplings": n_couplings,
            "width": width, "depth": depth, "seed": seed,
        }
        return cls(layers, (p, m), arch)

    @classmethod
    def from_architecture(cls, arch):
        arch = dict(arch)
        kind = arch.pop("kind")
        if kind == "multiscale":
            arch["widths"] = tuple(arch["widths"])
            return cls.multiscale(**arch)
        if kind == "single_scale":
            return cls.single_scale(**arch)
        raise ValueError(f"unknown flow architecture {kind!r}")

    # -- parameter views -----------------------------------------------------

    @property
    def n_params(self):
        return sum(p.size for p in self.params)

    @property
    def dim(self):
        return self.input_shape[0] * self.input_shape[1]

    def get_flat(self):
        return np.concatenate([p.ravel() for p in self.params])

    def set_flat(self, flat):
        flat = np.asarray(flat, dtype=np.float64)
        if flat.size != self.n_params:
            raise ValueError(f"expected {self.n_params} parameters, got {flat.size}")
        offset = 0
        for p in self.params:
            p[...] = flat[offset:offset + p.size].reshape(p.shape)
            offset += p.size

    def zero_grads(self):
        return [np.zeros_like(p) for p in self.params]

    def describe(self):
        return [layer.describe() for layer in self.layers]

    # -- evaluation ----------------------------------------------------------

    def _batch(self, eta):
        eta = np.asarray(eta, dtype=np.float64)
        single = eta.ndim == 2
        if single:
            eta = eta[None]
        if eta.ndim != 3 or eta.shape[1:] != self.input_shape:
            raise ValueError(f"flow expects inputs of shape {self.input_shape}, got {eta.shape}")
        return eta, single

    def _forward(self, x):
        logdet = np.zeros(x.shape[0])
        caches = []
        for layer in self.layers:
            x, ld, cache = layer.forward(x)
            logdet = logdet + ld
            caches.append(cache)
        return x, logdet, caches

    def forward(self, eta):
        """Return ``(z, logdet)``."""
        x, single = self._batch(eta)
        z, logdet, _ = self._forward(x)
        if single:
            return z[0], float(logdet[0])
        return z, logdet

    def inverse(self, z):
        y, single = self._batch(z)
        for layer in reversed(self.layers):
            y = layer.inverse(y)
        return y[0] if single else y

    def _backward(self, caches, gz, gl, grads=None):
        offset = len(self.params)
        g = gz
        for layer, cache in zip(reversed(self.layers), reversed(caches)):
            n = len(layer.params)
            offset -= n
            sub = None if grads is None else grads[offset:offset + n]
            g = layer.backward(cache, g, gl, sub)
        return g

    def log_prob(self, eta):
        x, single = self._batch(eta)
        z, logdet, _ = self._forward(x)
        lp = -0.5 * self.dim * LOG_2PI - 0.5 * np.einsum("bij,bij->b", z, z) + logdet
        return float(lp[0]) if single else lp

    def nll_loss(self, batch):
        x, _ = self._batch(batch)
        if x.shape[0] == 0:
            raise ValueError("batch is empty")
        return float(-np.mean(self.log_prob(x)))

    def grad_input(self, eta):
        """Gradients of ``0.5 * ||phi(eta)||^2`` and of ``logdet`` w.r.t. ``eta``."""
        x, single = self._batch(eta)
        z, _, caches = self._forward(x)
        b = x.shape[0]
        g_quad = self._backward(caches, z, np.zeros(b))
        g_logdet = self._backward(caches, np.zeros_like(z), np.ones(b))
        if single:
            return g_quad[0], g_logdet[0]
        return g_quad, g_logdet

    def value_and_grad_input(self, eta):
        """``(0.5||z||^2 - logdet, d/d eta)`` per sample, in one backward pass."""
        x, single = self._batch(eta)
        z, logdet, caches = self._forward(x)
        val = 0.5 * np.einsum("bij,bij->b", z, z) - logdet
        g = self._backward(caches, z, -np.ones(x.shape[0]))
        if single:
            return float(val[0]), g[0]
        return val, g

    def loss_and_grad_params(self, batch):
        x, _ = self._batch(batch)
        if x.shape[0] == 0:
            raise ValueError("batch is empty")
        b = x.shape[0]
        z, logdet, caches = self._forward(x)
        lp = -0.5 * self.dim * LOG_2PI - 0.5 * np.einsum("bij,bij->b", z, z) + logdet
        grads = self.zero_grads()
        self._backward(caches, z / b, np.full(b, -1.0 / b), grads)
        return float(-lp.mean()), grads

    def grad_params(self, batch):
        """Gradient of :meth:`nll_loss` as a list aligned with ``params``."""
        return self.loss_and_grad_params(batch)[1]
