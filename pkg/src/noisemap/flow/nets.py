"""Scaling/shifting networks with hand-written reverse mode."""
import numpy as np

LN_EPS = 1e-5


class CouplingNet:
    """``depth`` x (dense -> layer norm -> ReLU), then dense -> tanh -> gain.

    The final dense block starts at zero, so a fresh net outputs exactly 0.
    ``gain`` is a learnable per-output factor applied after the tanh; without
    it the output would be confined to (-1, 1).
    """

    def __init__(self, d_in, d_out, width, depth=6, rng=None):
        rng = np.random.default_rng(rng)
        self.d_in, self.d_out, self.width, self.depth = d_in, d_out, width, depth
        params = []
        fan_in = d_in
        for _ in range(depth):
            bound = np.sqrt(6.0 / max(fan_in, 1))
            params += [
                rng.uniform(-bound, bound, size=(fan_in, width)),
                np.zeros(width),
                np.ones(width),
                np.zeros(width),
            ]
            fan_in = width
        params += [np.zeros((fan_in, d_out)), np.zeros(d_out), np.ones(d_out)]
        self.params = params

    @property
    def n_params(self):
        return sum(p.size for p in self.params)

    def forward(self, u):
        p = self.params
        h = u
        cache = []
        for i in range(self.depth):
            W, b, g, beta = p[4 * i:4 * i + 4]
            a = h @ W + b
            mu = a.mean(axis=1, keepdims=True)
            centered = a - mu
            inv_std = 1.0 / np.sqrt((centered ** 2).mean(axis=1, keepdims=True) + LN_EPS)
            n = centered * inv_std
            pre = n * g + beta
            cache.append((h, n, inv_std, pre))
            h = np.maximum(pre, 0.0)
        W, b, gain = p[-3:]
        th = np.tanh(h @ W + b)
        cache.append((h, th))
        return th * gain, cache

    def __call__(self, u):
        return self.forward(u)[0]

    def backward(self, cache, gout, grads=None):
        """Gradient w.r.t. the input; parameter gradients are added to ``grads``."""
        p = self.params
        h, th = cache[-1]
        W, b, gain = p[-3:]
        if grads is not None:
            grads[-1] += (gout * th).sum(axis=0)
        go = gout * gain * (1.0 - th ** 2)
        if grads is not None:
            grads[-3] += h.T @ go
            grads[-2] += go.sum(axis=0)
        gh = go @ W.T
        for i in reversed(range(self.depth)):
            W, b, g, beta = p[4 * i:4 * i + 4]
            h_in, n, inv_std, pre = cache[i]
            gpre = gh * (pre > 0)
            if grads is not None:
                grads[4 * i + 2] += (gpre * n).sum(axis=0)
                grads[4 * i + 3] += gpre.sum(axis=0)
            gn = gpre * g
            ga = inv_std * (
                gn - gn.mean(axis=1, keepdims=True) - n * (gn * n).mean(axis=1, keepdims=True)
            )
            if grads is not None:
                grads[4 * i] += h_in.T @ ga
                grads[4 * i + 1] += ga.sum(axis=0)
            gh = ga @ W.T
        return gh
