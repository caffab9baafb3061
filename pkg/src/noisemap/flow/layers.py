"""Invertible layers acting on batches shaped ``(batch, channels, positions)``.

Every layer implements ``forward(x) -> (y, logdet, cache)``,
``inverse(y) -> x`` and ``backward(cache, gy, glogdet, grads) -> gx``, where
``glogdet`` is the per-sample derivative of the loss w.r.t. the layer's
log-determinant and ``grads`` is a list aligned with ``layer.params`` (or
``None`` when parameter gradients are not needed).
"""
import numpy as np

from .nets import CouplingNet


def squeeze(x):
    """``[.., p, m] -> [.., 2p, m/2]``; even positions to channel 2c, odd to 2c+1."""
    x = np.asarray(x)
    *lead, p, m = x.shape
    if m % 2:
        raise ValueError(f"squeeze needs an even number of positions, got {m}")
    out = x.reshape(*lead, p, m // 2, 2)
    return np.swapaxes(out, -1, -2).reshape(*lead, 2 * p, m // 2)


def unsqueeze(x):
    x = np.asarray(x)
    *lead, q, k = x.shape
    if q % 2:
        raise ValueError(f"unsqueeze needs an even number of channels, got {q}")
    out = x.reshape(*lead, q // 2, 2, k)
    return np.swapaxes(out, -1, -2).reshape(*lead, q // 2, 2 * k)


def split(x):
    x = np.asarray(x)
    p = x.shape[-2]
    if p % 2:
        raise ValueError(f"split needs an even number of channels, got {p}")
    return x[..., : p // 2, :], x[..., p // 2:, :]


def concat(top, bottom):
    top, bottom = np.asarray(top), np.asarray(bottom)
    if top.shape != bottom.shape:
        raise ValueError(f"cannot concatenate shapes {top.shape} and {bottom.shape}")
    return np.concatenate([top, bottom], axis=-2)


class Squeeze:
    params = ()

    def out_shape(self, shape):
        p, m = shape
        if m % 2:
            raise ValueError(f"squeeze needs an even number of positions, got {m}")
        return (2 * p, m // 2)

    def forward(self, x):
        return squeeze(x), 0.0, None

    def inverse(self, y):
        return unsqueeze(y)

    def backward(self, cache, gy, gl, grads=None):
        return unsqueeze(gy)

    def describe(self):
        return {"type": "squeeze"}


class Unsqueeze:
    params = ()

    def out_shape(self, shape):
        q, k = shape
        if q % 2:
            raise ValueError(f"unsqueeze needs an even number of channels, got {q}")
        return (q // 2, 2 * k)

    def forward(self, x):
        return unsqueeze(x), 0.0, None

    def inverse(self, y):
        return squeeze(y)

    def backward(self, cache, gy, gl, grads=None):
        return squeeze(gy)

    def describe(self):
        return {"type": "unsqueeze"}


class AffineCoupling:
    """Affine coupling on the position axis of a ``[p, m]`` input.

    Positions with parity ``parity`` pass through unchanged; the scaling and
    shifting nets read all of them (every channel) and produce one log-scale
    and one shift per transformed entry.
    """

    def __init__(self, shape, parity=0, width=16, depth=6, rng=None):
        p, m = shape
        if parity not in (0, 1):
            raise ValueError("parity must be 0 or 1")
        self.shape = (int(p), int(m))
        self.parity = parity
        self.width, self.depth = width, depth
        self.keep = np.arange(parity, m, 2)
        self.move = np.arange(1 - parity, m, 2)
        rng = np.random.default_rng(rng)
        d_in, d_out = p * self.keep.size, p * self.move.size
        self.scale_net = CouplingNet(d_in, d_out, width, depth, rng)
        self.shift_net = CouplingNet(d_in, d_out, width, depth, rng)
        self.params = self.scale_net.params + self.shift_net.params

    def out_shape(self, shape):
        if tuple(shape) != self.shape:
            raise ValueError(f"coupling expects shape {self.shape}, got {tuple(shape)}")
        return self.shape

    def _check(self, x):
        if x.shape[-2:] != self.shape:
            raise ValueError(f"coupling expects shape {self.shape}, got {x.shape[-2:]}")

    def _nets(self, x):
        b = x.shape[0]
        u = x[:, :, self.keep].reshape(b, -1)
        s, s_cache = self.scale_net.forward(u)
        t, t_cache = self.shift_net.forward(u)
        shape = (b, self.shape[0], self.move.size)
        return u, s.reshape(shape), t.reshape(shape), s_cache, t_cache

    def forward(self, x):
        self._check(x)
        _, s, t, s_cache, t_cache = self._nets(x)
        moved = x[:, :, self.move]
        es = np.exp(s)
        y = x.copy()
        y[:, :, self.move] = moved * es + t
        logdet = s.sum(axis=(1, 2))
        return y, logdet, (moved, es, s_cache, t_cache)

    def inverse(self, y):
        self._check(y)
        _, s, t, _, _ = self._nets(y)
        x = y.copy()
        x[:, :, self.move] = (y[:, :, self.move] - t) * np.exp(-s)
        return x

    def backward(self, cache, gy, gl, grads=None):
        moved, es, s_cache, t_cache = cache
        b = gy.shape[0]
        g_moved_out = gy[:, :, self.move]
        gs = g_moved_out * moved * es + np.asarray(gl).reshape(-1, 1, 1)
        gt = g_moved_out
        n_s = len(self.scale_net.params)
        gs_grads = None if grads is None else grads[:n_s]
        gt_grads = None if grads is None else grads[n_s:]
        gu = self.scale_net.backward(s_cache, gs.reshape(b, -1), gs_grads)
        gu = gu + self.shift_net.backward(t_cache, gt.reshape(b, -1), gt_grads)
        gx = np.empty_like(gy)
        gx[:, :, self.move] = g_moved_out * es
        gx[:, :, self.keep] = gy[:, :, self.keep] + gu.reshape(b, self.shape[0], self.keep.size)
        return gx

    def describe(self):
        return {
            "type": "coupling",
            "shape": list(self.shape),
            "parity": self.parity,
            "width": self.width,
            "depth": self.depth,
        }


class SplitBranch:
    """Split channels, run ``inner`` layers on the first half, concatenate."""

    def __init__(self, inner):
        self.inner = list(inner)
        self.params = [p for layer in self.inner for p in layer.params]

    def out_shape(self, shape):
        p, m = shape
        if p % 2:
            raise ValueError(f"split needs an even number of channels, got {p}")
        half = (p // 2, m)
        for layer in self.inner:
            half = layer.out_shape(half)
        if half != (p // 2, m):
            raise ValueError("inner branch must preserve its input shape")
        return shape

    def forward(self, x):
        top, bottom = split(x)
        logdet = 0.0
        caches = []
        for layer in self.inner:
            top, ld, cache = layer.forward(top)
            logdet = logdet + ld
            caches.append(cache)
        return concat(top, bottom), logdet, caches

    def inverse(self, y):
        top, bottom = split(y)
        for layer in reversed(self.inner):
            top = layer.inverse(top)
        return concat(top, bottom)

    def backward(self, cache, gy, gl, grads=None):
        gtop, gbottom = split(gy)
        offset = len(self.params)
        for layer, c in zip(reversed(self.inner), reversed(cache)):
            n = len(layer.params)
            offset -= n
            sub = None if grads is None else grads[offset:offset + n]
            gtop = layer.backward(c, gtop, gl, sub)
        return concat(gtop, gbottom)

    def describe(self):
        return {"type": "split_branch", "inner": [layer.describe() for layer in self.inner]}
