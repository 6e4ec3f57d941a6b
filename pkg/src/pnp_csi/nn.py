"""Minimal CNN building blocks with explicit backprop, numpy only.

Activations are (batch, channels, height, width) arrays.  Every layer exposes
forward(x) and backward(grad_out); backward must follow a forward on the same
input and returns the gradient with respect to that input, storing parameter
gradients on the layer (conv: .gw/.gb).  Convolutions are stride-1, zero
same-padded cross-correlations evaluated as im2col matrix products.
"""

from __future__ import annotations

import numpy as np


def pixel_unshuffle(x, r):
    """Space-to-depth: (b, c, h, w) -> (b, c*r*r, h/r, w/r).

    Output channel c*r*r + ri*r + rj holds input pixels at offsets (ri, rj)
    within each r x r block.
    """
    b, c, h, w = x.shape
    if h % r or w % r:
        raise ValueError(f"spatial dims ({h}, {w}) not divisible by {r}")
    y = x.reshape(b, c, h // r, r, w // r, r)
    return y.transpose(0, 1, 3, 5, 2, 4).reshape(b, c * r * r, h // r, w // r)


def pixel_shuffle(x, r):
    """Depth-to-space inverse of pixel_unshuffle."""
    b, c, h, w = x.shape
    if c % (r * r):
        raise ValueError(f"channel count {c} not divisible by r^2 = {r * r}")
    y = x.reshape(b, c // (r * r), r, r, h, w)
    return y.transpose(0, 1, 4, 2, 5, 3).reshape(b, c // (r * r), h * r, w * r)


def he_uniform(shape, fan_in, rng, dtype=np.float32):
    bound = np.sqrt(6.0 / fan_in)
    return rng.uniform(-bound, bound, size=shape).astype(dtype)


def _im2col(x, k):
    """(b, c, h, w) -> (b, c*k*k, h*w) patches of the same-padded input."""
    b, c, h, w = x.shape
    p = k // 2
    xp = np.pad(x, ((0, 0), (0, 0), (p, p), (p, p)))
    win = np.lib.stride_tricks.sliding_window_view(xp, (k, k), axis=(2, 3))
    return win.transpose(0, 1, 4, 5, 2, 3).reshape(b, c * k * k, h * w)


class Conv2d:
    """Same-padded stride-1 convolution; He-uniform weights, zero biases."""

    def __init__(self, in_channels, out_channels, ksize=3, rng=None,
                 dtype=np.float32):
        if ksize % 2 == 0:
            raise ValueError("kernel size must be odd for same padding")
        if rng is None:
            rng = np.random.default_rng()
        self.ksize = ksize
        self.w = he_uniform((out_channels, in_channels, ksize, ksize),
                            fan_in=in_channels * ksize * ksize,
                            rng=rng, dtype=dtype)
        self.b = np.zeros(out_channels, dtype=dtype)
        self.gw = np.zeros_like(self.w)
        self.gb = np.zeros_like(self.b)
        self._x = None

    def _correlate(self, x, w):
        b, _, h, wd = x.shape
        cols = _im2col(x, self.ksize)
        y = np.matmul(w.reshape(w.shape[0], -1)[None], cols)
        return y.reshape(b, w.shape[0], h, wd), cols

    def forward(self, x):
        x = np.asarray(x, dtype=self.w.dtype)
        self._x = x
        y, _ = self._correlate(x, self.w)
        return y + self.b[None, :, None, None]

    def backward(self, g):
        if self._x is None:
            raise RuntimeError("backward called before forward")
        g = np.asarray(g, dtype=self.w.dtype)
        b, cout, h, w = g.shape
        # patches are recomputed instead of cached: costs one extra im2col,
        # saves ~50 MB per mid layer at batch 128
        cols = _im2col(self._x, self.ksize)
        g2 = g.reshape(b, cout, h * w)
        self.gw = np.tensordot(g2, cols, axes=([0, 2], [0, 2])).reshape(
            self.w.shape)
        self.gb = g.sum(axis=(0, 2, 3))
        # input gradient: same-padded correlation with spatially flipped,
        # channel-transposed kernels
        w_t = self.w.transpose(1, 0, 2, 3)[:, :, ::-1, ::-1]
        dx, _ = self._correlate(g, np.ascontiguousarray(w_t))
        return dx

    def param_triples(self, prefix):
        return [(f"{prefix}.w", self.w, self.gw),
                (f"{prefix}.b", self.b, self.gb)]


class ReLU:
    def __init__(self):
        self._mask = None

    def forward(self, x):
        self._mask = x > 0
        return np.maximum(x, 0)  # maximum, not where: NaNs must propagate

    def backward(self, g):
        return np.where(self._mask, g, 0)


class PixelUnshuffle:
    def __init__(self, r):
        self.r = r

    def forward(self, x):
        return pixel_unshuffle(x, self.r)

    def backward(self, g):
        return pixel_shuffle(g, self.r)


class PixelShuffle:
    def __init__(self, r):
        self.r = r

    def forward(self, x):
        return pixel_shuffle(x, self.r)

    def backward(self, g):
        return pixel_unshuffle(g, self.r)


class Sequential:
    def __init__(self, layers):
        self.layers = list(layers)

    def forward(self, x):
        for layer in self.layers:
            x = layer.forward(x)
        return x

    def backward(self, g):
        for layer in reversed(self.layers):
            g = layer.backward(g)
        return g

    def param_triples(self):
        """(name, param, grad) for every trainable tensor, forward order."""
        out = []
        conv_idx = 0
        for layer in self.layers:
            if isinstance(layer, Conv2d):
                out.extend(layer.param_triples(f"conv{conv_idx}"))
                conv_idx += 1
        return out

    def param_count(self):
        return sum(p.size for _, p, _ in self.param_triples())


class Adam:
    """Adam with bias correction; params are updated in place."""

    def __init__(self, params, lr=1e-4, beta1=0.9, beta2=0.999, eps=1e-8):
        self.params = list(params)
        self.lr = lr
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.m = [np.zeros_like(p) for p in self.params]
        self.v = [np.zeros_like(p) for p in self.params]
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
