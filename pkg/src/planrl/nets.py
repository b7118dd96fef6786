"""Fully connected networks with hand-written forward/backward passes.

Hidden layers use ReLU; the output layer is linear or tanh.  Everything is
float64 numpy so analytic gradients can be checked against central finite
differences to tight tolerances.
"""
from __future__ import annotations

import numpy as np


def _relu(x):
    return np.maximum(x, 0.0)


class Mlp:
    """Multilayer perceptron storing weights as explicit matrices.

    ``sizes`` is [input, hidden..., output].  Initialization is uniform,
    scaled by the inverse square root of each layer's fan-in.
    """

    def __init__(self, sizes, out_act: str = "linear",
                 rng: np.random.Generator | None = None):
        if len(sizes) < 2:
            raise ValueError("need at least input and output sizes")
        if out_act not in ("linear", "tanh"):
            raise ValueError("out_act must be 'linear' or 'tanh'")
        self.sizes = tuple(int(s) for s in sizes)
        self.out_act = out_act
        rng = rng if rng is not None else np.random.default_rng(0)
        self.weights = []
        self.biases = []
        for nin, nout in zip(self.sizes[:-1], self.sizes[1:]):
            bound = 1.0 / np.sqrt(nin)
            self.weights.append(rng.uniform(-bound, bound, size=(nin, nout)))
            self.biases.append(np.zeros(nout))

    @property
    def n_layers(self) -> int:
        return len(self.weights)

    def params(self) -> list:
        out = []
        for w, b in zip(self.weights, self.biases):
            out.extend((w, b))
        return out

    def set_from(self, params: list):
        flat = self.params()
        if len(flat) != len(params):
            raise ValueError("parameter count mismatch")
        for dst, src in zip(flat, params):
            if dst.shape != src.shape:
                raise ValueError("parameter shape mismatch: %s vs %s"
                                 % (dst.shape, src.shape))
            dst[...] = src

    def forward(self, x: np.ndarray) -> np.ndarray:
        y, _ = self.forward_cached(x)
        return y

    def forward_cached(self, x: np.ndarray):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        acts = [x]
        pre = []
        h = x
        last = self.n_layers - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            z = h @ w + b
            pre.append(z)
            if i < last:
                h = _relu(z)
            elif self.out_act == "tanh":
                h = np.tanh(z)
            else:
                h = z
            acts.append(h)
        return acts[-1], (acts, pre)

    def backward(self, cache, dout: np.ndarray):
        """Gradients of a scalar loss given d(loss)/d(output).

        Returns (grads, dx) where grads matches :meth:`params` order.
        """
        acts, pre = cache
        dout = np.atleast_2d(np.asarray(dout, dtype=float))
        if self.out_act == "tanh":
            dz = dout * (1.0 - acts[-1] ** 2)
        else:
            dz = dout
        grads_w = [None] * self.n_layers
        grads_b = [None] * self.n_layers
        for i in range(self.n_layers - 1, -1, -1):
            grads_w[i] = acts[i].T @ dz
            grads_b[i] = dz.sum(axis=0)
            if i > 0:
                da = dz @ self.weights[i].T
                dz = da * (pre[i - 1] > 0.0)
        dx = dz @ self.weights[0].T if self.n_layers else dout
        grads = []
        for gw, gb in zip(grads_w, grads_b):
            grads.extend((gw, gb))
        return grads, dx


class Adam:
    """Per-parameter Adam state for one network."""

    def __init__(self, params: list, beta1: float = 0.9, beta2: float = 0.999,
                 eps: float = 1e-8):
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.t = 0.0

    def step(self, params: list, grads: list, lr: float):
        self.t += 1.0
        b1c = 1.0 - self.beta1 ** self.t
        b2c = 1.0 - self.beta2 ** self.t
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p -= lr * (m / b1c) / (np.sqrt(v / b2c) + self.eps)
