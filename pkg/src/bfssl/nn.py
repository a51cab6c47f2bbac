"""Small dense feed-forward network with hand-written backpropagation.

Inputs are row batches of shape (batch, features). ``backward`` returns exact
gradients for the graph ``forward`` built, so any scalar loss can be pushed
through by supplying its gradient with respect to the network output.
"""
from __future__ import annotations

import numpy as np

from .errors import ArchitectureMismatch

ACTIVATIONS = ("relu", "linear", "tanh")


def _act(name, z):
    if name == "relu":
        return np.maximum(z, 0.0)
    if name == "tanh":
        return np.tanh(z)
    return z


def _act_grad(name, z, a, upstream):
    if name == "relu":
        return upstream * (z > 0)
    if name == "tanh":
        return upstream * (1.0 - a * a)
    return upstream


class Mlp:
    def __init__(self, sizes, activations=None, rng=None, out_scale=None):
        sizes = [int(s) for s in sizes]
        if len(sizes) < 2:
            raise ValueError("need at least an input and an output size")
        n_layers = len(sizes) - 1
        if activations is None:
            activations = ["relu"] * (n_layers - 1) + ["linear"]
        if len(activations) != n_layers or any(a not in ACTIVATIONS for a in activations):
            raise ValueError(f"bad activation list {activations}")
        self.sizes = tuple(sizes)
        self.activations = tuple(activations)
        rng = rng if rng is not None else np.random.default_rng()
        self.weights = []
        self.biases = []
        for i, (fan_in, fan_out) in enumerate(zip(sizes[:-1], sizes[1:])):
            if i == n_layers - 1 and out_scale is not None:
                w = rng.uniform(-out_scale, out_scale, (fan_in, fan_out))
            else:
                # He init for rectifier layers, Glorot otherwise
                gain = 2.0 if activations[i] == "relu" else 1.0
                w = rng.normal(0.0, np.sqrt(gain / fan_in), (fan_in, fan_out))
            self.weights.append(w)
            self.biases.append(np.zeros(fan_out))

    # parameters ----------------------------------------------------------
    @property
    def params(self):
        out = []
        for w, b in zip(self.weights, self.biases):
            out += [w, b]
        return out

    @property
    def n_params(self) -> int:
        return sum(p.size for p in self.params)

    def get_flat(self) -> np.ndarray:
        return np.concatenate([p.ravel() for p in self.params])

    def set_flat(self, vec):
        vec = np.asarray(vec, dtype=float)
        if vec.shape != (self.n_params,):
            raise ArchitectureMismatch(f"expected {self.n_params} parameters, got {vec.shape}")
        i = 0
        for p in self.params:
            p[...] = vec[i:i + p.size].reshape(p.shape)
            i += p.size

    def copy(self) -> "Mlp":
        other = object.__new__(Mlp)
        other.sizes = self.sizes
        other.activations = self.activations
        other.weights = [w.copy() for w in self.weights]
        other.biases = [b.copy() for b in self.biases]
        return other

    def same_architecture(self, other: "Mlp") -> bool:
        return self.sizes == other.sizes and self.activations == other.activations

    # passes ----------------------------------------------------------------
    def forward(self, x):
        x = np.asarray(x, dtype=float)
        if x.ndim != 2 or x.shape[1] != self.sizes[0]:
            raise ArchitectureMismatch(f"input of shape {x.shape} does not match width {self.sizes[0]}")
        cache = []
        a = x
        for w, b, name in zip(self.weights, self.biases, self.activations):
            z = a @ w + b
            out = _act(name, z)
            cache.append((a, z, out))
            a = out
        return a, cache

    def __call__(self, x):
        return self.forward(x)[0]

    def backward(self, cache, dy):
        """Return ([dW0, db0, dW1, db1, ...], d_input) for upstream gradient ``dy``."""
        dy = np.asarray(dy, dtype=float)
        if dy.shape != cache[-1][2].shape:
            raise ArchitectureMismatch(f"upstream gradient shape {dy.shape} != output {cache[-1][2].shape}")
        grads = [None] * (2 * len(self.weights))
        g = dy
        for i in range(len(self.weights) - 1, -1, -1):
            a_in, z, out = cache[i]
            g = _act_grad(self.activations[i], z, out, g)
            grads[2 * i] = a_in.T @ g
            grads[2 * i + 1] = g.sum(axis=0)
            g = g @ self.weights[i].T
        return grads, g

    def forward_backward(self, x, dy):
        y, cache = self.forward(x)
        grads, dx = self.backward(cache, dy)
        return y, grads, dx


class Sgd:
    def __init__(self, lr: float, momentum: float = 0.0):
        self.lr = lr
        self.momentum = momentum
        self._buf = None

    def step(self, params, grads, lr=None):
        lr = self.lr if lr is None else lr
        if self.momentum:
            if self._buf is None:
                self._buf = [np.zeros_like(p) for p in params]
            for p, g, v in zip(params, grads, self._buf):
                v *= self.momentum
                v += g
                p -= lr * v
        else:
            for p, g in zip(params, grads):
                p -= lr * g


class Adam:
    def __init__(self, lr: float, b1: float = 0.9, b2: float = 0.999, eps: float = 1e-8):
        self.lr, self.b1, self.b2, self.eps = lr, b1, b2, eps
        self.t = 0
        self._m = self._v = None

    def step(self, params, grads, lr=None):
        lr = self.lr if lr is None else lr
        if self._m is None:
            self._m = [np.zeros_like(p) for p in params]
            self._v = [np.zeros_like(p) for p in params]
        self.t += 1
        c1 = 1 - self.b1**self.t
        c2 = 1 - self.b2**self.t
        for p, g, m, v in zip(params, grads, self._m, self._v):
            m *= self.b1
            m += (1 - self.b1) * g
            v *= self.b2
            v += (1 - self.b2) * g * g
            p -= lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


def make_optimizer(kind: str, lr: float):
    if kind == "sgd":
        return Sgd(lr)
    if kind == "adam":
        return Adam(lr)
    raise ValueError(f"unknown optimizer {kind!r}")
