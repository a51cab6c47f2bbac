"""Toy SimCo: dual-temperature contrastive loss, its gradient, and local momentum-SGD training.

Negatives for an anchor are the positives of every other anchor in the same
batch. The reweighting coefficient W_beta / W_alpha is a stop-gradient
constant, where W_tau = 1 - softmax_tau(positive).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import log_softmax

from .nn import Mlp

AUGMENTATIONS = ("none", "noise", "mask")


@dataclass(frozen=True)
class SimcoConfig:
    tau_alpha: float = 0.1
    tau_beta: float = 1.0
    embed_dim: int = 128  # p_j
    input_dim: int = 16
    hidden_dim: int = 64
    proj_dim: int = 64
    lr: float = 0.06
    momentum: float = 0.9
    lr_steps: int = 4  # plateaus of the stepped cosine schedule
    lr_floor: float = 0.0
    aug_noise: float = 0.1
    aug_mask: float = 0.2

    def __post_init__(self):
        if not (self.tau_alpha > 0 and self.tau_beta > 0):
            raise ValueError("temperatures must be positive")
        if min(self.embed_dim, self.input_dim, self.hidden_dim, self.proj_dim) < 1:
            raise ValueError("layer widths must be positive")


@dataclass(frozen=True)
class SimcoBatch:
    anchor: np.ndarray  # (d,)
    positive: np.ndarray  # (d,)
    negatives: np.ndarray  # (K, d)

    def __post_init__(self):
        negs = np.atleast_2d(self.negatives)
        if negs.shape[0] < 1:
            raise ValueError("need at least one negative")
        for v in (self.anchor, self.positive, *negs):
            if abs(np.linalg.norm(v) - 1.0) > 1e-9:
                raise ValueError("embeddings must have unit norm")


# --- single-anchor loss -----------------------------------------------------

def _logits(batch: SimcoBatch):
    keys = np.vstack([batch.positive, np.atleast_2d(batch.negatives)])
    return keys, keys @ batch.anchor


def _ratio(la_pos):
    # log(p) / (p - 1) for the positive's log-probability; tends to 1 as p -> 1
    den = np.expm1(la_pos)
    safe = np.where(den == 0.0, -1.0, den)
    return np.where(den == 0.0, 1.0, la_pos / safe)


def _coefficient(sims, cfg):
    la = log_softmax(sims / cfg.tau_alpha)
    lb = log_softmax(sims / cfg.tau_beta)
    w_a = -np.expm1(la[0])
    w_b = -np.expm1(lb[0])
    coef = w_b / w_a if w_a > 0 else np.inf
    return la, w_b, coef


def dual_temperature_loss(batch: SimcoBatch, cfg: SimcoConfig):
    # -coef * log p = W_beta * log p / (p - 1), finite even when W_alpha underflows
    _, sims = _logits(batch)
    la, w_b, coef = _coefficient(sims, cfg)
    return float(w_b * _ratio(la[0])), float(coef)


def dual_temperature_grad(batch: SimcoBatch, cfg: SimcoConfig):
    """Gradients of the loss with respect to (anchor, positive, negatives), coefficient held fixed."""
    keys, sims = _logits(batch)
    la, w_b, _ = _coefficient(sims, cfg)
    # coef * (softmax - onehot) = W_beta * (-1, softmax over the negatives alone)
    g = np.empty_like(sims)
    g[0] = -1.0
    g[1:] = np.exp(log_softmax(sims[1:] / cfg.tau_alpha))
    g *= w_b / cfg.tau_alpha
    return g @ keys, g[0] * batch.anchor, g[1:, None] * batch.anchor[None, :]


# --- batched form used in training -------------------------------------------

def batch_loss_grad(q, k, cfg: SimcoConfig, grad=True):
    """Mean loss over anchors q_i with positives k_i and negatives k_j (j != i).

    Returns (loss, dq, dk); the gradients are None when ``grad`` is False.
    """
    s = q @ k.T
    m = len(q)
    idx = np.arange(m)
    la = log_softmax(s / cfg.tau_alpha, axis=1)
    w_b = -np.expm1(log_softmax(s / cfg.tau_beta, axis=1)[idx, idx])
    loss = float(np.mean(w_b * _ratio(la[idx, idx])))
    if not grad:
        return loss, None, None
    # off-diagonal: softmax over each row's negatives only; diagonal: -1
    off = s / cfg.tau_alpha
    off[idx, idx] = -np.inf
    ds = np.exp(log_softmax(off, axis=1)) if m > 1 else np.zeros_like(s)
    ds[idx, idx] = -1.0
    ds *= (w_b / (cfg.tau_alpha * m))[:, None]
    return loss, ds @ k, ds.T @ q


# --- encoder ----------------------------------------------------------------

class ToyEncoder:
    """Encoder (input -> hidden -> p_j) plus a two-layer projection head, then L2 normalisation."""

    def __init__(self, cfg: SimcoConfig, rng: np.random.Generator):
        self.cfg = cfg
        sizes = [cfg.input_dim, cfg.hidden_dim, cfg.embed_dim, cfg.proj_dim, cfg.embed_dim]
        self.net = Mlp(sizes, ["relu", "linear", "relu", "linear"], rng=rng)

    @property
    def n_params(self):
        return self.net.n_params

    def get_params(self):
        return self.net.get_flat()

    def set_params(self, vec):
        self.net.set_flat(vec)

    def forward(self, x):
        z, cache = self.net.forward(x)
        norm = np.linalg.norm(z, axis=1, keepdims=True)
        return z / norm, (cache, z / norm, norm)

    def backward(self, state, dy):
        cache, y, norm = state
        dz = (dy - y * np.sum(y * dy, axis=1, keepdims=True)) / norm
        grads, _ = self.net.backward(cache, dz)
        return grads


def augment(x, kind: str, rng: np.random.Generator, cfg: SimcoConfig):
    x = np.asarray(x, dtype=float)
    if kind == "none":
        return x
    if kind == "noise":
        return x + rng.normal(0.0, cfg.aug_noise, x.shape)
    if kind == "mask":
        return x * (rng.random(x.shape) >= cfg.aug_mask)
    raise ValueError(f"unknown augmentation {kind!r}; choose from {AUGMENTATIONS}")


def encode(inputs, encoder: ToyEncoder, augmentation: str, rng, cfg: SimcoConfig | None = None):
    cfg = cfg or encoder.cfg
    return encoder.forward(augment(inputs, augmentation, rng, cfg))[0]


def _views(x, rng, cfg):
    return augment(x, "noise", rng, cfg), augment(augment(x, "mask", rng, cfg), "noise", rng, cfg)


def contrastive_step(encoder: ToyEncoder, x, rng, cfg: SimcoConfig, grad=True):
    """Loss (and flat gradient) of one full-batch step over two augmented views."""
    v1, v2 = _views(x, rng, cfg)
    q, st_q = encoder.forward(v1)
    k, st_k = encoder.forward(v2)
    loss, dq, dk = batch_loss_grad(q, k, cfg, grad=grad)
    if not grad:
        return loss, None
    gq = encoder.backward(st_q, dq)
    gk = encoder.backward(st_k, dk)
    return loss, [a + b for a, b in zip(gq, gk)]


def evaluate_loss(params, encoder: ToyEncoder, x, seed: int = 0) -> float:
    """Loss of ``params`` on ``x`` with augmentations drawn from a fixed seed."""
    saved = encoder.get_params()
    encoder.set_params(params)
    try:
        return contrastive_step(encoder, x, np.random.default_rng(seed), encoder.cfg, grad=False)[0]
    finally:
        encoder.set_params(saved)


def stepped_cosine_lr(round_idx: int, total_rounds: int, cfg: SimcoConfig) -> float:
    """Cosine decay from cfg.lr held constant over ``cfg.lr_steps`` equal plateaus."""
    if total_rounds <= 1:
        return cfg.lr
    frac = min(max(round_idx, 0), total_rounds - 1) / total_rounds
    frac = math.floor(frac * cfg.lr_steps) / cfg.lr_steps
    return cfg.lr_floor + 0.5 * (cfg.lr - cfg.lr_floor) * (1 + math.cos(math.pi * frac))


def local_train(params, data, iterations: int, encoder: ToyEncoder, rng: np.random.Generator,
                lr=None, cfg: SimcoConfig | None = None):
    """Run ``iterations`` full-batch momentum-SGD steps; returns (params, per-step losses).

    ``lr`` is a float or a callable of the step index; defaults to cfg.lr.
    """
    cfg = cfg or encoder.cfg
    params = np.asarray(params, dtype=float)
    if iterations <= 0:
        return params, []
    lr = cfg.lr if lr is None else lr
    sched = lr if callable(lr) else (lambda _i: lr)
    encoder.set_params(params.copy())
    buf = None
    losses = []
    for i in range(int(iterations)):
        loss, grads = contrastive_step(encoder, data, rng, cfg)
        losses.append(loss)
        if buf is None:
            buf = [np.zeros_like(p) for p in encoder.net.params]
        step = sched(i)
        for p, g, v in zip(encoder.net.params, grads, buf):
            v *= cfg.momentum
            v += g
            p -= step * v
    return encoder.get_params(), losses


def make_clusters(n: int, dim: int, rng: np.random.Generator, n_clusters: int = 2,
                  separation: float = 3.0, spread: float = 1.0, centers=None):
    """Gaussian blobs; returns (samples, labels, centers)."""
    if centers is None:
        centers = rng.normal(0.0, separation, (n_clusters, dim))
    centers = np.asarray(centers, dtype=float)
    labels = rng.integers(len(centers), size=n)
    x = centers[labels] + rng.normal(0.0, spread, (n, dim))
    return x, labels, centers
