"""Blur levels and the three global-model aggregators (blur-weighted, plain mean, drop-blurred)."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import EmptyRoundError

DEFAULT_BLUR_COEFF = 0.01  # s*H/Q
DEFAULT_DROP_THRESHOLD = 100.0  # km/h


@dataclass(frozen=True)
class BlurRecord:
    vehicle: int
    blur_level: float
    success: int

    def __post_init__(self):
        if not self.blur_level >= 0:
            raise ValueError(f"blur level must be >= 0, got {self.blur_level}")
        if self.success not in (0, 1):
            raise ValueError("success must be 0 or 1")


def blur_level(velocity, blur_coeff: float = DEFAULT_BLUR_COEFF):
    if not blur_coeff > 0:
        raise ValueError("blur_coeff must be positive")
    return blur_coeff * np.asarray(velocity, dtype=float)


def _stack(models):
    mats = [np.asarray(m, dtype=float).ravel() for m in models]
    if not mats:
        raise EmptyRoundError("no models supplied")
    dim = mats[0].size
    if dim == 0 or any(m.size != dim for m in mats):
        raise ValueError("all models must share one non-zero dimension")
    return np.stack(mats)


def _combine(theta, w):
    # fixed left-to-right reduction for reproducibility
    out = np.zeros(theta.shape[1])
    for wi, row in zip(w, theta):
        if wi:
            out += wi * row
    return out


def bfssl_weights(blurs, successes):
    """Normalised weights proportional to (sum of blurs - own blur), masked by upload success."""
    b = np.asarray(blurs, dtype=float)
    c = np.asarray(successes, dtype=float)
    if not np.any(c > 0):
        raise EmptyRoundError("every upload failed")
    raw = (b.sum() - b) * c
    total = raw.sum()
    if total <= 0:
        # one survivor whose share is zero (N = 1, or all blur sits on the survivor)
        raw = c.copy()
        total = raw.sum()
    return raw / total


def aggregate_bfssl(models, records):
    theta = _stack(models)
    w = bfssl_weights([r.blur_level for r in records], [r.success for r in records])
    return _combine(theta, w)


def aggregate_uniform(models, successes):
    theta = _stack(models)
    c = np.asarray(successes, dtype=float)
    if not np.any(c > 0):
        raise EmptyRoundError("every upload failed")
    return _combine(theta, c / c.sum())


def aggregate_drop_blurred(models, records, velocities, threshold: float = DEFAULT_DROP_THRESHOLD):
    keep = [int(r.success and v <= threshold) for r, v in zip(records, velocities)]
    if not any(keep):
        raise EmptyRoundError("every model was dropped or failed")
    return aggregate_uniform(models, keep)


def corrupt_fraction(batch, fraction: float, rng: np.random.Generator, blend: float = 0.9,
                     noise_std: float = 0.1):
    """Blur a ceil(fraction * n) subset of rows toward the batch mean and add noise.

    Returns (corrupted copy, boolean mask of affected rows).
    """
    if not 0.0 <= fraction <= 1.0:
        raise ValueError("fraction must lie in [0, 1]")
    x = np.asarray(batch, dtype=float)
    n = x.shape[0]
    count = min(n, math.ceil(fraction * n - 1e-9))
    mask = np.zeros(n, dtype=bool)
    if count == 0:
        return x.copy(), mask
    idx = rng.choice(n, size=count, replace=False)
    mask[idx] = True
    out = x.copy()
    mean = x.mean(axis=0)
    out[idx] = (1 - blend) * x[idx] + blend * mean + rng.normal(0.0, noise_std, (count, x.shape[1]))
    return out, mask
