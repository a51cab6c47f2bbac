"""Particle-swarm minimiser over a bounded box, used as the myopic per-slot allocator."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError


@dataclass(frozen=True)
class PsoConfig:
    max_iterations: int = 100
    inertia: float = 0.2
    personal_coeff: float = 0.1
    social_coeff: float = 0.1
    lower: float = 1e-4
    upper: float = 1.0
    swarm_size: int = 30

    def __post_init__(self):
        if self.max_iterations < 1 or self.swarm_size < 1:
            raise ConfigError("max_iterations and swarm_size must be >= 1")
        if not self.lower < self.upper:
            raise ConfigError("position bounds are degenerate")


@dataclass(frozen=True)
class PsoResult:
    position: np.ndarray
    value: float
    trace: np.ndarray  # best-so-far value after each iteration
    visited_min: float
    visited_max: float


def pso_optimize(objective, dim: int, cfg: PsoConfig, rng: np.random.Generator) -> PsoResult:
    """Minimise ``objective`` (maps an (dim,) position to a float) inside [lower, upper]^dim."""
    lo, hi = cfg.lower, cfg.upper
    x = rng.uniform(lo, hi, (cfg.swarm_size, dim))
    v = rng.uniform(-(hi - lo), hi - lo, (cfg.swarm_size, dim)) * 0.1
    vals = np.array([objective(p) for p in x])
    pbest, pval = x.copy(), vals.copy()
    g = int(np.argmin(pval))
    gbest, gval = pbest[g].copy(), float(pval[g])
    vmin, vmax = x.min(), x.max()
    trace = []
    for _ in range(cfg.max_iterations):
        r1 = rng.random(x.shape)
        r2 = rng.random(x.shape)
        v = cfg.inertia * v + cfg.personal_coeff * r1 * (pbest - x) + cfg.social_coeff * r2 * (gbest - x)
        x = np.clip(x + v, lo, hi)
        vmin, vmax = min(vmin, x.min()), max(vmax, x.max())
        vals = np.array([objective(p) for p in x])
        better = vals < pval
        pbest[better] = x[better]
        pval[better] = vals[better]
        g = int(np.argmin(pval))
        if pval[g] < gval:
            gbest, gval = pbest[g].copy(), float(pval[g])
        trace.append(gval)
    return PsoResult(gbest, gval, np.array(trace), float(vmin), float(vmax))


def positions_to_action(x, bounds, cfg: PsoConfig):
    """Affine map of a position in [lower, upper]^(2N) to (powers, frequencies)."""
    x = np.asarray(x, dtype=float)
    u = (x - cfg.lower) / (cfg.upper - cfg.lower)
    n = len(x) // 2
    p = bounds.p_min + u[:n] * (bounds.p_max - bounds.p_min)
    f = bounds.f_min + u[n:] * (bounds.f_max - bounds.f_min)
    return p, f
