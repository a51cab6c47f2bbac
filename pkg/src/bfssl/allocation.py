"""Energy/delay objective, the A-F reduction, and closed-form bandwidth shares.

For fixed powers and frequencies the bandwidth shares follow from the KKT
conditions of the reduced problem: beta_n is proportional to
sqrt(A_n + tau_n E_n). ``oracle_beta`` minimises the same reduced objective
numerically so the closed form can be checked against it.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from . import channel as ch
from . import compute as cp
from .errors import (
    ConfigError,
    ConstraintViolation,
    DegenerateInstanceError,
    DegenerateLinkError,
    InfeasibleLinkError,
)

log = logging.getLogger(__name__)

RADICAND_FLOOR = 1e-18
_TOL = 1e-9


@dataclass(frozen=True)
class ObjectiveWeights:
    lambda1: float = 0.7  # energy
    lambda2: float = 0.3  # delay

    def __post_init__(self):
        for lam in (self.lambda1, self.lambda2):
            if not 0.0 <= lam <= 1.0:
                raise ConfigError("objective weights must lie in [0, 1]")
        if abs(self.lambda1 + self.lambda2 - 1.0) > 1e-12:
            raise ConfigError("objective weights must sum to 1")


@dataclass(frozen=True)
class Notations:
    """Per-vehicle A..F coefficients of the reduced objective (arrays of length N)."""

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    E: np.ndarray
    F: np.ndarray

    def __len__(self):
        return len(self.A)


@dataclass(frozen=True)
class AllocationAction:
    powers: np.ndarray  # W
    frequencies: np.ndarray  # Hz
    betas: np.ndarray

    def __post_init__(self):
        n = len(self.powers)
        if len(self.frequencies) != n or len(self.betas) != n:
            raise ValueError("powers, frequencies and betas must have equal length")


@dataclass(frozen=True)
class CostBreakdown:
    trans_delay: np.ndarray
    trans_energy: np.ndarray
    comp_delay: np.ndarray  # one iteration
    comp_energy: np.ndarray  # one iteration
    iterations: np.ndarray
    total_energy: np.ndarray
    total_delay: np.ndarray
    energy_sum: float
    max_delay: float
    value: float


def notations(p, h, interference, f, weights: ObjectiveWeights, channel_cfg: ch.ChannelConfig,
              compute_cfg: cp.ComputeConfig) -> Notations:
    p = np.atleast_1d(np.asarray(p, dtype=float))
    f = np.atleast_1d(np.asarray(f, dtype=float))
    log_term = np.log1p(np.atleast_1d(p * np.asarray(h) / (np.asarray(interference) + channel_cfg.noise_power)))
    if np.any(~(log_term > 0)):
        raise DegenerateLinkError("zero SINR: A and E are undefined")
    lam1, lam2 = weights.lambda1, weights.lambda2
    bu, z = channel_cfg.bandwidth, channel_cfg.model_bits
    cycles = compute_cfg.cycles_per_round
    n = len(p)
    A = lam1 * p * z / (bu * log_term)
    B = np.full(n, lam1 * compute_cfg.kappa * compute_cfg.training_window)
    C = np.full(n, lam1 * compute_cfg.kappa * cycles)
    E = lam2 * z / (bu * log_term)
    F = np.full(n, lam2 * cycles)
    return Notations(A, B, C, E, F)


def kkt_tau(f, notes: Notations):
    f = np.asarray(f, dtype=float)
    return (3.0 * notes.B * f**4 - 2.0 * notes.C * f**3) / notes.F


def kkt_beta(notes: Notations, f) -> np.ndarray:
    """Closed-form bandwidth shares beta_n = sqrt(A_n + tau_n E_n) / sum_m sqrt(A_m + tau_m E_m)."""
    rad = notes.A + kkt_tau(f, notes) * notes.E
    if not np.any(rad > 0):
        raise DegenerateInstanceError("all KKT radicands are non-positive")
    low = rad < RADICAND_FLOOR
    if np.any(low):
        log.debug("clamping %d non-positive KKT radicand(s) to %g", int(low.sum()), RADICAND_FLOOR)
        rad = np.where(low, RADICAND_FLOOR, rad)
    root = np.sqrt(rad)
    return root / root.sum()


def reduced_objective(beta, notes: Notations, f) -> float:
    """sum_n [A/beta + B f^3 - C f^2] + max_n [E/beta + F/f]."""
    beta = np.asarray(beta, dtype=float)
    f = np.asarray(f, dtype=float)
    energy = np.sum(notes.A / beta + notes.B * f**3 - notes.C * f**2)
    return float(energy + np.max(notes.E / beta + notes.F / f))


def check_action(action: AllocationAction, channel_cfg: ch.ChannelConfig, compute_cfg: cp.ComputeConfig):
    problems = []
    p, f, b = (np.asarray(x, dtype=float) for x in (action.powers, action.frequencies, action.betas))
    if np.any(p < channel_cfg.p_min * (1 - _TOL)) or np.any(p > channel_cfg.p_max * (1 + _TOL)):
        problems.append(f"power outside [{channel_cfg.p_min:g}, {channel_cfg.p_max:g}] W")
    if np.any(f < compute_cfg.f_min * (1 - _TOL)) or np.any(f > compute_cfg.f_max * (1 + _TOL)):
        problems.append(f"frequency outside [{compute_cfg.f_min:g}, {compute_cfg.f_max:g}] Hz")
    if np.any(b <= 0) or np.any(b > 1):
        problems.append("bandwidth share outside (0, 1]")
    if b.sum() > 1 + _TOL:
        problems.append(f"bandwidth shares sum to {b.sum():.12g} > 1")
    if problems:
        raise ConstraintViolation("; ".join(problems))


def objective(action: AllocationAction, gain, interference, weights: ObjectiveWeights,
              channel_cfg: ch.ChannelConfig, compute_cfg: cp.ComputeConfig):
    """Weighted total energy plus weighted worst-case delay for one slot."""
    check_action(action, channel_cfg, compute_cfg)
    p = np.asarray(action.powers, dtype=float)
    f = np.asarray(action.frequencies, dtype=float)
    t_tr, e_tr = ch.transmission_delay_energy(p, gain, interference, action.betas, channel_cfg)
    t_cp = cp.compute_delay(f, compute_cfg)
    e_cp = cp.compute_energy_per_iter(f, compute_cfg)
    iters = np.atleast_1d(cp.iteration_count(f, compute_cfg))
    e_tot = e_tr + iters * e_cp
    t_tot = t_tr + t_cp
    energy_sum = float(np.sum(e_tot))
    max_delay = float(np.max(t_tot))
    value = weights.lambda1 * energy_sum + weights.lambda2 * max_delay
    return value, CostBreakdown(t_tr, e_tr, t_cp, e_cp, iters, e_tot, t_tot, energy_sum, max_delay, value)


def p_star(h, interference, channel_cfg: ch.ChannelConfig, check: bool = True):
    """Lower end of the usable power interval, max(p_min, P_tau)."""
    out = np.maximum(channel_cfg.p_min, ch.p_tau(h, interference, channel_cfg))
    if check and np.any(out > channel_cfg.p_max):
        raise InfeasibleLinkError(
            f"error-rate power floor {np.max(out):.4g} W exceeds p_max {channel_cfg.p_max:.4g} W")
    return out


# --- numerical oracle -------------------------------------------------------

@dataclass(frozen=True)
class OracleResult:
    beta: np.ndarray
    value: float
    converged: bool


def project_simplex(v, total: float = 1.0):
    """Euclidean projection of ``v`` onto {x >= 0, sum x = total}."""
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - total
    idx = np.arange(1, len(v) + 1)
    rho = np.nonzero(u - css / idx > 0)[0][-1]
    theta = css[rho] / (rho + 1)
    return np.maximum(v - theta, 0.0)


def _project(v, floor):
    n = len(v)
    return floor + project_simplex(v - floor, 1.0 - n * floor)


def oracle_beta(notes: Notations, f, rng: np.random.Generator | None = None, restarts: int = 4,
                max_iter: int = 200, floor: float = 1e-9, start=None) -> OracleResult:
    """Minimise the reduced objective over the simplex by projected gradient descent.

    The max term is replaced by a log-sum-exp with a temperature that is
    annealed towards zero; every candidate is scored on the exact objective
    and the best one is kept. ``start`` adds an extra initial point.
    """
    f = np.asarray(f, dtype=float)
    n = len(notes)
    if n == 1:
        return OracleResult(np.ones(1), reduced_objective(np.ones(1), notes, f), True)
    rng = rng if rng is not None else np.random.default_rng(0)
    A, E = notes.A, notes.E
    const = notes.F / f

    def exact(b):
        return float(np.sum(A / b) + np.max(E / b + const))

    starts = [np.full(n, 1.0 / n)]
    if start is not None:
        starts.append(np.asarray(start, dtype=float))
    starts += [rng.dirichlet(np.ones(n)) for _ in range(max(restarts - len(starts), 0))]

    scale = exact(starts[0])
    temps = scale * np.logspace(-2, -9, 6)
    best_b, best_v = None, np.inf
    converged = False
    for b0 in starts:
        b = _project(b0, floor)
        v0 = exact(b)
        if v0 < best_v:
            best_b, best_v = b, v0
        for mu in temps:
            def smooth(x):
                t = (E / x + const) / mu
                m = t.max()
                w = np.exp(t - m)
                val = np.sum(A / x) + mu * (m + np.log(w.sum()))
                grad = -A / x**2 - (w / w.sum()) * E / x**2
                return val, grad

            val, grad = smooth(b)
            step = 1.0 / max(np.max(np.abs(grad)), 1e-300)
            stalled = False
            for _ in range(max_iter):
                # Armijo backtracking along the projected direction
                while True:
                    cand = _project(b - step * grad, floor)
                    cval, cgrad = smooth(cand)
                    if cval <= val - 1e-4 * np.dot(grad, b - cand) or step < 1e-300:
                        break
                    step *= 0.5
                moved = np.max(np.abs(cand - b))
                b, val, grad = cand, cval, cgrad
                step *= 2.0
                if moved < 1e-13:
                    stalled = True
                    break
            converged = converged or stalled
        v = exact(b)
        if v < best_v:
            best_b, best_v = b, v
    return OracleResult(best_b, best_v, converged)
