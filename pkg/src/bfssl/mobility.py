"""Vehicle kinematics around a single signalised intersection.

The base station sits at the intersection centre. Vehicles approach on one of
four axis-aligned roads, make a single turn decision at the centre and then
drive straight until they leave coverage, at which point the harness spawns a
replacement.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy import special

from .errors import ConfigError, SamplingFault

KMH_TO_MS = 1000.0 / 3600.0
_MAX_RETRIES = 16

# unit headings pointing *towards* the centre from the east, north, west, south roads
ROAD_HEADINGS = ((-1.0, 0.0), (0.0, -1.0), (1.0, 0.0), (0.0, 1.0))


@dataclass(frozen=True)
class MobilityConfig:
    v_min: float = 60.0  # km/h
    v_max: float = 150.0
    mu: float = 105.0
    sigma2: float = 8.0  # (km/h)^2
    turn_probs: tuple[float, float, float] = (0.3, 0.3, 0.4)  # left, right, straight
    bs_position: tuple[float, float] = (0.0, 0.0)
    slot_duration: float = 0.5  # s
    spawn_radius: float = 150.0  # m
    coverage_radius: float = 200.0
    d_floor: float = 1.0

    def __post_init__(self):
        if not self.v_min < self.v_max:
            raise ConfigError(f"v_min ({self.v_min}) must be below v_max ({self.v_max})")
        if not self.sigma2 > 0:
            raise ConfigError("sigma2 must be positive")
        probs = self.turn_probs
        if len(probs) != 3 or min(probs) < 0 or not math.isclose(sum(probs), 1.0, abs_tol=1e-12):
            raise ConfigError(f"turn_probs must be non-negative and sum to 1, got {probs}")
        if not self.slot_duration > 0:
            raise ConfigError("slot_duration must be positive")
        if not 0 < self.spawn_radius < self.coverage_radius:
            raise ConfigError("need 0 < spawn_radius < coverage_radius")
        if not self.d_floor > 0:
            raise ConfigError("d_floor must be positive")

    @property
    def sigma(self) -> float:
        return math.sqrt(self.sigma2)


@dataclass(frozen=True)
class VehicleState:
    id: int
    position: tuple[float, float]
    heading: tuple[float, float]
    velocity: float  # km/h
    has_turned: bool = False
    road: int = 0  # approach road index, used to pick the vehicle's data distribution

    def __post_init__(self):
        norm = math.hypot(*self.heading)
        if abs(norm - 1.0) > 1e-9:
            raise ValueError(f"heading must be a unit vector, |h| = {norm}")


def _log_window_mass(a: float, b: float) -> float:
    """log(Phi(b) - Phi(a)) for standard-normal bounds, stable far in either tail."""
    if a > 0:
        a, b = -b, -a
    la, lb = special.log_ndtr(a), special.log_ndtr(b)
    return float(lb + np.log1p(-np.exp(la - lb)))


def velocity_pdf(cfg: MobilityConfig, v):
    """Truncated-Gaussian velocity density; zero outside [v_min, v_max].

    Normalised so that it integrates to one over the window, i.e.
    exp(-(v-mu)^2 / 2 sigma^2) / (sqrt(2 pi sigma^2) * (Phi(b) - Phi(a))).
    """
    v = np.asarray(v, dtype=float)
    s = cfg.sigma
    a = (cfg.v_min - cfg.mu) / s
    b = (cfg.v_max - cfg.mu) / s
    log_norm = 0.5 * math.log(2 * math.pi * cfg.sigma2) + _log_window_mass(a, b)
    dens = np.exp(-((v - cfg.mu) ** 2) / (2 * cfg.sigma2) - log_norm)
    inside = (v >= cfg.v_min) & (v <= cfg.v_max)
    out = np.where(inside, dens, 0.0)
    return float(out) if out.ndim == 0 else out


def _truncnorm_standard(a: float, b: float, u):
    """Inverse-CDF draw on [a, b] for a standard normal, done in the lower tail in log space."""
    flip = a > 0
    if flip:
        a, b = -b, -a
    la, lb = special.log_ndtr(a), special.log_ndtr(b)
    # log(Phi(a) + u (Phi(b) - Phi(a)))
    logp = lb + np.log(u + (1.0 - u) * np.exp(la - lb))
    x = special.ndtri_exp(logp)
    x = np.clip(x, a, b)
    return -x if flip else x


def sample_velocity(cfg: MobilityConfig, rng: np.random.Generator, size=None):
    a = (cfg.v_min - cfg.mu) / cfg.sigma
    b = (cfg.v_max - cfg.mu) / cfg.sigma
    for _ in range(_MAX_RETRIES):
        u = rng.random(size)
        z = _truncnorm_standard(a, b, u)
        v = cfg.mu + cfg.sigma * z
        v = np.clip(v, cfg.v_min, cfg.v_max)
        if np.all(np.isfinite(v)):
            return float(v) if size is None else v
    raise SamplingFault("truncated-normal sampler produced non-finite draws repeatedly")


def _turn(heading, choice: int):
    hx, hy = heading
    if choice == 0:  # left: rotate +90 degrees
        return (-hy, hx)
    if choice == 1:
        return (hy, -hx)
    return (hx, hy)


def step_vehicle(state: VehicleState, cfg: MobilityConfig, rng: np.random.Generator) -> VehicleState:
    """Advance one slot at the current velocity, then redraw the velocity."""
    step = state.velocity * KMH_TO_MS * cfg.slot_duration
    px, py = state.position
    hx, hy = state.heading
    heading = state.heading
    has_turned = state.has_turned
    if not has_turned:
        cx, cy = cfg.bs_position
        # signed distance to the centre along the heading
        ahead = (cx - px) * hx + (cy - py) * hy
        if 0.0 <= ahead <= step:
            choice = int(rng.choice(3, p=cfg.turn_probs))
            heading = _turn(heading, choice)
            rest = step - ahead
            px, py = px + ahead * hx, py + ahead * hy
            hx, hy = heading
            px, py = px + rest * hx, py + rest * hy
            has_turned = True
            step = 0.0
    px, py = px + step * hx, py + step * hy
    return replace(
        state,
        position=(px, py),
        heading=heading,
        velocity=sample_velocity(cfg, rng),
        has_turned=has_turned,
    )


def distance_to_bs(state: VehicleState, cfg: MobilityConfig) -> float:
    dx = state.position[0] - cfg.bs_position[0]
    dy = state.position[1] - cfg.bs_position[1]
    return max(math.hypot(dx, dy), cfg.d_floor)


def spawn_vehicle(vid: int, cfg: MobilityConfig, rng: np.random.Generator) -> VehicleState:
    road = int(rng.integers(4))
    hx, hy = ROAD_HEADINGS[road]
    cx, cy = cfg.bs_position
    pos = (cx - hx * cfg.spawn_radius, cy - hy * cfg.spawn_radius)
    return VehicleState(vid, pos, (hx, hy), sample_velocity(cfg, rng), False, road)


def respawn_if_exited(state: VehicleState, cfg: MobilityConfig, rng: np.random.Generator) -> VehicleState:
    dx = state.position[0] - cfg.bs_position[0]
    dy = state.position[1] - cfg.bs_position[1]
    if state.has_turned and math.hypot(dx, dy) > cfg.coverage_radius:
        return spawn_vehicle(state.id, cfg, rng)
    return state
