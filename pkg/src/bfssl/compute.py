"""On-board compute model (DVFS power, per-iteration delay/energy, iteration budget)."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import BoundsError, ConfigError

_REL_TOL = 1e-9


@dataclass(frozen=True)
class ComputeConfig:
    kappa: float = 1e-27
    cycles_per_round: float = 1e7  # |D_data| * r_cyc
    round_duration: float = 0.5  # T
    max_trans_delay: float = 0.02  # t_max^Trans
    f_min: float = 5e7
    f_max: float = 4e8

    def __post_init__(self):
        if not self.f_min < self.f_max:
            raise ConfigError("f_min must be below f_max")
        if not 0 < self.max_trans_delay < self.round_duration:
            raise ConfigError("need 0 < max_trans_delay < round_duration")
        if not self.cycles_per_round > 0:
            raise ConfigError("cycles_per_round must be positive")

    @property
    def training_window(self) -> float:
        return self.round_duration - self.max_trans_delay


def _check_range(f, cfg: ComputeConfig):
    f = np.asarray(f, dtype=float)
    lo = cfg.f_min * (1 - _REL_TOL)
    hi = cfg.f_max * (1 + _REL_TOL)
    if np.any(f < lo) or np.any(f > hi) or not np.all(np.isfinite(f)):
        raise BoundsError(f"CPU frequency outside [{cfg.f_min:g}, {cfg.f_max:g}] Hz: {f}")
    return f


def compute_power(f, cfg: ComputeConfig):
    f = _check_range(f, cfg)
    return cfg.kappa * f**3


def compute_delay(f, cfg: ComputeConfig):
    return cfg.cycles_per_round / np.asarray(f, dtype=float)


def compute_energy_per_iter(f, cfg: ComputeConfig):
    f = _check_range(f, cfg)
    return cfg.kappa * f**2 * cfg.cycles_per_round


def iteration_count(f, cfg: ComputeConfig):
    """Local iterations that fit in the training window, minus one, floored at zero."""
    f = _check_range(f, cfg)
    n_floor = np.floor(cfg.training_window / compute_delay(f, cfg))
    out = np.maximum(n_floor - 1, 0).astype(int)
    return int(out) if out.ndim == 0 else out


def frequency_utility(f, cfg: ComputeConfig):
    return 1.0 / compute_energy_per_iter(f, cfg)
