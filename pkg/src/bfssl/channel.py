"""Uplink channel: path loss, fading, Shannon rate, upload cost and the CRC error model."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, UnreachableLinkError


def dbm_to_watt(dbm):
    return 10.0 ** ((np.asarray(dbm, dtype=float) - 30.0) / 10.0)


@dataclass(frozen=True)
class ChannelConfig:
    bandwidth: float = 2e6  # B^U, Hz
    noise_dbm_per_hz: float = -114.0  # N0, read as dBm/Hz
    shadow_std_db: float = 8.0  # xi
    waterfall_m: float = 0.023
    error_cap: float = 0.2  # epsilon_tau
    model_bits: float = 11.2e6  # Z
    p_min_dbm: float = 5.0
    p_max_dbm: float = 200.0
    interferer_count: int = 0
    interferer_power: float = 1.0  # W
    interferer_distance: float = 50.0  # m

    def __post_init__(self):
        if not self.bandwidth > 0:
            raise ConfigError("bandwidth must be positive")
        if not 0 < self.error_cap < 1:
            raise ConfigError("error_cap must lie in (0, 1)")
        if not self.p_min_dbm < self.p_max_dbm:
            raise ConfigError("p_min must be below p_max")
        if not self.waterfall_m > 0:
            raise ConfigError("waterfall threshold m must be positive")
        if not self.model_bits > 0:
            raise ConfigError("model size Z must be positive")
        if self.interferer_count < 0 or self.interferer_power < 0:
            raise ConfigError("interferer count/power must be non-negative")
        if not self.interferer_distance > 0:
            raise ConfigError("interferer_distance must be positive")

    @property
    def noise_psd(self) -> float:
        """N0 in W/Hz."""
        return float(dbm_to_watt(self.noise_dbm_per_hz))

    @property
    def noise_power(self) -> float:
        return self.bandwidth * self.noise_psd

    @property
    def p_min(self) -> float:
        return float(dbm_to_watt(self.p_min_dbm))

    @property
    def p_max(self) -> float:
        return float(dbm_to_watt(self.p_max_dbm))


@dataclass(frozen=True)
class ChannelRealization:
    """Per-vehicle draws for one slot. All fields are arrays of length N."""

    path_loss: np.ndarray  # dB
    shadow: np.ndarray  # dB
    fast_fading: np.ndarray
    gain: np.ndarray  # h, linear
    interference: np.ndarray  # W

    @property
    def attenuation(self) -> np.ndarray:
        """Linear large-scale attenuation J = 10^(A/10) 10^(E/10)."""
        return 10.0 ** ((self.path_loss + self.shadow) / 10.0)

    @property
    def attenuation_db(self) -> np.ndarray:
        return self.path_loss + self.shadow


def path_loss_db(distance):
    return 128.1 + 37.6 * np.log10(np.asarray(distance, dtype=float) / 1000.0)


def realize_channel(distance, cfg: ChannelConfig, rng: np.random.Generator, fast_fading=None) -> ChannelRealization:
    """Draw shadowing, fast fading and interference for each distance.

    One interferer gain is drawn per vehicle whatever ``interferer_count`` is,
    so changing the count leaves every other draw in the stream untouched.
    """
    d = np.atleast_1d(np.asarray(distance, dtype=float))
    n = d.shape[0]
    pl = path_loss_db(d)
    shadow = rng.normal(0.0, cfg.shadow_std_db, n) if cfg.shadow_std_db > 0 else np.zeros(n)
    g = rng.exponential(1.0, n)
    if fast_fading is not None:
        g = np.broadcast_to(np.asarray(fast_fading, dtype=float), (n,)).copy()
    gain = g * 10.0 ** (-(pl + shadow) / 10.0)

    pl_int = path_loss_db(cfg.interferer_distance)
    sh_int = rng.normal(0.0, cfg.shadow_std_db, n) if cfg.shadow_std_db > 0 else np.zeros(n)
    g_int = rng.exponential(1.0, n)
    h_int = g_int * 10.0 ** (-(pl_int + sh_int) / 10.0)
    interference = cfg.interferer_count * cfg.interferer_power * h_int
    return ChannelRealization(pl, shadow, g, gain, interference)


def _sinr(p, h, interference, cfg):
    return np.asarray(p, dtype=float) * np.asarray(h, dtype=float) / (np.asarray(interference, dtype=float) + cfg.noise_power)


def transmission_rate(p, h, interference, beta, cfg: ChannelConfig):
    """Shannon rate beta * B * ln(1 + SINR), in bits/s (natural log, as in the model)."""
    return np.asarray(beta, dtype=float) * cfg.bandwidth * np.log1p(_sinr(p, h, interference, cfg))


def transmission_delay_energy(p, h, interference, beta, cfg: ChannelConfig):
    rate = transmission_rate(p, h, interference, beta, cfg)
    if np.any(rate <= 0):
        raise UnreachableLinkError("zero transmission rate; upload cannot complete")
    delay = cfg.model_bits / rate
    return delay, np.asarray(p, dtype=float) * delay


def error_probability(p, h, interference, cfg: ChannelConfig):
    p = np.asarray(p, dtype=float)
    h = np.asarray(h, dtype=float)
    x = cfg.waterfall_m * (np.asarray(interference, dtype=float) + cfg.noise_power) / (p * h)
    return -np.expm1(-x)


def p_tau(h, interference, cfg: ChannelConfig):
    """Transmit power at which the error probability equals the cap."""
    num = cfg.waterfall_m * (np.asarray(interference, dtype=float) + cfg.noise_power)
    return -num / (np.asarray(h, dtype=float) * math.log1p(-cfg.error_cap))


def success_indicator(p, h, interference, cfg: ChannelConfig, rng: np.random.Generator, eps=None):
    """Bernoulli(1 - eps) upload outcome; ``eps`` overrides the modelled error rate."""
    if eps is None:
        eps = error_probability(p, h, interference, cfg)
    eps = np.atleast_1d(np.asarray(eps, dtype=float))
    return (rng.random(eps.shape) >= eps).astype(int)
