"""Run configuration and its flat ``section.key = value`` text format."""
from __future__ import annotations

import ast
import dataclasses
import hashlib
import json
from dataclasses import dataclass, field

from .allocation import ObjectiveWeights
from .channel import ChannelConfig
from .compute import ComputeConfig
from .errors import ConfigError
from .mobility import MobilityConfig
from .pso import PsoConfig
from .sac import SacConfig
from .simco import SimcoConfig

ALLOCATORS = ("sac", "random", "pso", "fixed")
AGGREGATORS = ("bfssl", "uniform", "drop")


@dataclass(frozen=True)
class DataConfig:
    samples_per_vehicle: int = 128
    eval_samples: int = 128
    n_clusters: int = 4
    separation: float = 3.0
    spread: float = 1.0
    home_share: float = 0.75  # fraction of a vehicle's samples from its road's cluster
    corrupt_fraction: float = 0.2
    blur_trigger: float = 100.0  # km/h above which collected samples are blurred
    corrupt_blend: float = 0.9
    corrupt_noise: float = 0.1
    eval_seed: int = 12345


@dataclass(frozen=True)
class RunConfig:
    n_vehicles: int = 2
    episodes: int = 200  # K_max
    slots: int = 20  # S_max
    seed: int = 0
    test_slots: int = 50
    allocator: str = "sac"
    aggregator: str = "bfssl"
    fixed_action: float = 0.0  # normalised action used by the 'fixed' allocator
    blur_coeff: float = 0.01
    drop_threshold: float = 100.0
    ssl_enabled: bool = True
    max_local_iters: int | None = None  # optional cap on local SGD steps per slot
    force_success: bool = False
    reset_each_episode: bool = True
    mobility: MobilityConfig = field(default_factory=lambda: MobilityConfig(spawn_radius=50.0, coverage_radius=100.0))
    channel: ChannelConfig = field(default_factory=lambda: ChannelConfig(p_max_dbm=30.0))
    compute: ComputeConfig = field(default_factory=ComputeConfig)
    weights: ObjectiveWeights = field(default_factory=ObjectiveWeights)
    sac: SacConfig = field(default_factory=lambda: SacConfig(
        hidden=(64, 64), optimizer="adam", lr=1e-3, alpha_lr=1e-3, init_alpha=0.1,
        batch_size=128, reward_transform="symlog"))
    simco: SimcoConfig = field(default_factory=SimcoConfig)
    pso: PsoConfig = field(default_factory=PsoConfig)
    data: DataConfig = field(default_factory=DataConfig)

    def __post_init__(self):
        if self.n_vehicles < 1 or self.episodes < 1 or self.slots < 1 or self.test_slots < 1:
            raise ConfigError("n_vehicles, episodes, slots and test_slots must be >= 1")
        if self.allocator not in ALLOCATORS:
            raise ConfigError(f"allocator must be one of {ALLOCATORS}")
        if self.aggregator not in AGGREGATORS:
            raise ConfigError(f"aggregator must be one of {AGGREGATORS}")
        if not -1.0 <= self.fixed_action <= 1.0:
            raise ConfigError("fixed_action must lie in [-1, 1]")

    def to_dict(self):
        return dataclasses.asdict(self)

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, default=str).encode()
        return hashlib.sha256(blob).hexdigest()


_SECTIONS = ("mobility", "channel", "compute", "weights", "sac", "simco", "pso", "data")


def _coerce(text: str):
    text = text.strip()
    low = text.lower()
    if low in ("true", "false"):
        return low == "true"
    if low in ("none", "null"):
        return None
    try:
        return ast.literal_eval(text)
    except (ValueError, SyntaxError):
        return text


def apply_overrides(cfg: RunConfig, values: dict) -> RunConfig:
    """Return a copy of ``cfg`` with dotted-key overrides; unknown keys raise ConfigError."""
    top = {}
    nested: dict[str, dict] = {}
    run_fields = {f.name for f in dataclasses.fields(RunConfig)}
    for key, val in values.items():
        parts = key.split(".")
        if parts[0] == "run":
            parts = parts[1:]
        if len(parts) == 1 and parts[0] in run_fields and parts[0] not in _SECTIONS:
            top[parts[0]] = val
        elif len(parts) == 2 and parts[0] in _SECTIONS:
            sub = getattr(cfg, parts[0])
            if parts[1] not in {f.name for f in dataclasses.fields(sub)}:
                raise ConfigError(f"unknown config key {key!r}")
            nested.setdefault(parts[0], {})[parts[1]] = val
        else:
            raise ConfigError(f"unknown config key {key!r}")
    try:
        for sec, kv in nested.items():
            sub = getattr(cfg, sec)
            for k, v in kv.items():
                if isinstance(getattr(sub, k), tuple) and isinstance(v, list):
                    kv[k] = tuple(v)
            top[sec] = dataclasses.replace(sub, **kv)
        return dataclasses.replace(cfg, **top)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def parse_config_text(text: str) -> dict:
    out = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, val = line.split("=", 1)
        key = key.strip()
        if key in out:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        out[key] = _coerce(val)
    return out


def load_config(path, base: RunConfig | None = None) -> RunConfig:
    with open(path) as fh:
        return apply_overrides(base or RunConfig(), parse_config_text(fh.read()))


def dump_config(cfg: RunConfig) -> str:
    lines = []
    for f in dataclasses.fields(cfg):
        val = getattr(cfg, f.name)
        if f.name in _SECTIONS:
            for g in dataclasses.fields(val):
                lines.append(f"{f.name}.{g.name} = {getattr(val, g.name)!r}")
        else:
            lines.append(f"{f.name} = {val!r}")
    return "\n".join(lines) + "\n"
