"""Episode/slot simulation loop: mobility, channel, allocation, local SSL, upload, aggregation, SAC."""
from __future__ import annotations

import csv
import dataclasses
import json
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import aggregation as agg
from . import allocation as al
from . import channel as ch
from . import checkpoint
from . import compute as cp
from . import mobility as mob
from . import sac
from . import simco
from .config import RunConfig
from .errors import ArchitectureMismatch, EmptyRoundError, NonFiniteOutput
from .pso import pso_optimize, positions_to_action

log = logging.getLogger(__name__)

STREAMS = ("mobility", "channel", "success", "ssl", "sac")
BASELINES = ("pso", "uniform-agg", "drop-agg", "random-alloc")


def make_streams(seed: int, purpose: int = 0) -> dict:
    """Independent named generators spawned from one master seed."""
    children = np.random.SeedSequence([int(seed), int(purpose)]).spawn(len(STREAMS))
    return {name: np.random.default_rng(s) for name, s in zip(STREAMS, children)}


def slot_to_round(k: int, t: int, s_max: int) -> int:
    if not (k >= 1 and 1 <= t <= s_max):
        raise ValueError(f"slot {t} outside [1, {s_max}] or episode {k} < 1")
    return (k - 1) * s_max + t


@dataclass(frozen=True)
class MetricsRow:
    episode: int
    slot: int
    round: int
    objective: float
    total_energy: float
    max_delay: float
    reward: float
    sum_iterations: int
    success_count: int
    mean_blur: float
    global_loss: float
    mean_utility: float


METRIC_FIELDS = tuple(f.name for f in dataclasses.fields(MetricsRow))


def write_metrics_csv(rows, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(METRIC_FIELDS)
        for row in rows:
            w.writerow([repr(getattr(row, k)) for k in METRIC_FIELDS])


def read_metrics_csv(path):
    with open(path) as fh:
        r = csv.DictReader(fh)
        return [{k: float(v) for k, v in rec.items()} for rec in r]


@dataclass
class SlotOutcome:
    reward: float
    value: float
    breakdown: al.CostBreakdown
    betas: np.ndarray
    p_star: np.ndarray


class Simulation:
    """Mutable world state for one run."""

    def __init__(self, cfg: RunConfig, streams: dict):
        self.cfg = cfg
        self.rng = streams
        self.bounds = sac.ActionBounds(cfg.channel.p_min, cfg.channel.p_max,
                                       cfg.compute.f_min, cfg.compute.f_max)
        d = cfg.data
        ssl_rng = streams["ssl"]
        self.encoder = simco.ToyEncoder(cfg.simco, ssl_rng)
        self.global_params = self.encoder.get_params()
        _, _, self.centers = simco.make_clusters(1, cfg.simco.input_dim, ssl_rng,
                                                 n_clusters=d.n_clusters, separation=d.separation)
        eval_rng = np.random.default_rng(d.eval_seed)
        self.eval_x, _, _ = simco.make_clusters(d.eval_samples, cfg.simco.input_dim, eval_rng,
                                                spread=d.spread, centers=self.centers)
        self.vehicles = []
        self.local_data = {}
        self.chan = None
        self.lr = cfg.simco.lr

    # world --------------------------------------------------------------
    def _vehicle_data(self, road: int):
        d = self.cfg.data
        rng = self.rng["ssl"]
        n = d.samples_per_vehicle
        home = road % len(self.centers)
        labels = np.where(rng.random(n) < d.home_share, home, rng.integers(len(self.centers), size=n))
        return self.centers[labels] + rng.normal(0.0, d.spread, (n, self.centers.shape[1]))

    def reset_vehicles(self):
        rng = self.rng["mobility"]
        self.vehicles = [mob.spawn_vehicle(i, self.cfg.mobility, rng) for i in range(self.cfg.n_vehicles)]
        self.local_data = {v.id: self._vehicle_data(v.road) for v in self.vehicles}
        self.chan = self._draw_channel()

    def _draw_channel(self):
        dist = [mob.distance_to_bs(v, self.cfg.mobility) for v in self.vehicles]
        return ch.realize_channel(dist, self.cfg.channel, self.rng["channel"])

    def advance(self):
        mcfg = self.cfg.mobility
        rng = self.rng["mobility"]
        moved = []
        for v in self.vehicles:
            stepped = mob.step_vehicle(v, mcfg, rng)
            nv = mob.respawn_if_exited(stepped, mcfg, rng)
            if nv is not stepped:
                self.local_data[nv.id] = self._vehicle_data(nv.road)
            moved.append(nv)
        self.vehicles = moved
        self.chan = self._draw_channel()

    def state(self) -> sac.SacState:
        return sac.SacState(self.chan.attenuation.copy(), np.array([v.velocity for v in self.vehicles]))

    # allocation ---------------------------------------------------------
    def evaluate(self, powers, freqs) -> SlotOutcome:
        cfg = self.cfg
        h, inter = self.chan.gain, self.chan.interference
        notes = al.notations(powers, h, inter, freqs, cfg.weights, cfg.channel, cfg.compute)
        betas = al.kkt_beta(notes, freqs)
        value, br = al.objective(al.AllocationAction(powers, freqs, betas), h, inter,
                                 cfg.weights, cfg.channel, cfg.compute)
        ps = al.p_star(h, inter, cfg.channel, check=False)
        r = sac.reward(value, ps, br.iterations, (cfg.sac.penalty_power, cfg.sac.penalty_iters),
                       cfg.channel.p_min)
        return SlotOutcome(r, value, br, betas, ps)

    def pso_action(self):
        pcfg = self.cfg.pso

        def neg_reward(x):
            p, f = positions_to_action(x, self.bounds, pcfg)
            return -self.evaluate(p, f).reward

        res = pso_optimize(neg_reward, 2 * self.cfg.n_vehicles, pcfg, self.rng["sac"])
        return positions_to_action(res.position, self.bounds, pcfg)

    # learning -----------------------------------------------------------
    def local_round(self, iterations, round_idx: int, total_rounds: int):
        cfg = self.cfg
        models, vels = [], []
        lr = simco.stepped_cosine_lr(round_idx - 1, total_rounds, cfg.simco)
        for v, n_it in zip(self.vehicles, iterations):
            vels.append(v.velocity)
            if not cfg.ssl_enabled:
                models.append(self.global_params)
                continue
            data = self.local_data[v.id]
            if v.velocity > cfg.data.blur_trigger:
                data, _ = agg.corrupt_fraction(data, cfg.data.corrupt_fraction, self.rng["ssl"],
                                               cfg.data.corrupt_blend, cfg.data.corrupt_noise)
            if cfg.max_local_iters is not None:
                n_it = min(int(n_it), cfg.max_local_iters)
            params, _ = simco.local_train(self.global_params, data, int(n_it), self.encoder,
                                          self.rng["ssl"], lr=lr)
            models.append(params)
        return models, np.array(vels)

    def aggregate(self, models, velocities, successes):
        cfg = self.cfg
        blurs = agg.blur_level(velocities, cfg.blur_coeff)
        records = [agg.BlurRecord(v.id, float(b), int(c)) for v, b, c in zip(self.vehicles, blurs, successes)]
        try:
            if cfg.aggregator == "bfssl":
                self.global_params = agg.aggregate_bfssl(models, records)
            elif cfg.aggregator == "uniform":
                self.global_params = agg.aggregate_uniform(models, successes)
            else:
                self.global_params = agg.aggregate_drop_blurred(models, records, velocities, cfg.drop_threshold)
        except EmptyRoundError as exc:
            log.info("empty round (%s); global model carried over", exc)
        return blurs

    def global_loss(self) -> float:
        if not self.cfg.ssl_enabled:
            return 0.0
        return simco.evaluate_loss(self.global_params, self.encoder, self.eval_x, seed=self.cfg.data.eval_seed)


@dataclass
class RunResult:
    global_params: np.ndarray
    agent: sac.SacAgent | None
    rows: list


def _choose(sim: Simulation, allocator: str, state, agent, actor, deterministic: bool):
    cfg = sim.cfg
    n = cfg.n_vehicles
    if allocator == "sac":
        net = actor if actor is not None else agent.actor
        act, _ = sac.select_action(state, net, sim.bounds, cfg.sac, sim.rng["sac"], deterministic=deterministic)
        return act.powers, act.frequencies, act.normalized
    if allocator == "random":
        a = sim.rng["sac"].uniform(-1.0, 1.0, 2 * n)
    elif allocator == "fixed":
        a = np.full(2 * n, cfg.fixed_action)
    else:
        p, f = sim.pso_action()
        return p, f, np.clip(sim.bounds.to_normalized(p, f), -1.0, 1.0)
    p, f = sim.bounds.to_physical(a)
    return p, f, a


def _loop(cfg: RunConfig, streams, episodes: int, slots: int, agent=None, actor=None,
          learn: bool = False, deterministic: bool = False):
    sim = Simulation(cfg, streams)
    total_rounds = episodes * slots
    rows = []
    sim.reset_vehicles()
    for k in range(1, episodes + 1):
        if k > 1 and cfg.reset_each_episode:
            sim.reset_vehicles()
        for t in range(1, slots + 1):
            r_idx = slot_to_round(k, t, slots)
            state = sim.state()
            p, f, a_norm = _choose(sim, cfg.allocator, state, agent, actor, deterministic)
            out = sim.evaluate(p, f)
            models, vels = sim.local_round(out.breakdown.iterations, r_idx, total_rounds)
            if cfg.force_success:
                succ = np.ones(cfg.n_vehicles, dtype=int)
            else:
                succ = ch.success_indicator(p, sim.chan.gain, sim.chan.interference, cfg.channel,
                                            sim.rng["success"])
            blurs = sim.aggregate(models, vels, succ)
            loss = sim.global_loss()
            sim.advance()
            if learn and agent is not None:
                act = sac.SacAction(p, f, a_norm)
                agent.store(state, act, out.reward, sim.state())
            row = MetricsRow(k, t, r_idx, float(out.value), out.breakdown.energy_sum, out.breakdown.max_delay,
                             float(out.reward), int(np.sum(out.breakdown.iterations)), int(np.sum(succ)),
                             float(np.mean(blurs)), float(loss),
                             float(np.mean(cp.frequency_utility(f, cfg.compute))))
            if not all(np.isfinite(getattr(row, k_)) for k_ in METRIC_FIELDS):
                raise NonFiniteOutput(f"non-finite metrics at episode {k} slot {t}: {row}")
            rows.append(row)
        if learn and agent is not None and k % cfg.sac.update_every == 0 and len(agent.buffer):
            for _ in range(cfg.sac.steps_per_update or cfg.sac.update_every * slots):
                agent.update_step()
    return sim, rows


def run_training(cfg: RunConfig, out_dir=None) -> RunResult:
    streams = make_streams(cfg.seed)
    agent = sac.SacAgent(cfg.sac, cfg.n_vehicles, streams["sac"]) if cfg.allocator == "sac" else None
    sim, rows = _loop(cfg, streams, cfg.episodes, cfg.slots, agent=agent, learn=True)
    result = RunResult(sim.global_params, agent, rows)
    if out_dir is not None:
        _emit(cfg, result, Path(out_dir), mode="train")
    return result


def run_test(cfg: RunConfig, actor=None, out_dir=None) -> list:
    """Replay a fixed policy for ``cfg.test_slots`` slots without any learning.

    With an actor the mean action is used; otherwise ``cfg.allocator`` decides.
    """
    streams = make_streams(cfg.seed, purpose=1)
    if actor is not None:
        expected = 2 * cfg.n_vehicles
        if actor.sizes[0] != expected or actor.sizes[-1] != 2 * expected:
            raise ArchitectureMismatch(f"actor {actor.sizes} does not fit {cfg.n_vehicles} vehicles")
        cfg = dataclasses.replace(cfg, allocator="sac")
    episodes = -(-cfg.test_slots // cfg.slots)
    _, rows = _loop(cfg, streams, episodes, cfg.slots, actor=actor, deterministic=True)
    rows = rows[:cfg.test_slots]
    if out_dir is not None:
        _emit(cfg, RunResult(None, None, rows), Path(out_dir), mode="test")
    return rows


def baseline_config(cfg: RunConfig, which: str) -> RunConfig:
    if which == "pso":
        return dataclasses.replace(cfg, allocator="pso")
    if which == "random-alloc":
        return dataclasses.replace(cfg, allocator="random")
    if which == "uniform-agg":
        return dataclasses.replace(cfg, aggregator="uniform")
    if which == "drop-agg":
        return dataclasses.replace(cfg, aggregator="drop")
    raise ValueError(f"unknown baseline {which!r}; choose from {BASELINES}")


def run_baseline(cfg: RunConfig, which: str, out_dir=None) -> RunResult:
    bcfg = baseline_config(cfg, which)
    result = run_training(bcfg)
    if out_dir is not None:
        _emit(bcfg, result, Path(out_dir), mode=f"baseline:{which}")
    return result


def summarize(rows, slots: int) -> dict:
    rewards = np.array([r.reward for r in rows])
    n_ep = len(rows) // slots if slots else 0
    last = rewards[-min(len(rewards), 10 * slots):]
    return {
        "rows": len(rows),
        "mean_reward": float(rewards.mean()) if len(rows) else None,
        "last10_mean_reward": float(last.mean()) if len(rows) else None,
        "mean_objective": float(np.mean([r.objective for r in rows])) if rows else None,
        "objective_var": float(np.var([r.objective for r in rows])) if rows else None,
        "final_global_loss": rows[-1].global_loss if rows else None,
        "episodes": n_ep,
    }


def _emit(cfg: RunConfig, result: RunResult, out: Path, mode: str):
    out.mkdir(parents=True, exist_ok=True)
    write_metrics_csv(result.rows, out / "metrics.csv")
    summary = {"mode": mode, "config_hash": cfg.digest(), "seed": cfg.seed, **summarize(result.rows, cfg.slots)}
    (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    if result.agent is not None:
        a = result.agent
        checkpoint.save(out / "agent.bin", {"actor": a.actor, "critic1": a.critics[0], "critic2": a.critics[1],
                                            "target1": a.targets[0], "target2": a.targets[1]},
                        meta={"log_alpha": a.log_alpha, "config_hash": cfg.digest()})
    if result.global_params is not None:
        checkpoint.save(out / "global.bin", {"global": result.global_params}, meta={"config_hash": cfg.digest()})
