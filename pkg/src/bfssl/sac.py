"""Soft actor-critic for the per-slot power/frequency allocation.

The policy acts in a normalised box [-1, 1]^(2N) (tanh-squashed Gaussian);
the first N coordinates map affinely to transmit powers, the last N to CPU
frequencies. Log-probabilities refer to the normalised action, so the usual
target entropy of -dim(action) applies.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ArchitectureMismatch, ConfigError, NonFiniteOutput
from .nn import Mlp, make_optimizer

log = logging.getLogger(__name__)

_HALF_LOG_2PI = 0.5 * math.log(2 * math.pi)


@dataclass(frozen=True)
class SacConfig:
    hidden: tuple = (512, 512, 512, 512)
    gamma: float = 0.99
    delta: float = 0.001  # soft-update rate for both targets
    lr: float = 3e-4
    alpha_lr: float = 3e-4
    optimizer: str = "sgd"
    init_alpha: float = 1.0
    target_entropy: float | None = None  # None -> -dim(action)
    batch_size: int = 256
    capacity: int = 100_000
    update_every: int = 2  # K_u, episodes
    target_every: int = 80  # K_t, update iterations
    steps_per_update: int | None = None  # None -> one per slot collected since the last update
    log_std_min: float = -20.0
    log_std_max: float = 2.0
    penalty_power: float = 0.05  # theta_1
    penalty_iters: float = 5e-5  # theta_2
    reward_scale: float = 1.0  # applied to stored rewards only
    reward_transform: str = "linear"  # or "symlog"; learning signal only
    fading_log_span: float = 15.0  # log10 attenuation mapped onto [0, 1]
    velocity_scale: float = 150.0  # km/h

    def __post_init__(self):
        if not 0.0 <= self.gamma <= 1.0:
            raise ConfigError("gamma must lie in [0, 1]")
        if not 0.0 < self.delta <= 1.0:
            raise ConfigError("delta must lie in (0, 1]")
        if self.batch_size < 1 or self.capacity < 1:
            raise ConfigError("batch_size and capacity must be positive")
        if self.update_every < 1 or self.target_every < 1:
            raise ConfigError("update cadences must be >= 1")
        if not self.init_alpha > 0:
            raise ConfigError("init_alpha must be positive")
        if self.optimizer not in ("sgd", "adam"):
            raise ConfigError(f"unknown optimizer {self.optimizer!r}")
        if self.reward_transform not in ("linear", "symlog"):
            raise ConfigError(f"unknown reward_transform {self.reward_transform!r}")
        if not self.log_std_min < self.log_std_max:
            raise ConfigError("log_std_min must be below log_std_max")


# --- state / action types ---------------------------------------------------

@dataclass(frozen=True)
class SacState:
    fading: np.ndarray  # linear attenuation J per vehicle
    velocities: np.ndarray  # km/h

    def __post_init__(self):
        if len(self.fading) != len(self.velocities):
            raise ValueError("fading and velocities must have equal length")
        if not (np.all(np.isfinite(self.fading)) and np.all(np.isfinite(self.velocities))):
            raise ValueError("state entries must be finite")

    def __len__(self):
        return 2 * len(self.fading)

    def features(self, cfg: SacConfig) -> np.ndarray:
        fad = 1.0 - np.log10(np.asarray(self.fading, dtype=float)) / cfg.fading_log_span
        vel = np.asarray(self.velocities, dtype=float) / cfg.velocity_scale
        return np.concatenate([fad, vel])


@dataclass(frozen=True)
class ActionBounds:
    p_min: float
    p_max: float
    f_min: float
    f_max: float

    def to_physical(self, a):
        """Map normalised actions (..., 2N) in [-1, 1] to (powers, frequencies)."""
        a = np.asarray(a, dtype=float)
        n = a.shape[-1] // 2
        u = 0.5 * (np.clip(a, -1.0, 1.0) + 1.0)
        p = self.p_min + u[..., :n] * (self.p_max - self.p_min)
        f = self.f_min + u[..., n:] * (self.f_max - self.f_min)
        return p, f

    def to_normalized(self, powers, freqs):
        p = (np.asarray(powers, dtype=float) - self.p_min) / (self.p_max - self.p_min)
        f = (np.asarray(freqs, dtype=float) - self.f_min) / (self.f_max - self.f_min)
        return np.concatenate([p, f], axis=-1) * 2.0 - 1.0


@dataclass(frozen=True)
class SacAction:
    powers: np.ndarray
    frequencies: np.ndarray
    normalized: np.ndarray  # tanh(raw), in [-1, 1]
    raw: np.ndarray | None = None  # pre-squash sample


@dataclass(frozen=True)
class Transition:
    state: SacState
    action: SacAction
    reward: float
    next_state: SacState

    def __post_init__(self):
        if not math.isfinite(self.reward):
            raise ValueError(f"non-finite reward {self.reward}")


class ReplayBuffer:
    """Fixed-capacity ring store of feature-encoded transitions."""

    def __init__(self, capacity: int, state_dim: int, action_dim: int):
        self.capacity = int(capacity)
        self.states = np.zeros((capacity, state_dim))
        self.actions = np.zeros((capacity, action_dim))
        self.rewards = np.zeros(capacity)
        self.next_states = np.zeros((capacity, state_dim))
        self.cursor = 0
        self.size = 0

    def __len__(self):
        return self.size

    def add(self, s, a, r, s2):
        i = self.cursor
        self.states[i] = s
        self.actions[i] = a
        self.rewards[i] = r
        self.next_states[i] = s2
        self.cursor = (i + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def sample(self, batch_size: int, rng: np.random.Generator):
        if self.size == 0:
            raise ValueError("cannot sample from an empty buffer")
        idx = rng.choice(self.size, size=min(batch_size, self.size), replace=False)
        return self.states[idx], self.actions[idx], self.rewards[idx], self.next_states[idx]


# --- reward -----------------------------------------------------------------

def reward(cost: float, p_stars, iteration_counts, penalties=(0.05, 5e-5), p_min: float = 0.0) -> float:
    th1, th2 = penalties
    return float(-(cost + th1 * np.sum(np.asarray(p_stars) - p_min)) + th2 * np.sum(iteration_counts))


def learning_signal(r: float, cfg: SacConfig) -> float:
    """Scaled (and optionally symlog-compressed) reward stored for learning.

    Next states do not depend on the action here, so any increasing map keeps
    the per-state ranking of actions intact.
    """
    x = r * cfg.reward_scale
    if cfg.reward_transform == "symlog":
        x = math.copysign(math.log1p(abs(x)), x)
    return x


# --- policy -----------------------------------------------------------------

def _softplus(x):
    return np.logaddexp(0.0, x)


def log1m_tanh2(u):
    """log(1 - tanh(u)^2), evaluated without cancellation."""
    return 2.0 * (math.log(2.0) - u - _softplus(-2.0 * u))


def policy_head(actor: Mlp, x, cfg: SacConfig):
    out, cache = actor.forward(x)
    if not np.all(np.isfinite(out)):
        raise NonFiniteOutput(f"actor produced non-finite output; max |w| = "
                              f"{max(np.max(np.abs(w)) for w in actor.weights):.3g}")
    dim = out.shape[1] // 2
    mean = out[:, :dim]
    raw_ls = out[:, dim:]
    log_std = np.clip(raw_ls, cfg.log_std_min, cfg.log_std_max)
    inside = (raw_ls >= cfg.log_std_min) & (raw_ls <= cfg.log_std_max)
    return mean, log_std, inside, cache


def squashed_log_prob(u, mean, log_std):
    """Log-density of a = tanh(u) where u ~ N(mean, exp(log_std)^2), summed over dimensions."""
    z = (u - mean) / np.exp(log_std)
    return np.sum(-0.5 * z * z - log_std - _HALF_LOG_2PI - log1m_tanh2(u), axis=-1)


def sample_policy(actor: Mlp, x, cfg: SacConfig, rng: np.random.Generator, deterministic=False):
    """Return (a, logp, u, noise, (mean, log_std, inside, cache)) for a feature batch ``x``."""
    mean, log_std, inside, cache = policy_head(actor, x, cfg)
    if deterministic:
        noise = np.zeros_like(mean)
    else:
        noise = rng.standard_normal(mean.shape)
    u = mean + np.exp(log_std) * noise
    a = np.tanh(u)
    logp = squashed_log_prob(u, mean, log_std)
    return a, logp, u, noise, (mean, log_std, inside, cache)


def select_action(state: SacState, actor: Mlp, bounds: ActionBounds, cfg: SacConfig,
                  rng: np.random.Generator | None = None, deterministic: bool = False):
    x = state.features(cfg)[None, :]
    if x.shape[1] != actor.sizes[0]:
        raise ArchitectureMismatch(f"state width {x.shape[1]} != actor input {actor.sizes[0]}")
    a, logp, u, _, _ = sample_policy(actor, x, cfg, rng, deterministic=deterministic)
    p, f = bounds.to_physical(a[0])
    return SacAction(p, f, a[0], u[0]), float(logp[0])


# --- networks ---------------------------------------------------------------

def make_actor(state_dim, action_dim, hidden, rng):
    return Mlp([state_dim, *hidden, 2 * action_dim], rng=rng, out_scale=1e-3)


def make_critic(state_dim, action_dim, hidden, rng):
    return Mlp([state_dim + action_dim, *hidden, 1], rng=rng, out_scale=1e-3)


def q_value(critic: Mlp, s, a):
    return critic(np.concatenate([s, a], axis=1))[:, 0]


def critic_target(s2, r, actor: Mlp, targets, alpha: float, gamma: float, cfg: SacConfig, rng):
    a2, logp2, *_ = sample_policy(actor, s2, cfg, rng)
    q = np.minimum(q_value(targets[0], s2, a2), q_value(targets[1], s2, a2))
    return np.asarray(r, dtype=float) + gamma * (q - alpha * logp2)


def critic_loss_grad(critic: Mlp, s, a, y):
    """Mean squared TD error and its parameter gradients."""
    q, cache = critic.forward(np.concatenate([s, a], axis=1))
    diff = q[:, 0] - y
    loss = float(np.mean(diff**2))
    grads, _ = critic.backward(cache, (2.0 / len(y)) * diff[:, None])
    return loss, grads


def update_critics(s, a, y, critics, optimizers, lr=None):
    losses = []
    for net, opt in zip(critics, optimizers):
        loss, grads = critic_loss_grad(net, s, a, y)
        opt.step(net.params, grads, lr)
        losses.append(loss)
    return losses


def actor_loss_grad(actor: Mlp, critics, s, alpha: float, cfg: SacConfig, rng, noise=None):
    """Loss mean(alpha log pi - min Q) with reparameterised actions; critics are held fixed.

    Returns (loss, actor gradients, log-probabilities of the sampled actions).
    """
    mean, log_std, inside, cache = policy_head(actor, s, cfg)
    if noise is None:
        noise = rng.standard_normal(mean.shape)
    std = np.exp(log_std)
    u = mean + std * noise
    a = np.tanh(u)
    logp = squashed_log_prob(u, mean, log_std)

    sa = np.concatenate([s, a], axis=1)
    q1, c1 = critics[0].forward(sa)
    q2, c2 = critics[1].forward(sa)
    use1 = q1[:, 0] <= q2[:, 0]
    qmin = np.where(use1, q1[:, 0], q2[:, 0])
    m = len(s)
    seed = np.ones((m, 1)) / m
    _, dx1 = critics[0].backward(c1, seed * use1[:, None])
    _, dx2 = critics[1].backward(c2, seed * (~use1)[:, None])
    dq_da = (dx1 + dx2)[:, s.shape[1]:]

    # dlogp/du = 2 tanh(u); d log p / d log_std has a direct -1 term
    dl_du = alpha * 2.0 * a / m - dq_da * (1.0 - a * a)
    d_mean = dl_du
    d_ls = (dl_du * std * noise - alpha / m) * inside
    loss = float(np.mean(alpha * logp - qmin))
    grads, _ = actor.backward(cache, np.concatenate([d_mean, d_ls], axis=1))
    return loss, grads, logp


def update_actor(actor, critics, s, alpha, cfg, optimizer, rng, lr=None):
    loss, grads, logp = actor_loss_grad(actor, critics, s, alpha, cfg, rng)
    optimizer.step(actor.params, grads, lr)
    return loss, logp


def update_alpha(log_alpha: float, logp, target_entropy: float, lr: float) -> float:
    """One descent step on mean(-alpha (log pi + H)) taken in log(alpha)."""
    alpha = math.exp(log_alpha)
    grad = -alpha * float(np.mean(np.asarray(logp) + target_entropy))
    return log_alpha - lr * grad


def soft_update(target: Mlp, source: Mlp, delta: float):
    if not target.same_architecture(source):
        raise ArchitectureMismatch(f"target {target.sizes} vs source {source.sizes}")
    for pt, ps in zip(target.params, source.params):
        pt *= 1.0 - delta
        pt += delta * ps


# --- agent bundle -----------------------------------------------------------

@dataclass
class SacAgent:
    cfg: SacConfig
    n_vehicles: int
    rng: np.random.Generator
    actor: Mlp = field(init=False)
    critics: list = field(init=False)
    targets: list = field(init=False)
    log_alpha: float = field(init=False)
    updates: int = field(init=False, default=0)

    def __post_init__(self):
        sd = ad = 2 * self.n_vehicles
        h = self.cfg.hidden
        self.actor = make_actor(sd, ad, h, self.rng)
        self.critics = [make_critic(sd, ad, h, self.rng) for _ in range(2)]
        self.targets = [c.copy() for c in self.critics]
        self.log_alpha = math.log(self.cfg.init_alpha)
        self.actor_opt = make_optimizer(self.cfg.optimizer, self.cfg.lr)
        self.critic_opts = [make_optimizer(self.cfg.optimizer, self.cfg.lr) for _ in range(2)]
        self.buffer = ReplayBuffer(self.cfg.capacity, sd, ad)

    @property
    def alpha(self) -> float:
        return math.exp(self.log_alpha)

    @property
    def target_entropy(self) -> float:
        te = self.cfg.target_entropy
        return -float(2 * self.n_vehicles) if te is None else te

    def store(self, state: SacState, action: SacAction, r: float, next_state: SacState):
        Transition(state, action, r, next_state)  # validates
        self.buffer.add(state.features(self.cfg), action.normalized, learning_signal(r, self.cfg),
                        next_state.features(self.cfg))

    def update_step(self):
        """One gradient iteration on alpha, actor and critics; refreshes targets every K_t iterations."""
        cfg = self.cfg
        s, a, r, s2 = self.buffer.sample(cfg.batch_size, self.rng)
        alpha = self.alpha
        y = critic_target(s2, r, self.actor, self.targets, alpha, cfg.gamma, cfg, self.rng)
        a_loss, logp = update_actor(self.actor, self.critics, s, alpha, cfg, self.actor_opt, self.rng)
        self.log_alpha = update_alpha(self.log_alpha, logp, self.target_entropy, cfg.alpha_lr)
        c_losses = update_critics(s, a, y, self.critics, self.critic_opts)
        self.updates += 1
        if self.updates % cfg.target_every == 0:
            for t, c in zip(self.targets, self.critics):
                soft_update(t, c, cfg.delta)
        return {"actor": a_loss, "critic1": c_losses[0], "critic2": c_losses[1], "alpha": self.alpha}
