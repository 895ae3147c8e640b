"""Clipped-surrogate policy optimization on the shared approximators.

Gradients are computed analytically in the kernel backends and audited
against central finite differences (grad_check). The actor terms (surrogate
plus entropy bonus) and the critic term (0.5 * value MSE) are applied
through two Adam optimizers over the same parameter vector, which realizes
the separate actor and critic step sizes on a shared trunk.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import ConfigurationError, ContractError
from .policy import PolicyParams

EXPLORATION_MODES = ("entropy", "epsilon_greedy")


@dataclass
class PPOHyper:
    clip: float = 0.2
    epochs: int = 4
    minibatch: int = 64
    lr_actor: float = 5e-4
    lr_critic: float = 1e-3
    gamma: float = 0.99
    gae_lambda: float = 0.95
    entropy_coef: float = 0.01
    grad_clip: float = 0.5
    exploration: str = "entropy"
    eps_start: float = 0.2
    eps_end: float = 0.01
    eps_decay_episodes: int = 500
    # Raw GAE magnitudes carry the shaping scale into the surrogate, which
    # keeps the fixed entropy bonus meaningful at convergence; per-batch
    # rescaling is available for configs that want scale-free updates.
    normalize_adv: bool = False

    def __post_init__(self) -> None:
        if not 0.0 < self.clip < 1.0:
            raise ConfigurationError(f"clip must be in (0, 1), got {self.clip}")
        if not 0.0 < self.gamma <= 1.0:
            raise ConfigurationError(f"gamma must be in (0, 1], got {self.gamma}")
        if not 0.0 <= self.gae_lambda <= 1.0:
            raise ConfigurationError(f"gae_lambda must be in [0, 1], got {self.gae_lambda}")
        if self.epochs < 1 or self.minibatch < 1:
            raise ConfigurationError("epochs and minibatch must be >= 1")
        if min(self.lr_actor, self.lr_critic, self.entropy_coef, self.grad_clip) < 0.0:
            raise ConfigurationError("learning rates and coefficients must be >= 0")
        if self.exploration not in EXPLORATION_MODES:
            raise ConfigurationError(
                f"exploration must be one of {EXPLORATION_MODES}, got '{self.exploration}'"
            )


@dataclass
class Trajectory:
    """One agent's episode: step tuples for the update batch."""

    xs: list = field(default_factory=list)
    masks: list = field(default_factory=list)
    actions: list = field(default_factory=list)
    logps: list = field(default_factory=list)
    values: list = field(default_factory=list)
    rewards: list = field(default_factory=list)

    def append(self, x, mask, action, logp, value, reward) -> None:
        self.xs.append(np.asarray(x, dtype=np.float64))
        self.masks.append(np.asarray(mask, dtype=np.float64))
        self.actions.append(np.asarray(action, dtype=np.int64))
        self.logps.append(float(logp))
        self.values.append(float(value))
        self.rewards.append(float(reward))

    def __len__(self) -> int:
        return len(self.xs)


@dataclass
class UpdateStats:
    policy_loss: float
    value_loss: float
    entropy: float
    clip_fraction: float
    grad_norm: float
    n_samples: int
    n_minibatches: int


def compute_advantages(
    rewards: np.ndarray,
    values: np.ndarray,
    dones: np.ndarray,
    gamma: float,
    lam: float,
) -> tuple[np.ndarray, np.ndarray]:
    """Raw GAE advantages and returns over concatenated segments."""
    rewards = np.ascontiguousarray(rewards, dtype=np.float64)
    values = np.ascontiguousarray(values, dtype=np.float64)
    dones = np.ascontiguousarray(dones, dtype=np.bool_)
    if not (len(rewards) == len(values) == len(dones)):
        raise ContractError("rewards, values, dones must have equal length")
    if len(rewards) == 0:
        raise ContractError("cannot compute advantages of an empty batch")
    return kernels.gae(rewards, values, dones, gamma, lam)


def normalize_advantages(adv: np.ndarray) -> np.ndarray:
    """Zero mean, unit variance; degenerate batches collapse to zeros."""
    mean = adv.mean()
    std = adv.std()
    return (adv - mean) / (std + 1e-8)


def batch_from_trajectories(
    trajectories: list[Trajectory],
    gamma: float,
    lam: float,
) -> dict[str, np.ndarray]:
    """Concatenate per-agent episodes into one update batch.

    Each trajectory is closed with a terminal flag so the advantage
    recursion never leaks across agents.
    """
    live = [t for t in trajectories if len(t) > 0]
    if not live:
        raise ContractError("no non-empty trajectories to build a batch from")
    xs, masks, actions, logps, values, rewards, dones = [], [], [], [], [], [], []
    for traj in live:
        xs.extend(traj.xs)
        masks.extend(traj.masks)
        actions.extend(traj.actions)
        logps.extend(traj.logps)
        values.extend(traj.values)
        rewards.extend(traj.rewards)
        seg = np.zeros(len(traj), dtype=np.bool_)
        seg[-1] = True
        dones.extend(seg.tolist())
    rewards_arr = np.asarray(rewards)
    values_arr = np.asarray(values)
    dones_arr = np.asarray(dones, dtype=np.bool_)
    adv, ret = compute_advantages(rewards_arr, values_arr, dones_arr, gamma, lam)
    return {
        "x": np.ascontiguousarray(np.stack(xs)),
        "mask": np.ascontiguousarray(np.stack(masks)),
        "actions": np.ascontiguousarray(np.stack(actions)),
        "old_logp": np.asarray(logps),
        "adv": adv,
        "ret": ret,
    }


class Adam:
    """Flat-vector Adam with bias correction."""

    def __init__(self, size: int, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.m = np.zeros(size)
        self.v = np.zeros(size)
        self.t = 0
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps

    def step(self, params: np.ndarray, grads: np.ndarray, lr: float) -> None:
        self.t += 1
        kernels.adam_step(
            params, grads, self.m, self.v, self.t, lr, self.beta1, self.beta2, self.eps
        )


def _pack(gw1, gb1, gw2, gb2) -> np.ndarray:
    return np.concatenate([gw1.ravel(), gb1, gw2.ravel(), gb2])


def _clipped(grad: np.ndarray, max_norm: float) -> tuple[np.ndarray, float]:
    norm = float(np.sqrt(grad @ grad))
    if max_norm > 0.0 and norm > max_norm:
        return grad * (max_norm / norm), norm
    return grad, norm


class Learner:
    """Owns the optimizers for one policy network."""

    def __init__(self, params: PolicyParams, hyper: PPOHyper):
        self.params = params
        self.hyper = hyper
        self.opt_actor = Adam(len(params.flat))
        self.opt_critic = Adam(len(params.flat))
        self.update_count = 0

    def update(self, batch: dict[str, np.ndarray], rng: np.random.Generator) -> UpdateStats:
        return ppo_update(self.params, batch, self.hyper, rng, self.opt_actor, self.opt_critic)


def ppo_update(
    params: PolicyParams,
    batch: dict[str, np.ndarray],
    hyper: PPOHyper,
    rng: np.random.Generator,
    opt_actor: Adam,
    opt_critic: Adam,
) -> UpdateStats:
    """Epochs of shuffled minibatch steps on one batch; returns mean stats."""
    n = len(batch["x"])
    adv = normalize_advantages(batch["adv"]) if hyper.normalize_adv else batch["adv"]
    w1, b1, w2, b2 = params._split()
    stats = np.zeros(5)
    count = 0
    for _ in range(hyper.epochs):
        order = rng.permutation(n)
        for lo in range(0, n, hyper.minibatch):
            idx = order[lo : lo + hyper.minibatch]
            out = kernels.ppo_loss_grads(
                np.ascontiguousarray(batch["x"][idx]),
                w1, b1, w2, b2,
                np.ascontiguousarray(batch["mask"][idx]),
                params.n_heads,
                np.ascontiguousarray(batch["actions"][idx]),
                np.ascontiguousarray(batch["old_logp"][idx]),
                np.ascontiguousarray(adv[idx]),
                np.ascontiguousarray(batch["ret"][idx]),
                hyper.clip,
                hyper.entropy_coef,
            )
            g_pi = _pack(*out[0:4])
            g_v = _pack(*out[4:8])
            total_norm = float(np.sqrt((g_pi + g_v) @ (g_pi + g_v)))
            g_pi, _ = _clipped(g_pi, hyper.grad_clip)
            g_v, _ = _clipped(g_v, hyper.grad_clip)
            opt_actor.step(params.flat, g_pi, hyper.lr_actor)
            opt_critic.step(params.flat, g_v, hyper.lr_critic)
            stats += np.array([out[8], out[9], out[10], out[11], total_norm])
            count += 1
    stats /= max(1, count)
    return UpdateStats(
        policy_loss=float(stats[0]),
        value_loss=float(stats[1]),
        entropy=float(stats[2]),
        clip_fraction=float(stats[3]),
        grad_norm=float(stats[4]),
        n_samples=n,
        n_minibatches=count,
    )


def loss_value(params: PolicyParams, batch: dict[str, np.ndarray], clip: float, ent_coef: float) -> float:
    """Scalar objective the gradients belong to (for finite differences)."""
    w1, b1, w2, b2 = params._split()
    out = kernels.ppo_loss_grads(
        np.ascontiguousarray(batch["x"]), w1, b1, w2, b2,
        np.ascontiguousarray(batch["mask"]), params.n_heads,
        np.ascontiguousarray(batch["actions"]),
        np.ascontiguousarray(batch["old_logp"]),
        np.ascontiguousarray(batch["adv"]),
        np.ascontiguousarray(batch["ret"]),
        clip, ent_coef,
    )
    return float(out[8] + out[9] - ent_coef * out[10])


def analytic_grad(params: PolicyParams, batch: dict[str, np.ndarray], clip: float, ent_coef: float) -> np.ndarray:
    w1, b1, w2, b2 = params._split()
    out = kernels.ppo_loss_grads(
        np.ascontiguousarray(batch["x"]), w1, b1, w2, b2,
        np.ascontiguousarray(batch["mask"]), params.n_heads,
        np.ascontiguousarray(batch["actions"]),
        np.ascontiguousarray(batch["old_logp"]),
        np.ascontiguousarray(batch["adv"]),
        np.ascontiguousarray(batch["ret"]),
        clip, ent_coef,
    )
    return _pack(*out[0:4]) + _pack(*out[4:8])


def make_grad_batch(
    params: PolicyParams,
    rng: np.random.Generator,
    batch_size: int = 32,
) -> dict[str, np.ndarray]:
    """Synthetic on-policy batch for gradient auditing.

    old_logp equals the current policy's log probability, so the surrogate
    sits at ratio 1, safely inside the clip region where the objective is
    smooth and finite differences are trustworthy.
    """
    from .policy import act

    n_in = params.n_in
    ha = params.n_heads * params.n_actions
    x = rng.normal(size=(batch_size, n_in))
    mask = (rng.random((batch_size, ha)) < 0.7).astype(np.float64)
    m3 = mask.reshape(batch_size, params.n_heads, params.n_actions)
    for b in range(batch_size):
        for h in range(params.n_heads):
            if m3[b, h].sum() == 0.0:
                m3[b, h, rng.integers(params.n_actions)] = 1.0
    actions, logp, _ = act(params, x, mask, rng)
    return {
        "x": x,
        "mask": mask,
        "actions": actions,
        "old_logp": logp,
        "adv": rng.normal(size=batch_size),
        "ret": rng.normal(size=batch_size),
    }


def grad_check(
    params: PolicyParams,
    batch: dict[str, np.ndarray],
    clip: float = 0.2,
    ent_coef: float = 0.01,
    n_probe: int = 50,
    fd_step: float = 1e-6,
    rng: np.random.Generator | None = None,
    grad_scale: float = 1.0,
) -> float:
    """Max relative error between analytic and central-difference gradients.

    Probes n_probe randomly chosen parameters. grad_scale deliberately
    corrupts the analytic gradient for fault-injection tests.
    """
    if rng is None:
        rng = np.random.default_rng(0)
    grads = analytic_grad(params, batch, clip, ent_coef) * grad_scale
    n_params = len(params.flat)
    probes = rng.choice(n_params, size=min(n_probe, n_params), replace=False)
    worst = 0.0
    for i in probes:
        orig = params.flat[i]
        params.flat[i] = orig + fd_step
        up = loss_value(params, batch, clip, ent_coef)
        params.flat[i] = orig - fd_step
        down = loss_value(params, batch, clip, ent_coef)
        params.flat[i] = orig
        numeric = (up - down) / (2.0 * fd_step)
        denom = max(abs(grads[i]), abs(numeric), 1e-8)
        worst = max(worst, abs(grads[i] - numeric) / denom)
    return worst
