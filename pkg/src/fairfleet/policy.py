"""Policy representation: shared MLP approximators, masks, and directives.

One hidden tanh layer maps an observation to per-head action logits plus a
state value. Agents share parameters and are distinguished by a one-hot id
appended to the observation. Forbidden actions get exactly zero probability
through the masked softmax, so a sampled action can never leave the mask.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import ConfigurationError, ContractError, DomainError
from .sim import Observation

HIDDEN_UNITS = 64
BUDGET_FRACTIONS = (0.25, 0.5, 1.0)
N_ROUTE_CHOICES = 3

_CHECKPOINT_MAGIC = b"FFPC"


def speed_levels(v_max: float) -> np.ndarray:
    """The discrete command ladder: five evenly spaced speeds from 0 to v_max."""
    return np.linspace(0.0, v_max, 5)


@dataclass
class PolicyParams:
    """Flat parameter vector with views into the layer blocks."""

    n_in: int
    n_hidden: int
    n_actions: int
    n_heads: int
    flat: np.ndarray

    @property
    def n_out(self) -> int:
        return self.n_heads * self.n_actions + 1

    def _split(self) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        i, h, o = self.n_in, self.n_hidden, self.n_out
        w1 = self.flat[: i * h].reshape(i, h)
        b1 = self.flat[i * h : i * h + h]
        w2 = self.flat[i * h + h : i * h + h + h * o].reshape(h, o)
        b2 = self.flat[i * h + h + h * o :]
        return w1, b1, w2, b2

    @property
    def w1(self) -> np.ndarray:
        return self._split()[0]

    @property
    def b1(self) -> np.ndarray:
        return self._split()[1]

    @property
    def w2(self) -> np.ndarray:
        return self._split()[2]

    @property
    def b2(self) -> np.ndarray:
        return self._split()[3]


def param_count(n_in: int, n_hidden: int, n_actions: int, n_heads: int) -> int:
    n_out = n_heads * n_actions + 1
    return n_in * n_hidden + n_hidden + n_hidden * n_out + n_out


def init_policy(
    n_in: int,
    n_actions: int,
    rng: np.random.Generator,
    n_heads: int = 1,
    n_hidden: int = HIDDEN_UNITS,
) -> PolicyParams:
    """Uniform fan-in initialization, biases zero."""
    if n_in < 1 or n_actions < 2 or n_heads < 1 or n_hidden < 1:
        raise ConfigurationError(
            f"bad layer sizes n_in={n_in} n_actions={n_actions} n_heads={n_heads}"
        )
    n_out = n_heads * n_actions + 1
    flat = np.zeros(param_count(n_in, n_hidden, n_actions, n_heads))
    params = PolicyParams(n_in, n_hidden, n_actions, n_heads, flat)
    bound1 = 1.0 / np.sqrt(n_in)
    bound2 = 1.0 / np.sqrt(n_hidden)
    params.w1[:] = rng.uniform(-bound1, bound1, size=(n_in, n_hidden))
    params.w2[:] = rng.uniform(-bound2, bound2, size=(n_hidden, n_out))
    return params


def forward(params: PolicyParams, x: np.ndarray, mask: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Masked action probabilities (B, heads, actions) and values (B,)."""
    x = np.ascontiguousarray(np.atleast_2d(np.asarray(x, dtype=np.float64)))
    mask = np.ascontiguousarray(np.atleast_2d(np.asarray(mask, dtype=np.float64)))
    if x.shape[1] != params.n_in:
        raise ContractError(f"observation length {x.shape[1]} != input layer {params.n_in}")
    if mask.shape != (x.shape[0], params.n_heads * params.n_actions):
        raise ContractError(f"mask shape {mask.shape} does not match the action layout")
    if np.any(mask.sum(axis=1) < 1.0):
        raise ContractError("each sample must permit at least one action")
    w1, b1, w2, b2 = params._split()
    return kernels.policy_forward(x, w1, b1, w2, b2, mask, params.n_heads)


def act(
    params: PolicyParams,
    x: np.ndarray,
    mask: np.ndarray,
    rng: np.random.Generator,
    greedy: bool = False,
    epsilon: float = 0.0,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Sample one action per head; returns (actions, logp, values).

    With epsilon > 0, an epsilon-mixture with the uniform distribution over
    permitted actions is used for sampling (the logged probability is the
    mixture's). Greedy picks the argmax, ties resolved to the lowest index.
    """
    probs, values = forward(params, x, mask)
    batch, n_heads, n_actions = probs.shape
    m3 = np.atleast_2d(np.asarray(mask, dtype=np.float64)).reshape(batch, n_heads, n_actions)
    if epsilon > 0.0:
        uniform = m3 / m3.sum(axis=2, keepdims=True)
        probs = (1.0 - epsilon) * probs + epsilon * uniform
    actions = np.zeros((batch, n_heads), dtype=np.int64)
    logp = np.zeros(batch)
    for b in range(batch):
        for h in range(n_heads):
            row = probs[b, h]
            if greedy:
                a = int(np.argmax(row))
            else:
                c = np.cumsum(row)
                a = int(np.searchsorted(c, rng.random(), side="right"))
                if a >= n_actions or row[a] == 0.0:
                    permitted = np.flatnonzero(row > 0.0)
                    a = int(permitted[-1])
            actions[b, h] = a
            logp[b] += np.log(row[a])
    return actions, logp, values


@dataclass
class HighDirective:
    """High-level guidance for one vessel over one decision window."""

    agent: int
    route_choice: int
    budget: float
    speed_cap: float
    mask: np.ndarray
    issued_t: int


def derive_feasible_mask(
    budget: float,
    window_hours: float,
    k_f: float,
    levels: np.ndarray,
) -> tuple[np.ndarray, float]:
    """Speed mask under an emission budget for the coming window.

    A speed is permitted when sailing it for the whole window under calm
    weather stays within the budget; zero speed is always permitted.
    Returns the mask and the implied continuous speed cap.
    """
    if window_hours <= 0.0 or k_f <= 0.0:
        raise DomainError(f"window_hours and k_f must be positive, got {window_hours}, {k_f}")
    if budget < 0.0:
        raise DomainError(f"budget must be >= 0, got {budget}")
    mask = np.zeros(len(levels))
    mask[0] = 1.0
    if np.isinf(budget):
        mask[:] = 1.0
        return mask, float(levels[-1])
    cap = (budget / (k_f * window_hours)) ** (1.0 / 3.0)
    for i, v in enumerate(levels):
        if v > 0.0 and k_f * v**3 * window_hours <= budget:
            mask[i] = 1.0
    return mask, float(min(cap, levels[-1]))


def assemble_input(
    obs: Observation,
    agent: int,
    n_agents: int,
    extras: np.ndarray | None = None,
) -> np.ndarray:
    """Network input: observation values, presence flags, agent one-hot, extras."""
    onehot = np.zeros(n_agents)
    onehot[agent] = 1.0
    parts = [obs.values, obs.present.astype(np.float64), onehot]
    if extras is not None:
        parts.append(np.asarray(extras, dtype=np.float64))
    return np.concatenate(parts)


def epsilon_at(episode: int, start: float = 0.2, end: float = 0.01, decay_episodes: int = 500) -> float:
    """Linear epsilon-greedy schedule, clamped at the floor."""
    if episode >= decay_episodes:
        return end
    frac = episode / decay_episodes
    return start + (end - start) * frac


def save_params(path: str, params: PolicyParams, seed: int, step_count: int) -> None:
    """Binary checkpoint: magic, layout dims, seed, step count, flat float64.

    Everything is little-endian; the payload is the raw parameter vector.
    """
    dims = (params.n_in, params.n_hidden, params.n_actions, params.n_heads)
    with open(path, "wb") as fh:
        fh.write(_CHECKPOINT_MAGIC)
        fh.write(struct.pack("<I", len(dims)))
        fh.write(struct.pack(f"<{len(dims)}I", *dims))
        fh.write(struct.pack("<qq", seed, step_count))
        fh.write(params.flat.astype("<f8").tobytes())


def load_params(path: str) -> tuple[PolicyParams, int, int]:
    """Read a checkpoint; returns (params, seed, step_count)."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:4] != _CHECKPOINT_MAGIC:
        raise ConfigurationError(f"{path} is not a parameter checkpoint")
    (n_dims,) = struct.unpack_from("<I", blob, 4)
    dims = struct.unpack_from(f"<{n_dims}I", blob, 8)
    if n_dims != 4:
        raise ConfigurationError(f"unsupported checkpoint layout with {n_dims} dims")
    off = 8 + 4 * n_dims
    seed, step_count = struct.unpack_from("<qq", blob, off)
    off += 16
    flat = np.frombuffer(blob[off:], dtype="<f8").astype(np.float64)
    n_in, n_hidden, n_actions, n_heads = dims
    expected = param_count(n_in, n_hidden, n_actions, n_heads)
    if len(flat) != expected:
        raise ConfigurationError(
            f"checkpoint parameter count {len(flat)} does not match layout ({expected})"
        )
    return PolicyParams(n_in, n_hidden, n_actions, n_heads, flat), seed, step_count
