"""Fairness measurement and reward shaping across the fleet.

Burden is cumulative fuel per vessel within an episode. Two shaping modes:
'gini' applies a shared penalty proportional to the Gini coefficient of
burdens, 'maxmin' penalizes each agent by its gap to the best-off agent's
reward, which gives per-agent credit assignment.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, DomainError

FAIRNESS_MODES = ("gini", "maxmin")
FAIRNESS_TIMINGS = ("offline", "per_step")


def gini(values: np.ndarray) -> float:
    """Gini coefficient: mean absolute pairwise difference over twice the mean.

    All-equal input gives 0; an all-zero vector is treated as perfectly
    equal. Negative burdens are out of domain.
    """
    values = np.asarray(values, dtype=np.float64)
    if values.ndim != 1 or len(values) == 0:
        raise DomainError("gini needs a non-empty 1-D vector")
    if np.any(values < 0.0):
        raise DomainError("gini is defined for non-negative values")
    total = values.sum()
    if total == 0.0:
        return 0.0
    n = len(values)
    diff_sum = np.abs(values[:, None] - values[None, :]).sum()
    return float(diff_sum / (2.0 * n * total))


def maxmin_ratio(rewards: np.ndarray) -> float:
    """min_i R_i / max_i R_i, the worst-to-best reward ratio."""
    rewards = np.asarray(rewards, dtype=np.float64)
    if rewards.ndim != 1 or len(rewards) == 0:
        raise DomainError("maxmin_ratio needs a non-empty 1-D vector")
    best = rewards.max()
    if best == 0.0:
        return 0.0 if rewards.min() < 0.0 else 1.0
    return float(rewards.min() / best)


def fairness_term(
    mode: str,
    weight: float,
    burdens: np.ndarray,
    rewards: np.ndarray,
) -> np.ndarray:
    """Per-agent fairness adjustment delta_i (non-positive).

    gini mode shares -weight * G(burdens) across all agents; maxmin mode
    charges each agent -weight * max(0, R_best - R_i).
    """
    if weight < 0.0:
        raise ConfigurationError(f"fairness weight must be >= 0, got {weight}")
    burdens = np.asarray(burdens, dtype=np.float64)
    rewards = np.asarray(rewards, dtype=np.float64)
    if mode == "gini":
        return np.full(len(burdens), -weight * gini(burdens))
    if mode == "maxmin":
        gaps = np.maximum(0.0, rewards.max() - rewards)
        return -weight * gaps
    raise ConfigurationError(f"fairness_mode must be one of {FAIRNESS_MODES}, got '{mode}'")


@dataclass
class BurdenLedger:
    """Per-agent cumulative fuel within one episode."""

    n_agents: int
    burdens: np.ndarray = field(init=False)

    def __post_init__(self) -> None:
        self.burdens = np.zeros(self.n_agents)

    def add(self, step_fuel: np.ndarray) -> None:
        step_fuel = np.asarray(step_fuel, dtype=np.float64)
        if len(step_fuel) != self.n_agents:
            raise DomainError(
                f"expected {self.n_agents} burden entries, got {len(step_fuel)}"
            )
        if np.any(step_fuel < 0.0):
            raise DomainError("step fuel must be non-negative")
        self.burdens += step_fuel

    def reset(self) -> None:
        self.burdens[:] = 0.0
