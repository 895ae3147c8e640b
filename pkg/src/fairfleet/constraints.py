"""Emission-cap enforcement via a dual price on emissions.

The dual variable lambda rises while cumulative emissions sit above the cap
and prices each agent's emissions into its reward as -lambda * e_i. Two
update rules are supported: 'cap_only' (default) only ever increases lambda,
and only while over the cap; 'signed' applies the signed error with a
projection back to lambda >= 0.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, ContractError, DomainError

DUAL_MODES = ("cap_only", "signed")


@dataclass
class DualState:
    """Carrier for the dual variable and its update settings."""

    lam: float = 0.0
    alpha: float = 0.005
    c_max: float = 0.0
    mode: str = "cap_only"

    def __post_init__(self) -> None:
        if self.mode not in DUAL_MODES:
            raise ConfigurationError(f"dual_mode must be one of {DUAL_MODES}, got '{self.mode}'")
        if self.alpha < 0.0:
            raise ConfigurationError(f"alpha_lambda must be >= 0, got {self.alpha}")
        if self.lam < 0.0:
            raise ConfigurationError(f"lambda must start >= 0, got {self.lam}")


@dataclass
class ViolationReport:
    steps_over: int
    episode_over: bool
    max_overshoot: float
    mean_overshoot: float


def dual_update(lam: float, cum_emissions: float, c_max: float, alpha: float,
                mode: str = "cap_only") -> float:
    """One dual step given current cumulative emissions against the cap."""
    if mode == "cap_only":
        if cum_emissions > c_max:
            return lam + alpha * (cum_emissions - c_max)
        return lam
    if mode == "signed":
        return max(0.0, lam + alpha * (cum_emissions - c_max))
    raise ConfigurationError(f"dual_mode must be one of {DUAL_MODES}, got '{mode}'")


def constraint_penalty(lam: float, emissions: np.ndarray) -> np.ndarray:
    """Per-agent shaped penalty -lambda * e_i."""
    emissions = np.asarray(emissions, dtype=np.float64)
    if np.any(emissions < 0.0):
        raise DomainError("per-agent emissions must be non-negative")
    if lam < 0.0:
        raise DomainError(f"lambda must be >= 0, got {lam}")
    return -lam * emissions


def violation_stats(cum_history: np.ndarray, c_max: float) -> ViolationReport:
    """Summary of cap violations over one episode's cumulative trace.

    cum_history must be the per-step cumulative emissions, hence
    non-decreasing; a decreasing trace indicates a caller bug.
    """
    cum_history = np.asarray(cum_history, dtype=np.float64)
    if cum_history.ndim != 1 or len(cum_history) == 0:
        raise ContractError("cum_history must be a non-empty 1-D trace")
    if np.any(np.diff(cum_history) < 0.0):
        raise ContractError("cumulative emissions trace must be non-decreasing")
    over = np.maximum(0.0, cum_history - c_max)
    strictly = cum_history > c_max
    return ViolationReport(
        steps_over=int(np.count_nonzero(strictly)),
        episode_over=bool(cum_history[-1] > c_max),
        max_overshoot=float(over.max()),
        mean_overshoot=float(over.mean()),
    )
