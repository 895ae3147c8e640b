"""Episode KPIs, cross-seed aggregation, and file output formats.

One KPIRecord per episode. The CSV schema is fixed; the JSONL lines carry
the same record plus the per-vessel fuel vector and two audit counters that
do not fit the flat schema.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np

from .constraints import ViolationReport
from .errors import ContractError
from .fairness import gini

CSV_COLUMNS = (
    "run", "seed", "episode", "reward_mean", "reward_base", "emissions",
    "fuel", "gini", "throughput", "queue_hours", "steps_over",
    "episode_over", "lambda",
)

# Numeric KPI fields aggregated into curves (episode_over contributes as a
# 0/1 rate).
CURVE_FIELDS = (
    "reward_mean", "reward_base", "emissions", "fuel", "gini",
    "throughput", "queue_hours", "steps_over", "episode_over", "lambda",
)

FINAL_WINDOW = 50


@dataclass
class KPIRecord:
    run: str
    seed: int
    episode: int
    reward_mean: float
    reward_base: float
    emissions: float
    fuel: float
    gini: float
    throughput: int
    queue_hours: float
    steps_over: int
    episode_over: bool
    lam: float
    fuel_per_vessel: list[float] = field(default_factory=list)
    decomposition_error: float = 0.0
    mask_violations: int = 0

    def numeric(self, name: str) -> float:
        if name == "lambda":
            return float(self.lam)
        if name == "episode_over":
            return 1.0 if self.episode_over else 0.0
        return float(getattr(self, name))

    def to_json(self) -> str:
        d = asdict(self)
        d["lambda"] = d.pop("lam")
        return json.dumps(d, sort_keys=True)

    def to_csv_row(self) -> list[str]:
        return [
            self.run, repr(self.seed), repr(self.episode),
            repr(self.reward_mean), repr(self.reward_base),
            repr(self.emissions), repr(self.fuel), repr(self.gini),
            repr(self.throughput), repr(self.queue_hours),
            repr(self.steps_over), "1" if self.episode_over else "0",
            repr(self.lam),
        ]


def episode_kpis(
    run: str,
    seed: int,
    episode: int,
    reward_adjusted: float,
    reward_base: float,
    emissions: float,
    fuel_per_vessel: np.ndarray,
    throughput: int,
    queue_hours: float,
    violations: ViolationReport | None,
    lam: float,
    decomposition_error: float = 0.0,
    mask_violations: int = 0,
) -> KPIRecord:
    """Assemble one episode's record; Gini is computed from the fuel vector."""
    fuel_per_vessel = np.asarray(fuel_per_vessel, dtype=np.float64)
    fuel_total = float(fuel_per_vessel.sum())
    return KPIRecord(
        run=run,
        seed=seed,
        episode=episode,
        reward_mean=float(reward_adjusted),
        reward_base=float(reward_base),
        emissions=float(emissions),
        fuel=fuel_total,
        gini=gini(fuel_per_vessel) if len(fuel_per_vessel) else 0.0,
        throughput=int(throughput),
        queue_hours=float(queue_hours),
        steps_over=0 if violations is None else violations.steps_over,
        episode_over=False if violations is None else violations.episode_over,
        lam=float(lam),
        fuel_per_vessel=[float(f) for f in fuel_per_vessel],
        decomposition_error=float(decomposition_error),
        mask_violations=int(mask_violations),
    )


@dataclass
class CurvePoint:
    episode: int
    stats: dict[str, tuple[float, float]]


def aggregate_curves(records_by_seed: list[list[KPIRecord]]) -> list[CurvePoint]:
    """Per-episode mean and population std across seeds for each KPI field."""
    if not records_by_seed or any(not r for r in records_by_seed):
        raise ContractError("need at least one non-empty record series per seed")
    length = len(records_by_seed[0])
    if any(len(r) != length for r in records_by_seed):
        raise ContractError("record series have mismatched episode counts")
    points = []
    for ep in range(length):
        stats = {}
        for name in CURVE_FIELDS:
            vals = np.array([series[ep].numeric(name) for series in records_by_seed])
            stats[name] = (float(vals.mean()), float(vals.std()))
        points.append(CurvePoint(episode=records_by_seed[0][ep].episode, stats=stats))
    return points


def final_window_summary(
    records_by_seed: list[list[KPIRecord]],
    window: int = FINAL_WINDOW,
) -> dict[str, float]:
    """Mean of each KPI over the last `window` episodes, then across seeds."""
    if not records_by_seed or any(not r for r in records_by_seed):
        raise ContractError("need at least one non-empty record series per seed")
    out: dict[str, float] = {}
    for name in CURVE_FIELDS:
        per_seed = []
        for series in records_by_seed:
            tail = series[-min(window, len(series)):]
            per_seed.append(np.mean([r.numeric(name) for r in tail]))
        out[name] = float(np.mean(per_seed))
    return out
