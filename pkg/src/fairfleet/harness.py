"""Experiment harness: config parsing, presets, and artifact writing.

An experiment is a named run configuration, a scenario, and a seed list.
Outputs are written with stable formatting (repr floats, LF newlines,
sorted JSON keys) so identical inputs produce byte-identical files.
"""

from __future__ import annotations

import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

from .kernels import BACKEND
from .learner import PPOHyper
from .metrics import (
    CSV_COLUMNS,
    CURVE_FIELDS,
    FINAL_WINDOW,
    KPIRecord,
    aggregate_curves,
    final_window_summary,
)
from .errors import ConfigurationError
from .policy import save_params
from .scenario import Scenario, default_scenario_dict, parse_scenario
from .trainer import RunConfig, TrainResult, train

DEFAULT_BUDGET_AGENT_STEPS = 1.0e7
DEFAULT_SEEDS = (0, 1, 2)
WORKERS_ENV_VAR = "FAIRFLEET_WORKERS"

_TOP_KEYS = {
    "name", "episodes", "horizon", "seeds", "cap", "fairness", "env",
    "architecture", "ppo", "scenario", "budget_agent_steps",
}
_CAP_KEYS = {"enabled", "c_max", "alpha", "mode", "persist"}
_FAIRNESS_KEYS = {"enabled", "mode", "weight", "timing"}
_ENV_KEYS = {"storms", "mask_fraction"}
_ARCH_KEYS = {"hierarchy", "centralized", "high_period"}
_PPO_KEYS = {
    "clip", "epochs", "minibatch", "lr_actor", "lr_critic", "gamma",
    "gae_lambda", "entropy_coef", "grad_clip", "exploration",
    "eps_start", "eps_end", "eps_decay_episodes",
}


@dataclass
class ExperimentSpec:
    name: str
    scenario: Scenario
    scenario_raw: dict
    config: RunConfig
    seeds: tuple[int, ...]
    budget_agent_steps: float = DEFAULT_BUDGET_AGENT_STEPS


def _reject_unknown(section: str, raw: dict, allowed: set[str]) -> None:
    extra = sorted(set(raw) - allowed)
    if extra:
        where = f" in '{section}'" if section else ""
        raise ConfigurationError(f"unknown config key(s){where}: {', '.join(extra)}")


def _get_bool(raw: dict, section: str, key: str, default: bool) -> bool:
    value = raw.get(key, default)
    if not isinstance(value, bool):
        raise ConfigurationError(f"'{section}.{key}' must be a boolean, got {value!r}")
    return value


def _get_number(raw: dict, section: str, key: str, default):
    value = raw.get(key, default)
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigurationError(f"'{section}.{key}' must be a number, got {value!r}")
    return value


def parse_config(raw: dict, base_dir: str | Path = ".") -> ExperimentSpec:
    """Build an ExperimentSpec from a strict JSON-style mapping.

    Unknown keys anywhere are rejected by name. The scenario entry may be a
    path (resolved against base_dir) or an inline mapping; the spec always
    carries the inline form so it can be echoed verbatim.
    """
    if not isinstance(raw, dict):
        raise ConfigurationError(f"experiment config must be a mapping, got {type(raw).__name__}")
    _reject_unknown("", raw, _TOP_KEYS)

    name = raw.get("name", "custom")
    if not isinstance(name, str) or not name:
        raise ConfigurationError(f"'name' must be a non-empty string, got {name!r}")

    episodes = _get_number(raw, "", "episodes", 1200)
    horizon = _get_number(raw, "", "horizon", 50)

    seeds_raw = raw.get("seeds", list(DEFAULT_SEEDS))
    if (not isinstance(seeds_raw, list) or not seeds_raw
            or any(isinstance(s, bool) or not isinstance(s, int) for s in seeds_raw)):
        raise ConfigurationError(f"'seeds' must be a non-empty list of integers, got {seeds_raw!r}")
    if len(set(seeds_raw)) != len(seeds_raw):
        raise ConfigurationError(f"'seeds' must be distinct, got {seeds_raw!r}")

    cap = raw.get("cap", {})
    if not isinstance(cap, dict):
        raise ConfigurationError("'cap' must be a mapping")
    _reject_unknown("cap", cap, _CAP_KEYS)
    c_max = cap.get("c_max", "auto")
    if c_max is not None and c_max != "auto" and (isinstance(c_max, bool) or not isinstance(c_max, (int, float))):
        raise ConfigurationError(f"'cap.c_max' must be a number, null, or 'auto', got {c_max!r}")

    fairness = raw.get("fairness", {})
    if not isinstance(fairness, dict):
        raise ConfigurationError("'fairness' must be a mapping")
    _reject_unknown("fairness", fairness, _FAIRNESS_KEYS)

    env = raw.get("env", {})
    if not isinstance(env, dict):
        raise ConfigurationError("'env' must be a mapping")
    _reject_unknown("env", env, _ENV_KEYS)
    mask_fraction = env.get("mask_fraction", None)
    if mask_fraction is not None:
        if isinstance(mask_fraction, bool) or not isinstance(mask_fraction, (int, float)):
            raise ConfigurationError(f"'env.mask_fraction' must be a number or null, got {mask_fraction!r}")
        mask_fraction = float(mask_fraction)

    arch = raw.get("architecture", {})
    if not isinstance(arch, dict):
        raise ConfigurationError("'architecture' must be a mapping")
    _reject_unknown("architecture", arch, _ARCH_KEYS)

    ppo_raw = raw.get("ppo", {})
    if not isinstance(ppo_raw, dict):
        raise ConfigurationError("'ppo' must be a mapping")
    _reject_unknown("ppo", ppo_raw, _PPO_KEYS)
    hyper = PPOHyper(**ppo_raw)

    scenario_entry = raw.get("scenario", None)
    if scenario_entry is None:
        scenario_raw = default_scenario_dict()
    elif isinstance(scenario_entry, str):
        path = Path(base_dir) / scenario_entry
        try:
            with open(path, encoding="utf-8") as fh:
                scenario_raw = json.load(fh)
        except OSError as exc:
            raise ConfigurationError(f"cannot read scenario file '{path}': {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigurationError(f"scenario file '{path}' is not valid JSON: {exc}") from exc
    elif isinstance(scenario_entry, dict):
        scenario_raw = scenario_entry
    else:
        raise ConfigurationError("'scenario' must be a path or an inline mapping")
    scenario = parse_scenario(scenario_raw)

    budget = _get_number(raw, "", "budget_agent_steps", DEFAULT_BUDGET_AGENT_STEPS)
    if budget <= 0:
        raise ConfigurationError(f"'budget_agent_steps' must be positive, got {budget}")

    config = RunConfig(
        run_id=name,
        episodes=int(episodes),
        horizon=int(horizon),
        cap_enabled=_get_bool(cap, "cap", "enabled", False),
        c_max=c_max,
        alpha_lambda=float(_get_number(cap, "cap", "alpha", 0.005)),
        dual_mode=cap.get("mode", "cap_only"),
        lambda_persist=_get_bool(cap, "cap", "persist", True),
        fairness_enabled=_get_bool(fairness, "fairness", "enabled", False),
        fairness_mode=fairness.get("mode", "gini"),
        fairness_weight=float(_get_number(fairness, "fairness", "weight", 0.1)),
        fairness_timing=fairness.get("timing", "offline"),
        storms_enabled=_get_bool(env, "env", "storms", True),
        mask_fraction=mask_fraction,
        hierarchy_enabled=_get_bool(arch, "architecture", "hierarchy", True),
        centralized_baseline=_get_bool(arch, "architecture", "centralized", False),
        high_period=int(_get_number(arch, "architecture", "high_period", 10)),
        hyper=hyper,
    )
    return ExperimentSpec(
        name=name,
        scenario=scenario,
        scenario_raw=scenario_raw,
        config=config,
        seeds=tuple(seeds_raw),
        budget_agent_steps=float(budget),
    )


def normalized_config(spec: ExperimentSpec) -> dict:
    """Fully explicit mapping that parses back to an equal spec."""
    cfg = spec.config
    return {
        "name": spec.name,
        "episodes": cfg.episodes,
        "horizon": cfg.horizon,
        "seeds": list(spec.seeds),
        "cap": {
            "enabled": cfg.cap_enabled,
            "c_max": cfg.c_max,
            "alpha": cfg.alpha_lambda,
            "mode": cfg.dual_mode,
            "persist": cfg.lambda_persist,
        },
        "fairness": {
            "enabled": cfg.fairness_enabled,
            "mode": cfg.fairness_mode,
            "weight": cfg.fairness_weight,
            "timing": cfg.fairness_timing,
        },
        "env": {
            "storms": cfg.storms_enabled,
            "mask_fraction": cfg.mask_fraction,
        },
        "architecture": {
            "hierarchy": cfg.hierarchy_enabled,
            "centralized": cfg.centralized_baseline,
            "high_period": cfg.high_period,
        },
        "ppo": {
            "clip": cfg.hyper.clip,
            "epochs": cfg.hyper.epochs,
            "minibatch": cfg.hyper.minibatch,
            "lr_actor": cfg.hyper.lr_actor,
            "lr_critic": cfg.hyper.lr_critic,
            "gamma": cfg.hyper.gamma,
            "gae_lambda": cfg.hyper.gae_lambda,
            "entropy_coef": cfg.hyper.entropy_coef,
            "grad_clip": cfg.hyper.grad_clip,
            "exploration": cfg.hyper.exploration,
            "eps_start": cfg.hyper.eps_start,
            "eps_end": cfg.hyper.eps_end,
            "eps_decay_episodes": cfg.hyper.eps_decay_episodes,
        },
        "scenario": spec.scenario_raw,
        "budget_agent_steps": spec.budget_agent_steps,
    }


DEFAULT_CAP = 800.0


def predefined_runs(
    episodes: int = 1200,
    horizon: int = 50,
    seeds: tuple[int, ...] = DEFAULT_SEEDS,
    c_max_override: float | str | None = None,
) -> dict[str, ExperimentSpec]:
    """The four standard runs.

    A: unconstrained baseline, calm weather, full observations.
    B: emission cap of 800 on top of A's environment; the cap machinery is
       live but the ceiling is far above realised emissions, so the dual
       stays at zero.
    C: fairness shaping, storms on, half the observation vector masked.
    D: cap (same 800 ceiling) and fairness together, storms on, full
       observations.

    c_max_override replaces the default ceiling in B and D; pass "auto" to
    get the binding variant pinned to 85% of the calibrated unconstrained
    baseline.
    """
    scenario_raw = default_scenario_dict()
    scenario = parse_scenario(scenario_raw)
    if c_max_override is None:
        cap_value: float | str = DEFAULT_CAP
    elif isinstance(c_max_override, str):
        cap_value = c_max_override
    else:
        cap_value = float(c_max_override)
    base = dict(episodes=episodes, horizon=horizon)
    configs = {
        "A": RunConfig(run_id="A", storms_enabled=False, **base),
        "B": RunConfig(run_id="B", storms_enabled=False, cap_enabled=True,
                       c_max=cap_value, **base),
        "C": RunConfig(run_id="C", storms_enabled=True, mask_fraction=0.5,
                       fairness_enabled=True, fairness_mode="maxmin", **base),
        "D": RunConfig(run_id="D", storms_enabled=True, cap_enabled=True,
                       c_max=cap_value, fairness_enabled=True,
                       fairness_mode="maxmin", **base),
    }
    return {
        run_id: ExperimentSpec(
            name=run_id, scenario=scenario, scenario_raw=scenario_raw,
            config=config, seeds=tuple(seeds),
        )
        for run_id, config in configs.items()
    }


@dataclass
class ExperimentResult:
    spec: ExperimentSpec
    records_by_seed: dict[int, list[KPIRecord]]
    summary: dict
    out_dir: Path
    elapsed_by_seed: dict[int, float]


def _resolve_workers(workers: int | None) -> int:
    if workers is None:
        raw = os.environ.get(WORKERS_ENV_VAR, "1")
        try:
            workers = int(raw)
        except ValueError:
            raise ConfigurationError(
                f"{WORKERS_ENV_VAR} must be an integer, got '{raw}'"
            ) from None
    if workers < 1:
        raise ConfigurationError(f"worker count must be >= 1, got {workers}")
    return workers


def _train_seed(args: tuple[Scenario, RunConfig, int]) -> TrainResult:
    scenario, config, seed = args
    return train(scenario, config, seed)


def check_budget(spec: ExperimentSpec) -> int:
    """Total low-level agent steps; raises if over the configured budget."""
    per_seed = spec.config.episodes * spec.config.horizon * spec.scenario.n_vessels
    total = per_seed * len(spec.seeds)
    if total > spec.budget_agent_steps:
        raise ConfigurationError(
            f"experiment '{spec.name}' needs {total} agent steps, "
            f"over the budget of {spec.budget_agent_steps:.0f}"
        )
    return total


def _float_cell(value: float) -> str:
    return repr(float(value))


def write_outputs(
    out_dir: Path,
    spec: ExperimentSpec,
    results: dict[int, TrainResult],
) -> ExperimentResult:
    out_dir.mkdir(parents=True, exist_ok=True)
    records_by_seed = {seed: results[seed].records for seed in spec.seeds}

    with open(out_dir / "config.json", "w", encoding="utf-8", newline="\n") as fh:
        json.dump(normalized_config(spec), fh, indent=2, sort_keys=True)
        fh.write("\n")

    for seed in spec.seeds:
        path = out_dir / f"kpis_seed{seed}.jsonl"
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            for record in records_by_seed[seed]:
                fh.write(record.to_json())
                fh.write("\n")

    with open(out_dir / "kpis.csv", "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(CSV_COLUMNS) + "\n")
        for seed in spec.seeds:
            for record in records_by_seed[seed]:
                fh.write(",".join(record.to_csv_row()) + "\n")

    record_series = [records_by_seed[seed] for seed in spec.seeds]
    curves = aggregate_curves(record_series)
    with open(out_dir / "curves.csv", "w", encoding="utf-8", newline="\n") as fh:
        header = ["episode"]
        for name in CURVE_FIELDS:
            header.extend([f"{name}_mean", f"{name}_std"])
        fh.write(",".join(header) + "\n")
        for point in curves:
            row = [str(point.episode)]
            for name in CURVE_FIELDS:
                mean, std = point.stats[name]
                row.extend([_float_cell(mean), _float_cell(std)])
            fh.write(",".join(row) + "\n")

    window = min(FINAL_WINDOW, spec.config.episodes)
    tail_means = final_window_summary(record_series, window)
    summary = {
        "run": spec.name,
        "seeds": list(spec.seeds),
        "episodes": spec.config.episodes,
        "final_window": window,
        "metrics": tail_means,
        "reward_mean": tail_means["reward_mean"],
        "emissions": tail_means["emissions"],
    }
    with open(out_dir / "summary.json", "w", encoding="utf-8", newline="\n") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")

    for seed in spec.seeds:
        policies = results[seed].policies
        steps = results[seed].agent_steps
        if policies.central is not None:
            save_params(out_dir / f"checkpoint_central_seed{seed}.bin",
                        policies.central, seed, steps)
        if policies.low is not None:
            save_params(out_dir / f"checkpoint_low_seed{seed}.bin",
                        policies.low, seed, steps)
        if policies.high is not None:
            save_params(out_dir / f"checkpoint_high_seed{seed}.bin",
                        policies.high, seed, steps)

    meta = {
        "backend": BACKEND,
        "elapsed_seconds": {str(seed): results[seed].elapsed_seconds for seed in spec.seeds},
        "agent_steps": {str(seed): results[seed].agent_steps for seed in spec.seeds},
    }
    with open(out_dir / "run_meta.json", "w", encoding="utf-8", newline="\n") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")

    return ExperimentResult(
        spec=spec,
        records_by_seed=records_by_seed,
        summary=summary,
        out_dir=out_dir,
        elapsed_by_seed={seed: results[seed].elapsed_seconds for seed in spec.seeds},
    )


def run_experiment(
    spec: ExperimentSpec,
    out_dir: str | Path,
    workers: int | None = None,
    progress=None,
) -> ExperimentResult:
    """Train every seed of one experiment and write all artifacts."""
    check_budget(spec)
    workers = _resolve_workers(workers)
    out_dir = Path(out_dir)

    results: dict[int, TrainResult] = {}
    if workers == 1 or len(spec.seeds) == 1:
        for seed in spec.seeds:
            results[seed] = train(spec.scenario, spec.config, seed, progress=progress)
    else:
        jobs = [(spec.scenario, spec.config, seed) for seed in spec.seeds]
        with ProcessPoolExecutor(max_workers=min(workers, len(jobs))) as pool:
            for seed, result in zip(spec.seeds, pool.map(_train_seed, jobs)):
                results[seed] = result
    return write_outputs(out_dir, spec, results)
