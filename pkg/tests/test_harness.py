"""Experiment specs, strict config parsing, and artifact writing."""

import json

import pytest

from fairfleet.errors import ConfigurationError
from fairfleet.harness import (
    DEFAULT_CAP,
    ExperimentSpec,
    check_budget,
    normalized_config,
    parse_config,
    predefined_runs,
    run_experiment,
    _resolve_workers,
)


def test_parse_config_defaults():
    spec = parse_config({"name": "x"})
    assert spec.name == "x"
    assert spec.config.episodes == 1200
    assert spec.config.horizon == 50
    assert spec.seeds == (0, 1, 2)
    assert not spec.config.cap_enabled
    assert spec.scenario.n_vessels == 5


def test_parse_config_rejects_unknown_keys_by_name():
    with pytest.raises(ConfigurationError, match="epsodes"):
        parse_config({"epsodes": 100})
    with pytest.raises(ConfigurationError, match="cap"):
        parse_config({"cap": {"celing": 1.0}})
    with pytest.raises(ConfigurationError, match="lr_actr"):
        parse_config({"ppo": {"lr_actr": 1e-3}})


def test_parse_config_type_errors():
    with pytest.raises(ConfigurationError):
        parse_config({"seeds": [0, 0]})
    with pytest.raises(ConfigurationError):
        parse_config({"seeds": []})
    with pytest.raises(ConfigurationError):
        parse_config({"seeds": [0, True]})
    with pytest.raises(ConfigurationError):
        parse_config({"cap": {"enabled": "yes"}})
    with pytest.raises(ConfigurationError):
        parse_config({"cap": {"c_max": "tight"}})
    with pytest.raises(ConfigurationError):
        parse_config({"env": {"mask_fraction": "half"}})
    with pytest.raises(ConfigurationError):
        parse_config({"budget_agent_steps": -5})
    with pytest.raises(ConfigurationError):
        parse_config({"name": ""})


def test_normalized_config_round_trips():
    raw = {
        "name": "rt",
        "episodes": 4,
        "horizon": 6,
        "seeds": [5, 9],
        "cap": {"enabled": True, "c_max": 2.5, "alpha": 0.01, "mode": "signed",
                "persist": False},
        "fairness": {"enabled": True, "mode": "maxmin", "weight": 0.2,
                     "timing": "per_step"},
        "env": {"storms": False, "mask_fraction": 0.25},
        "architecture": {"hierarchy": False, "centralized": True, "high_period": 5},
        "ppo": {"minibatch": 8, "epochs": 2},
    }
    spec = parse_config(raw)
    again = parse_config(normalized_config(spec))
    assert normalized_config(again) == normalized_config(spec)
    assert again.config == spec.config
    assert again.seeds == spec.seeds


def test_scenario_from_file(tmp_path):
    from fairfleet.scenario import default_scenario_dict

    path = tmp_path / "scen.json"
    path.write_text(json.dumps(default_scenario_dict()))
    spec = parse_config({"name": "f", "scenario": "scen.json"}, base_dir=tmp_path)
    assert spec.scenario.n_vessels == 5
    with pytest.raises(ConfigurationError):
        parse_config({"scenario": "missing.json"}, base_dir=tmp_path)
    path.write_text("{not json")
    with pytest.raises(ConfigurationError):
        parse_config({"scenario": "scen.json"}, base_dir=tmp_path)


def test_predefined_runs_matrix():
    runs = predefined_runs()
    assert set(runs) == {"A", "B", "C", "D"}
    a, b, c, d = runs["A"], runs["B"], runs["C"], runs["D"]
    assert not a.config.cap_enabled and not a.config.storms_enabled
    assert b.config.cap_enabled and b.config.c_max == DEFAULT_CAP
    assert not b.config.storms_enabled
    assert c.config.fairness_enabled and c.config.mask_fraction == 0.5
    assert c.config.storms_enabled and not c.config.cap_enabled
    assert d.config.cap_enabled and d.config.c_max == DEFAULT_CAP
    assert d.config.fairness_enabled and d.config.mask_fraction is None
    for spec in runs.values():
        assert spec.config.hierarchy_enabled
        assert spec.seeds == (0, 1, 2)
        assert spec.config.episodes == 1200


def test_predefined_runs_cap_override():
    runs = predefined_runs(episodes=10, horizon=5, seeds=(0,), c_max_override="auto")
    assert runs["B"].config.c_max == "auto"
    assert runs["D"].config.c_max == "auto"
    runs = predefined_runs(c_max_override=3.25)
    assert runs["B"].config.c_max == 3.25


def test_check_budget():
    runs = predefined_runs(episodes=10, horizon=5, seeds=(0, 1))
    assert check_budget(runs["A"]) == 10 * 5 * 5 * 2
    tight = ExperimentSpec(
        name="over", scenario=runs["A"].scenario,
        scenario_raw=runs["A"].scenario_raw, config=runs["A"].config,
        seeds=(0, 1), budget_agent_steps=100.0,
    )
    with pytest.raises(ConfigurationError):
        check_budget(tight)


def test_resolve_workers(monkeypatch):
    assert _resolve_workers(4) == 4
    monkeypatch.setenv("FAIRFLEET_WORKERS", "3")
    assert _resolve_workers(None) == 3
    monkeypatch.setenv("FAIRFLEET_WORKERS", "zero")
    with pytest.raises(ConfigurationError):
        _resolve_workers(None)
    monkeypatch.delenv("FAIRFLEET_WORKERS")
    assert _resolve_workers(None) == 1
    with pytest.raises(ConfigurationError):
        _resolve_workers(0)


def _tiny_spec(name="tiny", episodes=3, seeds=(0, 1)):
    raw = {
        "name": name,
        "episodes": episodes,
        "horizon": 8,
        "seeds": list(seeds),
        "env": {"storms": False},
        "ppo": {"minibatch": 16},
    }
    return parse_config(raw)


def test_run_experiment_artifacts(tmp_path):
    spec = _tiny_spec()
    result = run_experiment(spec, tmp_path / "out")
    expected = {
        "config.json", "kpis_seed0.jsonl", "kpis_seed1.jsonl", "kpis.csv",
        "curves.csv", "summary.json", "checkpoint_low_seed0.bin",
        "checkpoint_low_seed1.bin", "checkpoint_high_seed0.bin",
        "checkpoint_high_seed1.bin", "run_meta.json",
    }
    assert {p.name for p in (tmp_path / "out").iterdir()} == expected

    csv_lines = (tmp_path / "out" / "kpis.csv").read_text().splitlines()
    assert len(csv_lines) == 1 + 3 * 2
    assert csv_lines[0].startswith("run,seed,episode,")
    curve_lines = (tmp_path / "out" / "curves.csv").read_text().splitlines()
    assert len(curve_lines) == 1 + 3

    summary = json.loads((tmp_path / "out" / "summary.json").read_text())
    assert summary["run"] == "tiny"
    assert summary["final_window"] == 3
    assert summary["reward_mean"] == summary["metrics"]["reward_mean"]

    for seed in (0, 1):
        lines = (tmp_path / "out" / f"kpis_seed{seed}.jsonl").read_text().splitlines()
        assert len(lines) == 3
        first = json.loads(lines[0])
        assert first["seed"] == seed and first["episode"] == 0

    config_echo = json.loads((tmp_path / "out" / "config.json").read_text())
    assert parse_config(config_echo).config == spec.config


def test_run_experiment_is_byte_deterministic(tmp_path):
    spec = _tiny_spec()
    run_experiment(spec, tmp_path / "r1")
    run_experiment(spec, tmp_path / "r2")
    for name in ("config.json", "kpis_seed0.jsonl", "kpis_seed1.jsonl",
                 "kpis.csv", "curves.csv", "summary.json",
                 "checkpoint_low_seed0.bin", "checkpoint_high_seed0.bin"):
        a = (tmp_path / "r1" / name).read_bytes()
        b = (tmp_path / "r2" / name).read_bytes()
        assert a == b, f"{name} differs between identical runs"


def test_run_experiment_rejects_over_budget(tmp_path):
    spec = _tiny_spec()
    spec.budget_agent_steps = 10.0
    with pytest.raises(ConfigurationError):
        run_experiment(spec, tmp_path / "never")
    assert not (tmp_path / "never").exists()
