"""KPI records, serialization, and cross-seed aggregation."""

import json

import numpy as np
import pytest

from fairfleet.constraints import ViolationReport
from fairfleet.errors import ContractError
from fairfleet.metrics import (
    CSV_COLUMNS,
    CURVE_FIELDS,
    KPIRecord,
    aggregate_curves,
    episode_kpis,
    final_window_summary,
)


def _record(episode=0, seed=0, emissions=4.0, lam=0.25, over=False):
    return KPIRecord(
        run="A", seed=seed, episode=episode, reward_mean=-4.0, reward_base=-4.0,
        emissions=emissions, fuel=emissions, gini=0.2, throughput=16,
        queue_hours=1.0, steps_over=3, episode_over=over, lam=lam,
        fuel_per_vessel=[1.0, 3.0],
    )


def test_numeric_aliases():
    rec = _record(lam=0.5, over=True)
    assert rec.numeric("lambda") == 0.5
    assert rec.numeric("episode_over") == 1.0
    assert rec.numeric("emissions") == 4.0
    assert _record(over=False).numeric("episode_over") == 0.0


def test_to_json_round_trip():
    rec = _record()
    parsed = json.loads(rec.to_json())
    assert parsed["lambda"] == 0.25
    assert "lam" not in parsed
    assert parsed["fuel_per_vessel"] == [1.0, 3.0]
    assert parsed["run"] == "A"
    # keys are sorted so byte-level comparison across runs is stable
    assert list(parsed) == sorted(parsed)


def test_to_csv_row_matches_schema():
    row = _record(over=True).to_csv_row()
    assert len(row) == len(CSV_COLUMNS)
    assert row[0] == "A"
    assert row[CSV_COLUMNS.index("episode_over")] == "1"
    assert all(isinstance(cell, str) for cell in row)
    # repr keeps full float precision
    assert float(row[CSV_COLUMNS.index("lambda")]) == 0.25


def test_episode_kpis_wiring():
    rec = episode_kpis(
        run="X", seed=2, episode=7, reward_adjusted=-5.5, reward_base=-5.0,
        emissions=5.0, fuel_per_vessel=np.array([1.0, 2.0, 3.0]),
        throughput=4, queue_hours=2.5,
        violations=ViolationReport(steps_over=6, episode_over=True,
                                   max_overshoot=0.4, mean_overshoot=0.1),
        lam=1.25, decomposition_error=1e-16, mask_violations=0,
    )
    assert rec.fuel == 6.0
    assert abs(rec.gini - 8.0 / 36.0) < 1e-12
    assert rec.steps_over == 6 and rec.episode_over
    assert rec.lam == 1.25
    no_cap = episode_kpis(
        run="X", seed=0, episode=0, reward_adjusted=0.0, reward_base=0.0,
        emissions=0.0, fuel_per_vessel=np.zeros(2), throughput=0,
        queue_hours=0.0, violations=None, lam=0.0,
    )
    assert no_cap.steps_over == 0 and not no_cap.episode_over


def test_aggregate_curves_mean_std():
    series = [
        [_record(episode=0, seed=0, emissions=4.0), _record(episode=1, seed=0, emissions=2.0)],
        [_record(episode=0, seed=1, emissions=6.0), _record(episode=1, seed=1, emissions=2.0)],
    ]
    points = aggregate_curves(series)
    assert len(points) == 2
    mean, std = points[0].stats["emissions"]
    assert mean == 5.0 and std == 1.0
    mean, std = points[1].stats["emissions"]
    assert mean == 2.0 and std == 0.0
    assert set(points[0].stats) == set(CURVE_FIELDS)


def test_aggregate_curves_contracts():
    with pytest.raises(ContractError):
        aggregate_curves([])
    with pytest.raises(ContractError):
        aggregate_curves([[_record()], []])
    with pytest.raises(ContractError):
        aggregate_curves([[_record()], [_record(), _record(episode=1)]])


def test_final_window_summary():
    series = [[_record(episode=e, emissions=float(e)) for e in range(10)]]
    full = final_window_summary(series, window=50)
    assert full["emissions"] == 4.5
    tail = final_window_summary(series, window=4)
    assert tail["emissions"] == 7.5
    two_seed = final_window_summary(
        [
            [_record(episode=0, emissions=1.0)],
            [_record(episode=0, emissions=3.0)],
        ],
        window=1,
    )
    assert two_seed["emissions"] == 2.0
