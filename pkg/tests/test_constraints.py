"""Dual-variable updates, penalties, and violation accounting."""

import numpy as np
import pytest
from hypothesis import given, strategies as st

from fairfleet.constraints import (
    DualState,
    ViolationReport,
    constraint_penalty,
    dual_update,
    violation_stats,
)
from fairfleet.errors import ConfigurationError, ContractError, DomainError


def test_dual_update_over_cap():
    # 0.5 + 0.01 * (15 - 5) = 0.6
    assert abs(dual_update(0.5, 15.0, 5.0, 0.01) - 0.6) < 1e-15


def test_dual_update_under_cap_holds():
    assert dual_update(0.5, 3.0, 5.0, 0.01) == 0.5
    assert dual_update(0.0, 0.0, 5.0, 0.01) == 0.0


def test_signed_mode_projects_to_zero():
    # 0.05 + 0.01 * (3 - 100) < 0, projected back to 0
    assert dual_update(0.05, 3.0, 100.0, 0.01, mode="signed") == 0.0
    got = dual_update(0.05, 7.0, 5.0, 0.01, mode="signed")
    assert abs(got - 0.07) < 1e-15


def test_dual_update_unknown_mode():
    with pytest.raises(ConfigurationError):
        dual_update(0.0, 1.0, 1.0, 0.01, mode="pid")


@given(
    lam=st.floats(0.0, 50.0),
    cum=st.floats(0.0, 100.0),
    cap=st.floats(0.1, 100.0),
    alpha=st.floats(0.0, 1.0),
    mode=st.sampled_from(["cap_only", "signed"]),
)
def test_dual_never_negative(lam, cum, cap, alpha, mode):
    assert dual_update(lam, cum, cap, alpha, mode) >= 0.0


@given(
    lam=st.floats(0.0, 50.0),
    cum=st.floats(0.0, 100.0),
    cap=st.floats(0.1, 100.0),
    alpha=st.floats(0.0, 1.0),
)
def test_cap_only_is_monotone(lam, cum, cap, alpha):
    assert dual_update(lam, cum, cap, alpha, "cap_only") >= lam


def test_constraint_penalty_values():
    pen = constraint_penalty(2.0, np.array([0.0, 0.5, 1.5]))
    np.testing.assert_allclose(pen, [0.0, -1.0, -3.0], atol=1e-15)


def test_constraint_penalty_domain():
    with pytest.raises(DomainError):
        constraint_penalty(-0.1, np.array([1.0]))
    with pytest.raises(DomainError):
        constraint_penalty(1.0, np.array([-1.0]))


def test_dual_state_validation():
    DualState(alpha=0.005, mode="cap_only")
    with pytest.raises(ConfigurationError):
        DualState(mode="nope")
    with pytest.raises(ConfigurationError):
        DualState(alpha=-1.0)
    with pytest.raises(ConfigurationError):
        DualState(lam=-0.5)


def test_violation_stats_counts():
    trace = np.array([1.0, 2.0, 3.0])
    report = violation_stats(trace, 2.5)
    assert isinstance(report, ViolationReport)
    assert report.steps_over == 1
    assert report.episode_over is True
    assert abs(report.max_overshoot - 0.5) < 1e-15
    assert abs(report.mean_overshoot - 0.5 / 3.0) < 1e-15

    clean = violation_stats(np.array([0.5, 1.0]), 2.0)
    assert clean.steps_over == 0 and not clean.episode_over


def test_violation_stats_requires_monotone_trace():
    with pytest.raises(ContractError):
        violation_stats(np.array([2.0, 1.0]), 1.0)
    with pytest.raises(ContractError):
        violation_stats(np.array([]), 1.0)
