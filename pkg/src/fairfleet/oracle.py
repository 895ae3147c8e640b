"""Hand-computed reference cases for the simulation primitives.

Every expected value below is derived with plain arithmetic from the
documented physics (cubic fuel curve, weather multipliers, overshoot
snapping, FIFO berthing) rather than by calling the simulator, so the
table stays an independent check on the implementation.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import ContractError
from .sim import advance_kinematics, allocate_berths, fuel_rate

ORACLE_TOLERANCE = 1e-12

_KF = 3.0e-4
_KIDLE = 0.02
CALM, MODERATE, STORM = 0, 1, 2


@dataclass(frozen=True)
class OracleCase:
    name: str
    kind: str  # "fuel" | "move" | "berth"
    inputs: dict
    expected: tuple


def dynamics_cases() -> tuple[OracleCase, ...]:
    """The fixed 20-case table."""
    f = []
    # Fuel curve: idle flat rate, cubic sail rate, weather and wear factors.
    f.append(OracleCase(
        "idle_calm", "fuel",
        {"speed": 0.0, "weather": CALM, "k_f": _KF, "k_idle": _KIDLE},
        (_KIDLE,),
    ))
    f.append(OracleCase(
        "sail_5_calm", "fuel",
        {"speed": 5.0, "weather": CALM, "k_f": _KF, "k_idle": _KIDLE},
        (_KF * 5.0 ** 3,),
    ))
    f.append(OracleCase(
        "sail_10_calm", "fuel",
        {"speed": 10.0, "weather": CALM, "k_f": _KF, "k_idle": _KIDLE},
        (_KF * 10.0 ** 3,),
    ))
    f.append(OracleCase(
        "sail_15_calm", "fuel",
        {"speed": 15.0, "weather": CALM, "k_f": _KF, "k_idle": _KIDLE},
        (_KF * 15.0 ** 3,),
    ))
    f.append(OracleCase(
        "sail_20_calm", "fuel",
        {"speed": 20.0, "weather": CALM, "k_f": _KF, "k_idle": _KIDLE},
        (_KF * 20.0 ** 3,),
    ))
    f.append(OracleCase(
        "sail_10_storm", "fuel",
        {"speed": 10.0, "weather": STORM, "k_f": _KF, "k_idle": _KIDLE},
        (_KF * 10.0 ** 3 * 1.3,),
    ))
    f.append(OracleCase(
        "sail_10_moderate", "fuel",
        {"speed": 10.0, "weather": MODERATE, "k_f": _KF, "k_idle": _KIDLE},
        (_KF * 10.0 ** 3 * 1.15,),
    ))
    f.append(OracleCase(
        "idle_storm_flat", "fuel",
        {"speed": 0.0, "weather": STORM, "k_f": _KF, "k_idle": _KIDLE},
        (_KIDLE,),
    ))
    f.append(OracleCase(
        "sail_10_calm_degraded", "fuel",
        {"speed": 10.0, "weather": CALM, "k_f": _KF, "k_idle": _KIDLE, "degraded": True},
        (_KF * 10.0 ** 3 * 1.1,),
    ))
    f.append(OracleCase(
        "sail_15_storm_degraded", "fuel",
        {"speed": 15.0, "weather": STORM, "k_f": _KF, "k_idle": _KIDLE, "degraded": True},
        (_KF * 15.0 ** 3 * 1.3 * 1.1,),
    ))
    # Kinematics: weather slows the ground speed, arrival snaps to the node.
    f.append(OracleCase(
        "move_calm", "move",
        {"progress": 0.0, "distance": 25.0, "speed": 10.0, "weather": CALM, "dt": 1.0},
        (10.0, False),
    ))
    f.append(OracleCase(
        "move_storm", "move",
        {"progress": 0.0, "distance": 25.0, "speed": 10.0, "weather": STORM, "dt": 1.0},
        (10.0 * 0.7, False),
    ))
    f.append(OracleCase(
        "move_moderate", "move",
        {"progress": 0.0, "distance": 25.0, "speed": 10.0, "weather": MODERATE, "dt": 1.0},
        (10.0 * 0.85, False),
    ))
    f.append(OracleCase(
        "move_arrive_exact", "move",
        {"progress": 20.0, "distance": 25.0, "speed": 5.0, "weather": CALM, "dt": 1.0},
        (25.0, True),
    ))
    f.append(OracleCase(
        "move_arrive_overshoot", "move",
        {"progress": 20.0, "distance": 25.0, "speed": 15.0, "weather": CALM, "dt": 1.0},
        (25.0, True),
    ))
    f.append(OracleCase(
        "move_idle_holds", "move",
        {"progress": 12.5, "distance": 25.0, "speed": 0.0, "weather": STORM, "dt": 1.0},
        (12.5, False),
    ))
    f.append(OracleCase(
        "move_storm_no_wear_slowdown", "move",
        {"progress": 0.0, "distance": 30.0, "speed": 15.0, "weather": STORM, "dt": 1.0},
        (15.0 * 0.7, False),
    ))
    # Berthing: queue ahead of arrivals, arrivals sorted ascending.
    f.append(OracleCase(
        "berth_queue_priority", "berth",
        {"capacity": 2, "occupied": 1, "queue": [3], "arrivals": [1, 0]},
        ((3,), (0, 1)),
    ))
    f.append(OracleCase(
        "berth_tie_ascending", "berth",
        {"capacity": 1, "occupied": 0, "queue": [], "arrivals": [4, 2]},
        ((2,), (4,)),
    ))
    f.append(OracleCase(
        "berth_full_port_queues", "berth",
        {"capacity": 1, "occupied": 1, "queue": [0], "arrivals": [2]},
        ((), (0, 2)),
    ))
    if len(f) != 20:
        raise ContractError(f"oracle table must hold 20 cases, found {len(f)}")
    return tuple(f)


def run_case(case: OracleCase) -> tuple:
    """Evaluate the simulator on one case's inputs."""
    if case.kind == "fuel":
        return (fuel_rate(**case.inputs),)
    if case.kind == "move":
        progress, reached = advance_kinematics(**case.inputs)
        return (progress, reached)
    if case.kind == "berth":
        berthed, queue = allocate_berths(**case.inputs)
        return (tuple(berthed), tuple(queue))
    raise ContractError(f"unknown oracle case kind '{case.kind}'")


def case_error(got: tuple, expected: tuple) -> float:
    """Worst absolute deviation over all leaves of the result."""
    if len(got) != len(expected):
        return float("inf")
    worst = 0.0
    for g, e in zip(got, expected):
        if isinstance(e, tuple):
            worst = max(worst, 0.0 if tuple(g) == e else float("inf"))
        elif isinstance(e, bool):
            worst = max(worst, 0.0 if bool(g) == e else float("inf"))
        else:
            worst = max(worst, abs(float(g) - float(e)))
    return worst


def check_all() -> list[tuple[OracleCase, tuple, tuple, float]]:
    """Run every case; returns (case, got, expected, error) rows."""
    rows = []
    for case in dynamics_cases():
        got = run_case(case)
        rows.append((case, got, case.expected, case_error(got, case.expected)))
    return rows
