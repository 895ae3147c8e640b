"""Desk-scale maritime digital twin.

Discrete time, dt hours per tick. Vessels either occupy a berth, wait in a
FIFO port queue, sail an edge, or are retired after finishing their
itinerary. Weather is resampled per edge per tick and scales speed and fuel
burn; sailing fuel follows a cubic law in commanded speed, idling burns a
flat rate, retired vessels burn nothing.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, ContractError, DomainError
from .scenario import Scenario
from .seeding import stream_rng

CALM = 0
MODERATE = 1
STORM = 2

SPEED_MULT = np.array([1.0, 0.85, 0.7])
FUEL_MULT = np.array([1.0, 1.15, 1.3])

DEGRADE_PROB = 0.01
DEGRADE_FUEL_MULT = 1.1

# Observation layout (component indices). Length is OBS_LEN for every agent.
OBS_LEN = 17
_FUEL_OBS_SCALE = 2.0
_DIST_OBS_SCALE = 50.0


def sample_weather(rng: np.random.Generator, p_storm: float, p_moderate: float = 0.0) -> int:
    """Draw one weather state. Storm with p_storm, else moderate, else calm."""
    if not 0.0 <= p_storm <= 1.0 or not 0.0 <= p_moderate <= 1.0 - p_storm:
        raise DomainError(f"invalid weather probabilities p_storm={p_storm} p_moderate={p_moderate}")
    u = rng.random()
    if u < p_storm:
        return STORM
    if u < p_storm + p_moderate:
        return MODERATE
    return CALM


def fuel_rate(speed: float, weather: int, k_f: float, k_idle: float, degraded: bool = False) -> float:
    """Fuel burn in tons per hour for a commanded speed under given weather.

    Zero speed means engines idling at the flat rate; positive speed follows
    the cubic curve scaled by the weather multiplier and, for a degraded
    vessel, a further 1.1 factor.
    """
    if speed < 0.0:
        raise DomainError(f"speed must be non-negative, got {speed}")
    if weather not in (CALM, MODERATE, STORM):
        raise DomainError(f"unknown weather state {weather}")
    if speed == 0.0:
        return k_idle
    rate = k_f * speed**3 * FUEL_MULT[weather]
    if degraded:
        rate *= DEGRADE_FUEL_MULT
    return float(rate)


def advance_kinematics(
    progress: float,
    distance: float,
    speed: float,
    weather: int,
    dt: float,
) -> tuple[float, bool]:
    """Move along an edge for one tick; returns (new_progress, reached_end).

    Overshoot past the edge end is discarded, the vessel snaps to the node.
    """
    if speed < 0.0:
        raise DomainError(f"speed must be non-negative, got {speed}")
    new_progress = progress + speed * SPEED_MULT[weather] * dt
    if new_progress >= distance:
        return distance, True
    return float(new_progress), False


def allocate_berths(
    capacity: int,
    occupied: int,
    queue: list[int],
    arrivals: list[int],
) -> tuple[list[int], list[int]]:
    """FIFO berth assignment for one port and one tick.

    Existing queue entries have priority over this tick's arrivals; arrivals
    are enqueued in ascending vessel index. Returns (newly_berthed, queue').
    """
    if occupied > capacity:
        raise ContractError(f"occupied {occupied} exceeds capacity {capacity}")
    new_queue = list(queue) + sorted(arrivals)
    berthed: list[int] = []
    while occupied + len(berthed) < capacity and new_queue:
        berthed.append(new_queue.pop(0))
    return berthed, new_queue


@dataclass
class VesselState:
    index: int
    port: int | None
    edge: int | None = None
    progress: float = 0.0
    speed: float = 0.0
    fuel_used: float = 0.0
    emissions: float = 0.0
    degraded: bool = False
    berthed: bool = False
    queued: bool = False
    retired: bool = False
    itinerary: list[int] = field(default_factory=list)
    path: list[int] = field(default_factory=list)
    path_pos: int = 0
    voyages: int = 0


@dataclass
class StepMetrics:
    """Per-tick outputs consumed by reward shaping and KPI logging."""

    t: int
    step_fuel: np.ndarray
    step_emissions: np.ndarray
    base_rewards: np.ndarray
    completed: list[int]
    queue_hours: float
    cum_emissions: float


@dataclass
class Observation:
    values: np.ndarray
    present: np.ndarray


def mask_indices(rng: np.random.Generator, length: int, fraction: float) -> np.ndarray:
    """Indices to hide: floor(fraction * length) drawn without replacement."""
    if not 0.0 <= fraction <= 1.0:
        raise DomainError(f"mask fraction {fraction} outside [0, 1]")
    count = int(np.floor(fraction * length))
    if count == 0:
        return np.empty(0, dtype=np.int64)
    return np.sort(rng.choice(length, size=count, replace=False))


class Environment:
    """The twin. Deterministic given (scenario, horizon, seed, overrides)."""

    LOW = 0
    HIGH = 1

    def __init__(
        self,
        scenario: Scenario,
        horizon: int,
        seed: int,
        p_storm: float | None = None,
        mask_fraction: float | None = None,
        cap: float | None = None,
    ) -> None:
        if horizon < 1:
            raise ConfigurationError(f"horizon must be >= 1, got {horizon}")
        self.scenario = scenario
        self.horizon = horizon
        self.p_storm = scenario.p_storm if p_storm is None else p_storm
        self.mask_fraction = scenario.mask_fraction if mask_fraction is None else mask_fraction
        if not 0.0 <= self.mask_fraction <= 1.0:
            raise ConfigurationError(f"mask_fraction {self.mask_fraction} outside [0, 1]")
        self.cap = cap
        self.reset(seed)

    def reset(self, seed: int) -> None:
        sc = self.scenario
        self.seed = seed
        self._weather_rng = stream_rng(seed, 0)
        self._degrade_rng = stream_rng(seed, 1)
        n = sc.n_vessels
        self._mask_rngs = {
            (level, agent): stream_rng(seed, 2, level, agent)
            for level in (self.LOW, self.HIGH)
            for agent in range(n)
        }
        self.t = 0
        self.weather = np.zeros(len(sc.edges), dtype=np.int64)
        self.vessels = [
            VesselState(index=i, port=spec.start, itinerary=list(spec.itinerary))
            for i, spec in enumerate(sc.vessels)
        ]
        self.queues: list[list[int]] = [[] for _ in sc.ports]
        self.occupied = np.zeros(sc.n_ports, dtype=np.int64)
        self.cum_emissions = 0.0
        self.total_queue_hours = 0.0
        self.throughput = 0
        self._max_legs = max((len(v.itinerary) for v in self.vessels), default=1)
        # Initial berthing uses the same FIFO rule as a normal tick.
        arrivals_by_port: dict[int, list[int]] = {}
        for v in self.vessels:
            arrivals_by_port.setdefault(v.port, []).append(v.index)
        for port in range(sc.n_ports):
            arrivals = arrivals_by_port.get(port, [])
            if not arrivals:
                continue
            berthed, queue = allocate_berths(sc.ports[port].berth_capacity, 0, [], arrivals)
            for vi in berthed:
                self.vessels[vi].berthed = True
            for vi in queue:
                self.vessels[vi].queued = True
            self.occupied[port] = len(berthed)
            self.queues[port] = queue

    # -- internal helpers -------------------------------------------------

    def _retire_finished(self) -> None:
        for v in self.vessels:
            if v.berthed and not v.itinerary:
                self._release_berth(v)
                v.retired = True
                v.speed = 0.0

    def _release_berth(self, v: VesselState) -> None:
        if not v.berthed:
            raise ContractError(f"vessel {v.index} is not occupying a berth")
        if self.occupied[v.port] <= 0:
            raise ContractError(f"berth accounting underflow at port {v.port}")
        v.berthed = False
        self.occupied[v.port] -= 1

    def _depart(self, v: VesselState, route_choice: int) -> None:
        origin = v.port
        dest = v.itinerary[0]
        options = self.scenario.route_options(origin, dest)
        if not 0 <= route_choice < len(options):
            raise ContractError(
                f"route choice {route_choice} invalid for "
                f"{self.scenario.ports[origin].name} -> {self.scenario.ports[dest].name}"
            )
        self._release_berth(v)
        v.port = None
        v.path = list(options[route_choice])
        v.path_pos = 0
        v.edge = v.path[0]
        v.progress = 0.0

    def _burn(self, v: VesselState, rate: float) -> float:
        fuel = rate * self.scenario.dt
        v.fuel_used += fuel
        emission = fuel * self.scenario.emission_factor
        v.emissions += emission
        return fuel

    # -- public API --------------------------------------------------------

    def step(self, speeds: np.ndarray, routes: np.ndarray) -> StepMetrics:
        """Advance one tick under the given per-vessel commands."""
        sc = self.scenario
        n = sc.n_vessels
        if len(speeds) != n or len(routes) != n:
            raise ContractError(
                f"expected {n} vessel commands, got {len(speeds)} speeds / {len(routes)} routes"
            )
        for s in speeds:
            if not 0.0 <= float(s) <= sc.v_max:
                raise DomainError(f"commanded speed {s} outside [0, {sc.v_max}]")

        self._retire_finished()

        for e in range(len(sc.edges)):
            self.weather[e] = sample_weather(self._weather_rng, self.p_storm)
        for v in self.vessels:
            if not v.retired and not v.degraded:
                if self._degrade_rng.random() < DEGRADE_PROB:
                    v.degraded = True

        step_fuel = np.zeros(n)
        arrivals_by_port: dict[int, list[int]] = {}
        for v in self.vessels:
            if v.retired:
                v.speed = 0.0
                continue
            cmd = float(speeds[v.index])
            if v.queued:
                v.speed = 0.0
                step_fuel[v.index] = self._burn(v, fuel_rate(0.0, CALM, sc.k_f, sc.k_idle))
                continue
            if v.berthed:
                if cmd > 0.0 and v.itinerary:
                    self._depart(v, int(routes[v.index]))
                else:
                    v.speed = 0.0
                    step_fuel[v.index] = self._burn(v, fuel_rate(0.0, CALM, sc.k_f, sc.k_idle))
                    continue
            # On an edge (possibly having just departed).
            v.speed = cmd
            w = int(self.weather[v.edge])
            step_fuel[v.index] = self._burn(
                v, fuel_rate(cmd, w, sc.k_f, sc.k_idle, v.degraded)
            )
            if cmd == 0.0:
                continue
            edge = sc.edges[v.edge]
            v.progress, reached = advance_kinematics(v.progress, edge.distance, cmd, w, sc.dt)
            if reached:
                if v.path_pos + 1 < len(v.path):
                    v.path_pos += 1
                    v.edge = v.path[v.path_pos]
                    v.progress = 0.0
                else:
                    v.edge = None
                    v.path = []
                    v.path_pos = 0
                    v.progress = 0.0
                    v.port = edge.destination
                    arrivals_by_port.setdefault(v.port, []).append(v.index)

        completed: list[int] = []
        queue_hours = 0.0
        for port in range(sc.n_ports):
            arrivals = arrivals_by_port.get(port, [])
            if arrivals or self.queues[port]:
                berthed, queue = allocate_berths(
                    sc.ports[port].berth_capacity,
                    int(self.occupied[port]),
                    self.queues[port],
                    arrivals,
                )
                for vi in berthed:
                    v = self.vessels[vi]
                    v.berthed = True
                    v.queued = False
                    self.occupied[port] += 1
                    if v.itinerary and v.itinerary[0] == port:
                        v.itinerary.pop(0)
                        v.voyages += 1
                        self.throughput += 1
                        completed.append(vi)
                for vi in queue:
                    self.vessels[vi].queued = True
                self.queues[port] = queue
            queue_hours += len(self.queues[port]) * sc.dt
        self.total_queue_hours += queue_hours

        # Fixed ascending summation order keeps this exactly equal to the
        # sum of per-vessel emission counters.
        cum = 0.0
        for v in self.vessels:
            cum += v.emissions
        self.cum_emissions = cum

        step_emissions = step_fuel * sc.emission_factor
        metrics = StepMetrics(
            t=self.t,
            step_fuel=step_fuel,
            step_emissions=step_emissions,
            base_rewards=-step_fuel,
            completed=completed,
            queue_hours=queue_hours,
            cum_emissions=self.cum_emissions,
        )
        self.t += 1
        return metrics

    def observe(self, level: int, agent: int) -> Observation:
        """Feature vector for one agent at one level, with the privacy mask.

        Components: position flags and kinematics, own fuel and health,
        destination port congestion, current-edge weather one-hot, the
        normalized remaining emission headroom, and normalized time.
        """
        sc = self.scenario
        if not 0 <= agent < sc.n_vessels:
            raise ContractError(f"agent index {agent} out of range")
        v = self.vessels[agent]
        values = np.zeros(OBS_LEN)
        at_port = v.port is not None and v.edge is None
        values[0] = 1.0 if at_port else 0.0
        values[1] = 1.0 if v.edge is not None else 0.0
        if v.edge is not None:
            dist = sc.edges[v.edge].distance
            values[2] = v.progress / dist
            values[11] = (dist - v.progress) / _DIST_OBS_SCALE
        values[3] = v.speed / sc.v_max
        values[4] = v.fuel_used / _FUEL_OBS_SCALE
        values[5] = 1.0 if v.degraded else 0.0
        values[6] = 1.0 if v.queued else 0.0
        values[7] = 1.0 if v.retired else 0.0
        values[8] = len(v.itinerary) / self._max_legs
        dest = v.itinerary[0] if v.itinerary else (v.port if v.port is not None else 0)
        values[9] = len(self.queues[dest]) / max(1, sc.n_vessels)
        values[10] = self.occupied[dest] / sc.ports[dest].berth_capacity
        w = CALM if v.edge is None else int(self.weather[v.edge])
        values[12 + w] = 1.0
        if self.cap is None:
            values[15] = 1.0
        else:
            values[15] = max(-1.0, (self.cap - self.cum_emissions) / self.cap)
        values[16] = self.t / self.horizon

        present = np.ones(OBS_LEN, dtype=bool)
        if self.mask_fraction > 0.0:
            hidden = mask_indices(self._mask_rngs[(level, agent)], OBS_LEN, self.mask_fraction)
            present[hidden] = False
            values[hidden] = 0.0
        return Observation(values=values, present=present)

    def check_state(self) -> None:
        """Cheap structural audit; raises StateCorruptionError on breakage."""
        from .errors import StateCorruptionError

        for port in range(self.scenario.n_ports):
            cap = self.scenario.ports[port].berth_capacity
            if self.occupied[port] > cap:
                raise StateCorruptionError(f"port {port} over capacity")
            if self.queues[port] and self.occupied[port] != cap:
                raise StateCorruptionError(f"port {port} queue with free berth")
        for v in self.vessels:
            if v.fuel_used < 0 or v.emissions < 0:
                raise StateCorruptionError(f"vessel {v.index} negative fuel accounting")
