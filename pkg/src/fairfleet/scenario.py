"""Scenario schema: the port network, fleet, and physical constants.

A scenario is a JSON document with exactly these top-level fields:
ports, edges, routes, vessels, p_storm, mask_fraction, k_f, k_idle,
v_max, emission_factor, dt. Unknown fields are rejected so typos fail
loudly instead of silently using a default.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any

from .errors import ConfigurationError

SCENARIO_FIELDS = {
    "ports",
    "edges",
    "routes",
    "vessels",
    "p_storm",
    "mask_fraction",
    "k_f",
    "k_idle",
    "v_max",
    "emission_factor",
    "dt",
}

MAX_ROUTE_OPTIONS = 3


@dataclass(frozen=True)
class Port:
    name: str
    berth_capacity: int


@dataclass(frozen=True)
class Edge:
    name: str
    origin: int
    destination: int
    distance: float


@dataclass(frozen=True)
class VesselSpec:
    name: str
    start: int
    itinerary: tuple[int, ...]


@dataclass(frozen=True)
class Scenario:
    """Validated scenario with string ids resolved to integer indices."""

    ports: tuple[Port, ...]
    edges: tuple[Edge, ...]
    # (origin, destination) -> tuple of paths, each a tuple of edge indices
    routes: dict[tuple[int, int], tuple[tuple[int, ...], ...]] = field(repr=False)
    vessels: tuple[VesselSpec, ...] = ()
    p_storm: float = 0.2
    mask_fraction: float = 0.0
    k_f: float = 3.0e-4
    k_idle: float = 0.02
    v_max: float = 20.0
    emission_factor: float = 1.0
    dt: float = 1.0

    @property
    def n_ports(self) -> int:
        return len(self.ports)

    @property
    def n_vessels(self) -> int:
        return len(self.vessels)

    def route_options(self, origin: int, destination: int) -> tuple[tuple[int, ...], ...]:
        try:
            return self.routes[(origin, destination)]
        except KeyError:
            raise ConfigurationError(
                f"no route defined from port {self.ports[origin].name} "
                f"to port {self.ports[destination].name}"
            ) from None


def _require(cond: bool, msg: str) -> None:
    if not cond:
        raise ConfigurationError(msg)


def _check_number(raw: dict[str, Any], key: str, lo: float, hi: float) -> float:
    value = raw[key]
    _require(isinstance(value, (int, float)) and not isinstance(value, bool),
             f"scenario field '{key}' must be a number")
    _require(lo <= float(value) <= hi,
             f"scenario field '{key}'={value} outside [{lo}, {hi}]")
    return float(value)


def parse_scenario(raw: dict[str, Any]) -> Scenario:
    """Validate a raw scenario dict and resolve ids to indices."""
    _require(isinstance(raw, dict), "scenario must be a JSON object")
    unknown = set(raw) - SCENARIO_FIELDS
    _require(not unknown, f"unknown scenario field(s): {sorted(unknown)}")
    missing = SCENARIO_FIELDS - set(raw)
    _require(not missing, f"missing scenario field(s): {sorted(missing)}")

    ports: list[Port] = []
    port_index: dict[str, int] = {}
    for entry in raw["ports"]:
        _require(isinstance(entry, dict) and set(entry) == {"id", "berth_capacity"},
                 f"port entry must have exactly id and berth_capacity: {entry}")
        pid = entry["id"]
        _require(isinstance(pid, str) and pid, "port id must be a non-empty string")
        _require(pid not in port_index, f"duplicate port id '{pid}'")
        cap = entry["berth_capacity"]
        _require(isinstance(cap, int) and not isinstance(cap, bool) and cap >= 1,
                 f"berth_capacity of port '{pid}' must be an integer >= 1")
        port_index[pid] = len(ports)
        ports.append(Port(pid, cap))
    _require(len(ports) > 0, "scenario needs at least one port")

    edges: list[Edge] = []
    edge_index: dict[str, int] = {}
    for entry in raw["edges"]:
        _require(isinstance(entry, dict)
                 and set(entry) == {"id", "origin", "destination", "distance"},
                 f"edge entry must have exactly id, origin, destination, distance: {entry}")
        eid = entry["id"]
        _require(isinstance(eid, str) and eid, "edge id must be a non-empty string")
        _require(eid not in edge_index, f"duplicate edge id '{eid}'")
        for endpoint in ("origin", "destination"):
            _require(entry[endpoint] in port_index,
                     f"edge '{eid}' references missing port '{entry[endpoint]}'")
        dist = entry["distance"]
        _require(isinstance(dist, (int, float)) and not isinstance(dist, bool)
                 and float(dist) > 0.0,
                 f"edge '{eid}' distance must be a positive number")
        _require(entry["origin"] != entry["destination"],
                 f"edge '{eid}' is a self-loop")
        edge_index[eid] = len(edges)
        edges.append(Edge(eid, port_index[entry["origin"]],
                          port_index[entry["destination"]], float(dist)))

    routes: dict[tuple[int, int], tuple[tuple[int, ...], ...]] = {}
    for entry in raw["routes"]:
        _require(isinstance(entry, dict) and set(entry) == {"origin", "destination", "paths"},
                 f"route entry must have exactly origin, destination, paths: {entry}")
        for endpoint in ("origin", "destination"):
            _require(entry[endpoint] in port_index,
                     f"route references missing port '{entry[endpoint]}'")
        o = port_index[entry["origin"]]
        d = port_index[entry["destination"]]
        _require(o != d, f"route from '{entry['origin']}' to itself")
        _require((o, d) not in routes,
                 f"duplicate route entry for {entry['origin']} -> {entry['destination']}")
        paths = entry["paths"]
        _require(isinstance(paths, list) and 1 <= len(paths) <= MAX_ROUTE_OPTIONS,
                 f"route {entry['origin']} -> {entry['destination']} must list 1 to "
                 f"{MAX_ROUTE_OPTIONS} paths")
        resolved: list[tuple[int, ...]] = []
        for path in paths:
            _require(isinstance(path, list) and len(path) >= 1,
                     "each route path must be a non-empty list of edge ids")
            ids = []
            for eid in path:
                _require(eid in edge_index,
                         f"route path references missing edge '{eid}'")
                ids.append(edge_index[eid])
            at = o
            for ei in ids:
                _require(edges[ei].origin == at,
                         f"path {path} is not contiguous at edge '{edges[ei].name}'")
                at = edges[ei].destination
            _require(at == d, f"path {path} does not end at '{entry['destination']}'")
            resolved.append(tuple(ids))
        routes[(o, d)] = tuple(resolved)

    vessels: list[VesselSpec] = []
    seen_vessels: set[str] = set()
    for entry in raw["vessels"]:
        _require(isinstance(entry, dict) and set(entry) == {"id", "start", "itinerary"},
                 f"vessel entry must have exactly id, start, itinerary: {entry}")
        vid = entry["id"]
        _require(isinstance(vid, str) and vid, "vessel id must be a non-empty string")
        _require(vid not in seen_vessels, f"duplicate vessel id '{vid}'")
        seen_vessels.add(vid)
        _require(entry["start"] in port_index,
                 f"vessel '{vid}' starts at missing port '{entry['start']}'")
        itinerary = entry["itinerary"]
        _require(isinstance(itinerary, list),
                 f"vessel '{vid}' itinerary must be a list of port ids")
        stops = []
        at = port_index[entry["start"]]
        for stop in itinerary:
            _require(stop in port_index,
                     f"vessel '{vid}' itinerary references missing port '{stop}'")
            nxt = port_index[stop]
            _require((at, nxt) in routes,
                     f"vessel '{vid}' leg {ports[at].name} -> {stop} has no route")
            stops.append(nxt)
            at = nxt
        vessels.append(VesselSpec(vid, port_index[entry["start"]], tuple(stops)))

    scenario = Scenario(
        ports=tuple(ports),
        edges=tuple(edges),
        routes=routes,
        vessels=tuple(vessels),
        p_storm=_check_number(raw, "p_storm", 0.0, 1.0),
        mask_fraction=_check_number(raw, "mask_fraction", 0.0, 1.0),
        k_f=_check_number(raw, "k_f", 0.0, 1.0),
        k_idle=_check_number(raw, "k_idle", 0.0, 10.0),
        v_max=_check_number(raw, "v_max", 1.0, 100.0),
        emission_factor=_check_number(raw, "emission_factor", 0.0, 100.0),
        dt=_check_number(raw, "dt", 1e-6, 24.0),
    )
    return scenario


def load_scenario(path: str) -> Scenario:
    """Parse a scenario JSON file."""
    with open(path, "r", encoding="utf-8") as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigurationError(f"scenario file {path} is not valid JSON: {exc}") from exc
    return parse_scenario(raw)


def default_scenario_dict() -> dict[str, Any]:
    """The built-in desk-scale network: 8 ports, 5 vessels, staggered workloads.

    Itinerary lengths are deliberately uneven (25 to 140 nm in total) so that
    per-vessel fuel burdens stay spread out. Two vessels share the
    single-berth ports P3 and P4 to exercise queueing, and several lanes
    offer a shortcut as a non-default route option so that route choice
    carries real cost.
    """
    edges = [
        ("E0", "P0", "P1", 25.0),
        ("E1", "P1", "P2", 20.0),
        ("E2", "P2", "P3", 30.0),
        ("E3", "P3", "P4", 25.0),
        ("E4", "P4", "P5", 35.0),
        ("E5", "P5", "P6", 20.0),
        ("E6", "P6", "P7", 30.0),
        ("E7", "P7", "P0", 25.0),
        ("E8", "P0", "P3", 45.0),
        ("E9", "P3", "P0", 45.0),
        ("E10", "P2", "P5", 40.0),
        ("E11", "P5", "P2", 40.0),
        ("E12", "P1", "P0", 25.0),
        ("E13", "P2", "P1", 20.0),
        ("E14", "P4", "P3", 25.0),
        ("E15", "P7", "P6", 30.0),
    ]
    routes = [
        ("P0", "P1", [["E0"]]),
        ("P1", "P2", [["E1"]]),
        ("P2", "P3", [["E13", "E12", "E8"], ["E2"]]),
        ("P3", "P4", [["E3"]]),
        ("P4", "P5", [["E4"]]),
        ("P5", "P6", [["E5"]]),
        ("P6", "P7", [["E6"]]),
        ("P7", "P0", [["E7"]]),
        ("P0", "P3", [["E0", "E1", "E2"], ["E8"]]),
        ("P2", "P5", [["E2", "E3", "E4"], ["E10"]]),
        ("P1", "P0", [["E12"]]),
        ("P2", "P1", [["E13"]]),
        ("P4", "P3", [["E14"]]),
        ("P7", "P6", [["E15"]]),
        ("P3", "P0", [["E9"], ["E3", "E4", "E5", "E6", "E7"]]),
    ]
    vessels = [
        ("V0", "P0", ["P1"]),
        ("V1", "P1", ["P2", "P1"]),
        ("V2", "P2", ["P3", "P4", "P3", "P0"]),
        ("V3", "P0", ["P3", "P4", "P5", "P6"]),
        ("V4", "P2", ["P5", "P6", "P7", "P0", "P1"]),
    ]
    return {
        "ports": [
            {"id": "P0", "berth_capacity": 2},
            {"id": "P1", "berth_capacity": 1},
            {"id": "P2", "berth_capacity": 2},
            {"id": "P3", "berth_capacity": 1},
            {"id": "P4", "berth_capacity": 1},
            {"id": "P5", "berth_capacity": 1},
            {"id": "P6", "berth_capacity": 1},
            {"id": "P7", "berth_capacity": 2},
        ],
        "edges": [
            {"id": eid, "origin": o, "destination": d, "distance": dist}
            for eid, o, d, dist in edges
        ],
        "routes": [
            {"origin": o, "destination": d, "paths": paths}
            for o, d, paths in routes
        ],
        "vessels": [
            {"id": vid, "start": start, "itinerary": itin}
            for vid, start, itin in vessels
        ],
        "p_storm": 0.2,
        "mask_fraction": 0.0,
        "k_f": 3.0e-4,
        "k_idle": 0.02,
        "v_max": 20.0,
        "emission_factor": 1.0,
        "dt": 1.0,
    }


def default_scenario() -> Scenario:
    return parse_scenario(default_scenario_dict())
