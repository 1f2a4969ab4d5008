"""Core domain types: instances, tours, solutions and the solution multigraph.

Node 0 is always the depot at (0, 0); packages are numbered 1..n_p. A tour
is a depot-anchored directed cycle with a per-edge carry annotation: truck
edges carry a set of drone indices, drone edges carry the index of the truck
they ride (0 = flying alone). Drones that never leave the depot are stored
as the degenerate tour ``(0,)``.

All types are immutable; moves and constructors build modified copies.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Iterable, NamedTuple


class VrdError(Exception):
    """Base class for errors raised by this package."""


class FormatError(VrdError):
    """Malformed instance or solution document."""


class CarryInconsistencyError(VrdError):
    """Carry annotations of trucks and drones do not match up."""


class InconsistentScheduleError(VrdError):
    """The synchronized timetable cannot be completed (circular waiting)."""


class Point(NamedTuple):
    x: int
    y: int


DEPOT = Point(0, 0)

TRUCK = "truck"
DRONE = "drone"


@dataclass(frozen=True)
class VehicleId:
    kind: str  # TRUCK or DRONE
    index: int  # 1-based within its kind

    def __post_init__(self):
        if self.kind not in (TRUCK, DRONE):
            raise ValueError(f"unknown vehicle kind {self.kind!r}")
        if self.index < 1:
            raise ValueError("vehicle index is 1-based")

    def __str__(self) -> str:
        return f"{self.kind}{self.index}"


@dataclass(frozen=True)
class Instance:
    """Problem data: fleet sizes, package positions and the drone range.

    ``positions[k-1]`` is the position of package node k. The drone range
    bounds the total length of a single flight (a maximal run of flying
    edges), not of an individual edge.
    """

    n_t: int
    n_d: int
    n_p: int
    positions: tuple[Point, ...]
    drone_range: float

    def __post_init__(self):
        if self.n_t < 1:
            raise FormatError("need at least one truck")
        if self.n_d < 0 or self.n_p < 1:
            raise FormatError("negative drone count or empty package set")
        if len(self.positions) != self.n_p:
            raise FormatError(
                f"expected {self.n_p} positions, got {len(self.positions)}"
            )
        if self.drone_range < 0:
            raise FormatError("drone range must be nonnegative")
        for i, p in enumerate(self.positions):
            if (p.x, p.y) == (0, 0):
                raise FormatError(f"package {i + 1} at depot (0,0)")

    def position(self, node: int) -> Point:
        """Position of a node; node 0 is the depot."""
        if node == 0:
            return DEPOT
        return self.positions[node - 1]


@dataclass(frozen=True)
class Tour:
    """A depot-anchored directed cycle with per-edge carry annotations.

    ``carry[i]`` annotates the edge nodes[i] -> nodes[i+1]: a frozenset of
    drone indices for trucks, an int in {0, 1..n_t} for drones. The
    degenerate tour ``(0,)`` (idle drone) has no edges.
    """

    vehicle: VehicleId
    nodes: tuple[int, ...]
    carry: tuple

    def __post_init__(self):
        n = self.nodes
        if len(n) == 0:
            raise FormatError("empty node list")
        if n[0] != 0 or n[-1] != 0:
            raise FormatError(f"{self.vehicle}: tour must start and end at the depot")
        if len(n) == 2:
            raise FormatError(f"{self.vehicle}: tour (0, 0) has a zero-length edge")
        interior = n[1:-1]
        if any(v == 0 for v in interior):
            raise FormatError(f"{self.vehicle}: depot revisited mid-tour")
        if len(set(interior)) != len(interior):
            raise FormatError(f"{self.vehicle}: repeated node in tour")
        if len(self.carry) != max(len(n) - 1, 0):
            raise FormatError(f"{self.vehicle}: need one carry entry per edge")
        if self.vehicle.kind == TRUCK:
            if not all(isinstance(c, frozenset) for c in self.carry):
                raise FormatError(f"{self.vehicle}: truck carry entries must be sets")
        else:
            if not all(isinstance(c, int) and c >= 0 for c in self.carry):
                raise FormatError(
                    f"{self.vehicle}: drone carried entries must be ints >= 0"
                )

    @property
    def is_idle(self) -> bool:
        return len(self.nodes) == 1

    def edges(self) -> Iterable[tuple[int, int]]:
        return zip(self.nodes, self.nodes[1:])

    def edge_index(self) -> dict[tuple[int, int], int]:
        """Map (u, v) -> edge position. Unambiguous: tours are simple cycles."""
        return {(u, v): i for i, (u, v) in enumerate(self.edges())}


def truck_tour(index: int, nodes, carry=None) -> Tour:
    nodes = tuple(nodes)
    if carry is None:
        carry = tuple(frozenset() for _ in range(len(nodes) - 1))
    else:
        carry = tuple(frozenset(c) for c in carry)
    return Tour(VehicleId(TRUCK, index), nodes, carry)


def drone_tour(index: int, nodes, carried=None) -> Tour:
    nodes = tuple(nodes)
    if carried is None:
        carried = tuple(0 for _ in range(len(nodes) - 1))
    else:
        carried = tuple(int(c) for c in carried)
    return Tour(VehicleId(DRONE, index), nodes, carried)


def idle_drone(index: int) -> Tour:
    return Tour(VehicleId(DRONE, index), (0,), ())


@dataclass(frozen=True)
class Solution:
    """One tour per truck and per drone."""

    truck_tours: tuple[Tour, ...]
    drone_tours: tuple[Tour, ...]

    def __post_init__(self):
        for i, t in enumerate(self.truck_tours, start=1):
            if t.vehicle != VehicleId(TRUCK, i):
                raise FormatError(f"truck tour {i} labelled {t.vehicle}")
            if t.is_idle:
                raise FormatError(f"truck {i} has an empty tour")
        for i, d in enumerate(self.drone_tours, start=1):
            if d.vehicle != VehicleId(DRONE, i):
                raise FormatError(f"drone tour {i} labelled {d.vehicle}")
        n_t, n_d = len(self.truck_tours), len(self.drone_tours)
        for t in self.truck_tours:
            for c in t.carry:
                for d in c:
                    if not 1 <= d <= n_d:
                        raise FormatError(f"{t.vehicle} carries unknown drone {d}")
        for d in self.drone_tours:
            for c in d.carry:
                if c > n_t:
                    raise FormatError(f"{d.vehicle} rides unknown truck {c}")

    @property
    def n_t(self) -> int:
        return len(self.truck_tours)

    @property
    def n_d(self) -> int:
        return len(self.drone_tours)

    def tours(self) -> Iterable[Tour]:
        yield from self.truck_tours
        yield from self.drone_tours

    def truck(self, index: int) -> Tour:
        return self.truck_tours[index - 1]

    def drone(self, index: int) -> Tour:
        return self.drone_tours[index - 1]

    def visited_nodes(self) -> set[int]:
        out: set[int] = set()
        for t in self.tours():
            out.update(t.nodes[1:-1])
        return out

    def with_tour(self, tour: Tour) -> "Solution":
        """Copy of this solution with one tour replaced."""
        if tour.vehicle.kind == TRUCK:
            tt = list(self.truck_tours)
            tt[tour.vehicle.index - 1] = tour
            return Solution(tuple(tt), self.drone_tours)
        dt = list(self.drone_tours)
        dt[tour.vehicle.index - 1] = tour
        return Solution(self.truck_tours, tuple(dt))

    def with_tours(self, tours: Iterable[Tour]) -> "Solution":
        sol = self
        for t in tours:
            sol = sol.with_tour(t)
        return sol


@dataclass(frozen=True)
class GraphEdge:
    u: int
    v: int
    vehicle: VehicleId
    carry: object  # frozenset for truck edges, int for drone edges

    @property
    def flying(self) -> bool:
        return self.vehicle.kind == DRONE and self.carry == 0


@dataclass(frozen=True)
class SolutionGraph:
    """Directed multigraph: the union of all tour edges, tagged by vehicle."""

    n_nodes: int  # nodes are 0..n_nodes-1
    edges: tuple[GraphEdge, ...]


def build_solution_graph(s: Solution, n_p: int | None = None) -> SolutionGraph:
    edges = []
    for t in s.tours():
        for i, (u, v) in enumerate(t.edges()):
            edges.append(GraphEdge(u, v, t.vehicle, t.carry[i]))
    if n_p is None:
        n_p = max((max(t.nodes) for t in s.tours()), default=0)
    return SolutionGraph(n_p + 1, tuple(edges))


def essentially_equal_partition(g: SolutionGraph) -> list[list[int]]:
    """Group edge indices into joint-travel classes.

    Each class is one truck edge together with the matching edges of the
    drones it carries; flying and unaccompanied edges are singletons.
    Raises CarryInconsistencyError when annotations do not match up.
    """
    by_key: dict[tuple[int, int, int], int] = {}
    classes: list[list[int]] = []
    drone_edges = []
    for i, e in enumerate(g.edges):
        if e.vehicle.kind == TRUCK:
            if e.carry:
                by_key[(e.vehicle.index, e.u, e.v)] = len(classes)
                classes.append([i])
            else:
                classes.append([i])
        else:
            drone_edges.append(i)
    for i in drone_edges:
        e = g.edges[i]
        if e.carry == 0:
            classes.append([i])
            continue
        key = (e.carry, e.u, e.v)
        if key not in by_key:
            raise CarryInconsistencyError(
                f"{e.vehicle} rides truck {e.carry} on edge {e.u}->{e.v}, "
                "but no matching truck edge carries it"
            )
        cls = classes[by_key[key]]
        truck_edge = g.edges[cls[0]]
        if e.vehicle.index not in truck_edge.carry:
            raise CarryInconsistencyError(
                f"truck {e.carry} does not list {e.vehicle} on edge {e.u}->{e.v}"
            )
        cls.append(i)
    for cls in classes:
        e = g.edges[cls[0]]
        if e.vehicle.kind == TRUCK and e.carry:
            if len(cls) != 1 + len(e.carry):
                missing = set(e.carry) - {g.edges[i].vehicle.index for i in cls[1:]}
                raise CarryInconsistencyError(
                    f"truck {e.vehicle.index} edge {e.u}->{e.v} carries drones "
                    f"{sorted(missing)} whose tours lack the edge"
                )
    return classes


# --- instance / solution documents (JSON, UTF-8) ---


def parse_instance(text: str) -> Instance:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise FormatError(f"instance document is not valid JSON: {exc}") from exc
    try:
        positions = tuple(Point(int(x), int(y)) for x, y in doc["positions"])
        return Instance(
            n_t=int(doc["n_t"]),
            n_d=int(doc["n_d"]),
            n_p=int(doc["n_p"]),
            positions=positions,
            drone_range=float(doc["drone_range"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, FormatError):
            raise
        raise FormatError(f"malformed instance document: {exc}") from exc


def serialize_instance(inst: Instance) -> str:
    doc = {
        "n_t": inst.n_t,
        "n_d": inst.n_d,
        "n_p": inst.n_p,
        "drone_range": inst.drone_range,
        "positions": [[p.x, p.y] for p in inst.positions],
    }
    return json.dumps(doc)


def serialize_solution(s: Solution) -> str:
    doc = {
        "trucks": [
            {"nodes": list(t.nodes), "carry": [sorted(c) for c in t.carry]}
            for t in s.truck_tours
        ],
        "drones": [
            {"nodes": list(d.nodes), "carried": list(d.carry)}
            for d in s.drone_tours
        ],
    }
    return json.dumps(doc)


def parse_solution(text: str, inst: Instance) -> Solution:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise FormatError(f"solution document is not valid JSON: {exc}") from exc
    try:
        trucks = tuple(
            truck_tour(i, t["nodes"], t["carry"])
            for i, t in enumerate(doc["trucks"], start=1)
        )
        drones = tuple(
            drone_tour(i, d["nodes"], d["carried"])
            for i, d in enumerate(doc["drones"], start=1)
        )
    except (KeyError, TypeError) as exc:
        raise FormatError(f"malformed solution document: {exc}") from exc
    if len(trucks) != inst.n_t or len(drones) != inst.n_d:
        raise FormatError(
            f"solution has {len(trucks)} trucks / {len(drones)} drones, "
            f"instance wants {inst.n_t} / {inst.n_d}"
        )
    sol = Solution(trucks, drones)
    for t in sol.tours():
        for v in t.nodes:
            if not 0 <= v <= inst.n_p:
                raise FormatError(f"{t.vehicle}: node {v} out of range")
    return sol


def manhattan(a: Point, b: Point) -> float:
    return float(abs(a.x - b.x) + abs(a.y - b.y))


def euclid(a: Point, b: Point) -> float:
    return math.hypot(a.x - b.x, a.y - b.y)
