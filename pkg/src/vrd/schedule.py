"""Synchronized timetable and objective (average delivery time).

Trucks and ridden drones move on the Manhattan metric, flying drones on the
Euclidean metric, all at speed 1. Vehicles travelling an edge together form
a joint-travel class and depart at the latest arrival among them, so
vehicles wait for each other. The timetable is evaluated by a worklist over
these classes; it stalls exactly on schedule-inconsistent input.

A package is delivered by the first arriving vehicle that is not a drone
which already delivered a package on its current flight; ties go to trucks,
then to the lowest vehicle index.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

from .model import (
    CarryInconsistencyError,
    InconsistentScheduleError,
    Instance,
    Point,
    Solution,
    VehicleId,
    euclid,
    manhattan,
)


def edge_length(kind: str, a: Point, b: Point) -> float:
    """Length of one edge traversal: 'truck'/'ride' Manhattan, 'fly' Euclidean."""
    if kind in ("truck", "ride"):
        return manhattan(a, b)
    if kind == "fly":
        return euclid(a, b)
    raise ValueError(f"unknown traversal kind {kind!r}")


class Delivery(NamedTuple):
    time: float
    vehicle: VehicleId


@dataclass(frozen=True)
class Schedule:
    """Arrival/departure per tour position plus per-package deliveries.

    ``arrivals[v][p]`` is vehicle v's arrival at its tour position p
    (position 0 is the depot at time 0). ``departures[v][p]`` is the
    departure onto the edge leaving position p; at the final position the
    vehicle stays, so departure equals arrival there.
    """

    arrivals: dict[VehicleId, tuple[float, ...]]
    departures: dict[VehicleId, tuple[float, ...]]
    deliveries: dict[int, Delivery]


def _timetable(s: Solution, inst: Instance):
    """Arrival and departure times per vehicle slot (trucks, then drones).

    Returns (arrivals, departures) where arrivals[slot][pos-1] is the
    arrival at tour position pos. Raises InconsistentScheduleError when the
    worklist stalls (defense in depth; cannot happen for feasible input).
    """
    tours = list(s.tours())
    pts = [[inst.position(v) for v in t.nodes] for t in tours]
    n_t = s.n_t

    members: list[list[tuple[int, int]]] = []  # class id -> [(slot, edge pos)]
    lengths: list[float] = []
    class_of: list[list[int]] = []
    for ti in range(n_t):
        p = pts[ti]
        row = []
        for pos in range(len(tours[ti].nodes) - 1):
            a, b = p[pos], p[pos + 1]
            row.append(len(members))
            members.append([(ti, pos)])
            lengths.append(float(abs(a.x - b.x) + abs(a.y - b.y)))
        class_of.append(row)
    truck_index = [t.edge_index() for t in s.truck_tours]
    for di, d in enumerate(s.drone_tours):
        slot = n_t + di
        p = pts[slot]
        row = []
        for pos in range(len(d.nodes) - 1):
            c = d.carry[pos]
            if c == 0:
                a, b = p[pos], p[pos + 1]
                row.append(len(members))
                members.append([(slot, pos)])
                lengths.append(math.hypot(a.x - b.x, a.y - b.y))
            else:
                uv = (d.nodes[pos], d.nodes[pos + 1])
                tpos = truck_index[c - 1].get(uv)
                if tpos is None or (di + 1) not in s.truck(c).carry[tpos]:
                    raise CarryInconsistencyError(
                        f"drone {di + 1} rides truck {c} on {uv[0]}->{uv[1]} "
                        "but the truck tour disagrees"
                    )
                ci = class_of[c - 1][tpos]
                members[ci].append((slot, pos))
                row.append(ci)
        class_of.append(row)

    n_edges = [len(t.nodes) - 1 for t in tours]
    ready = [0] * len(members)
    time_at = [0.0] * len(tours)
    ptr = [0] * len(tours)
    arrivals: list[list[float]] = [[] for _ in tours]
    departures: list[list[float]] = [[] for _ in tours]
    queue: list[int] = []
    for slot in range(len(tours)):
        if n_edges[slot]:
            ci = class_of[slot][0]
            ready[ci] += 1
            if ready[ci] == len(members[ci]):
                queue.append(ci)
    processed = 0
    while queue:
        ci = queue.pop()
        dep = max(time_at[slot] for slot, _ in members[ci])
        arr = dep + lengths[ci]
        processed += 1
        for slot, _pos in members[ci]:
            arrivals[slot].append(arr)
            departures[slot].append(dep)
            time_at[slot] = arr
            ptr[slot] += 1
            if ptr[slot] < n_edges[slot]:
                cj = class_of[slot][ptr[slot]]
                ready[cj] += 1
                if ready[cj] == len(members[cj]):
                    queue.append(cj)
    if processed != len(members):
        raise InconsistentScheduleError(
            "timetable stalled: vehicles wait for each other in a cycle"
        )
    return arrivals, departures


def _best_arrivals(s: Solution, arrivals) -> dict[int, tuple[float, int, int]]:
    """Per package node the winning (time, kind rank, vehicle index).

    Riding drones arrive exactly with their truck and lose the tie, so only
    truck arrivals and flying-drone arrivals compete. A drone that already
    delivered on its current flight is ineligible until it next rides.
    """
    best: dict[int, tuple[float, int, int]] = {}
    for ti, t in enumerate(s.truck_tours):
        arr = arrivals[ti]
        nodes = t.nodes
        for pos in range(1, len(nodes) - 1):
            v = nodes[pos]
            cand = (arr[pos - 1], 0, ti + 1)
            if v not in best or cand < best[v]:
                best[v] = cand
    n_t = s.n_t
    for di, d in enumerate(s.drone_tours):
        arr = arrivals[n_t + di]
        nodes, carry = d.nodes, d.carry
        delivered = False  # delivered a package on the current flight
        for pos in range(1, len(nodes) - 1):
            if carry[pos - 1] != 0:
                delivered = False
                continue
            mid_flight = carry[pos] == 0
            if delivered:
                if not mid_flight:
                    delivered = False  # lands here, was ineligible on arrival
                continue
            v = nodes[pos]
            cand = (arr[pos - 1], 1, di + 1)
            if v not in best or cand < best[v]:
                best[v] = cand
            if mid_flight:
                # middle of a two-edge flight: this drone is the only
                # visitor, so the delivery is its own
                delivered = True
    return best


def objective(s: Solution, inst: Instance) -> float:
    """Average delivery time over all packages."""
    arrivals, _ = _timetable(s, inst)
    best = _best_arrivals(s, arrivals)
    total = 0.0
    for p in range(1, inst.n_p + 1):
        if p not in best:
            raise InconsistentScheduleError(f"package {p} has no eligible arrival")
        total += best[p][0]
    return total / inst.n_p


def compute_schedule(s: Solution, inst: Instance) -> Schedule:
    arrivals, departures = _timetable(s, inst)
    best = _best_arrivals(s, arrivals)
    arr_map: dict[VehicleId, tuple[float, ...]] = {}
    dep_map: dict[VehicleId, tuple[float, ...]] = {}
    for slot, t in enumerate(s.tours()):
        arr = (0.0, *arrivals[slot])
        dep = (*departures[slot], arr[-1])
        arr_map[t.vehicle] = arr
        dep_map[t.vehicle] = dep
    deliveries = {}
    for p in range(1, inst.n_p + 1):
        if p not in best:
            raise InconsistentScheduleError(f"package {p} has no eligible arrival")
        time, kind_rank, idx = best[p]
        vid = VehicleId("truck" if kind_rank == 0 else "drone", idx)
        deliveries[p] = Delivery(time, vid)
    return Schedule(arr_map, dep_map, deliveries)


def attribute_deliveries(s: Solution, sched: Schedule) -> dict[int, Delivery]:
    """Recompute per-package deliveries from a schedule's arrival times."""
    arrivals = [list(sched.arrivals[t.vehicle][1:]) for t in s.tours()]
    best = _best_arrivals(s, arrivals)
    out = {}
    for p, (time, kind_rank, idx) in sorted(best.items()):
        vid = VehicleId("truck" if kind_rank == 0 else "drone", idx)
        out[p] = Delivery(time, vid)
    return out
