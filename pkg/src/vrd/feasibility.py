"""Feasibility and consistency verification.

Almost-feasibility covers the structural rules: who may visit a node, depot
discipline, coverage, flight shape (at most two consecutive flying edges,
per-flight range) and mutual carry consistency. Schedule consistency — no
circular waiting between synchronized vehicles — is checked two independent
ways: a marking fixpoint over joint-travel edge classes, and a cycle search
over the solution multigraph that only forbids cycles avoiding the depot
and containing no "flip" (two consecutive flying edges of different drones).
The two checkers agree on every almost-feasible solution.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

from .model import (
    DRONE,
    TRUCK,
    CarryInconsistencyError,
    Instance,
    Solution,
    SolutionGraph,
    Tour,
    build_solution_graph,
    euclid,
)

FEASIBLE = "feasible"
INCONSISTENT = "almost-feasible-but-inconsistent"
INFEASIBLE = "infeasible"


@dataclass(frozen=True)
class FeasibilityReport:
    verdict: str
    violations: tuple[tuple[str, str], ...]  # (rule id, human-readable locus)

    def __bool__(self) -> bool:
        return self.verdict == FEASIBLE

    def render(self) -> str:
        lines = [f"verdict: {self.verdict}"]
        for rule, locus in self.violations:
            lines.append(f"  [{rule}] {locus}")
        return "\n".join(lines)


def flights(tour: Tour) -> list[tuple[int, int]]:
    """Maximal runs of flying edges as (first edge pos, last edge pos).

    Runs are counted along the edge list, so they never wrap across the
    depot.
    """
    runs = []
    start = None
    for i, c in enumerate(tour.carry):
        if c == 0:
            if start is None:
                start = i
        elif start is not None:
            runs.append((start, i - 1))
            start = None
    if start is not None:
        runs.append((start, len(tour.carry) - 1))
    return runs


def check_almost_feasible(s: Solution, inst: Instance) -> FeasibilityReport:
    """Validate every feasibility rule except schedule consistency."""
    violations: list[tuple[str, str]] = []

    # (a) node-visit rule: a package node hosts either a single drone alone,
    # or one truck plus drones that are each carried in or carried out there
    # (flying in and landing, or taking off, counts; flying through does not).
    trucks_at: dict[int, list[int]] = {}
    drones_at: dict[int, list[tuple[int, bool]]] = {}  # (drone, carried in/out)
    for t in s.truck_tours:
        for v in t.nodes[1:-1]:
            trucks_at.setdefault(v, []).append(t.vehicle.index)
    for d in s.drone_tours:
        for pos in range(1, len(d.nodes) - 1):
            v = d.nodes[pos]
            attached = d.carry[pos - 1] != 0 or d.carry[pos] != 0
            drones_at.setdefault(v, []).append((d.vehicle.index, attached))
    for v in sorted(set(trucks_at) | set(drones_at)):
        ts = trucks_at.get(v, [])
        ds = drones_at.get(v, [])
        if len(ts) > 1:
            violations.append(("node-visit", f"node {v} visited by trucks {ts}"))
        elif len(ts) == 1:
            loose = [d for d, attached in ds if not attached]
            if loose:
                violations.append(
                    ("node-visit",
                     f"node {v} hosts truck {ts[0]} and drones {loose} flying through")
                )
        else:
            if len(ds) > 1:
                violations.append(
                    ("node-visit",
                     f"node {v} visited by several drones {[d for d, _ in ds]} "
                     "with no truck")
                )
            elif ds and ds[0][1]:
                # no truck here, yet the drone claims to ride through
                violations.append(
                    ("node-visit",
                     f"drone {ds[0][0]} carried at node {v} which no truck visits")
                )

    # (b) depot discipline is enforced by Tour construction; re-checked here
    # so hand-built structures get a report rather than an exception.
    for t in s.tours():
        if t.nodes[0] != 0 or t.nodes[-1] != 0 or 0 in t.nodes[1:-1]:
            violations.append(("depot", f"{t.vehicle} does not respect the depot"))

    # (c) coverage
    seen = s.visited_nodes()
    for p in range(1, inst.n_p + 1):
        if p not in seen:
            violations.append(("coverage", f"package {p} is never visited"))

    # (d) flight shape: at most two consecutive flying edges, range per flight
    for d in s.drone_tours:
        for a, b in flights(d):
            if b - a + 1 > 2:
                violations.append(
                    ("flight-shape",
                     f"{d.vehicle} flies {b - a + 1} consecutive edges "
                     f"from node {d.nodes[a]}")
                )
            length = sum(
                euclid(inst.position(d.nodes[i]), inst.position(d.nodes[i + 1]))
                for i in range(a, b + 1)
            )
            if length > inst.drone_range:
                violations.append(
                    ("drone-range",
                     f"{d.vehicle} flight from node {d.nodes[a]} has length "
                     f"{length:.3f} > {inst.drone_range}")
                )

    # (e) carry consistency, both directions
    drone_edge_index = [d.edge_index() for d in s.drone_tours]
    truck_edge_index = [t.edge_index() for t in s.truck_tours]
    for t in s.truck_tours:
        for i, (u, v) in enumerate(t.edges()):
            for d in t.carry[i]:
                pos = drone_edge_index[d - 1].get((u, v))
                if pos is None or s.drone(d).carry[pos] != t.vehicle.index:
                    violations.append(
                        ("carry",
                         f"truck {t.vehicle.index} carries drone {d} on "
                         f"{u}->{v} but the drone tour disagrees")
                    )
    for d in s.drone_tours:
        for i, (u, v) in enumerate(d.edges()):
            ti = d.carry[i]
            if ti == 0:
                continue
            pos = truck_edge_index[ti - 1].get((u, v))
            if pos is None or d.vehicle.index not in s.truck(ti).carry[pos]:
                violations.append(
                    ("carry",
                     f"drone {d.vehicle.index} rides truck {ti} on {u}->{v} "
                     "but the truck tour disagrees")
                )

    verdict = FEASIBLE if not violations else INFEASIBLE
    return FeasibilityReport(verdict, tuple(violations))


def _edge_classes(s: Solution) -> tuple[list[tuple[int, int]], list[list[int]]]:
    """Edges as (vehicle slot, edge pos); classes as lists of edge ids.

    Vehicle slots: trucks 0..n_t-1 then drones n_t..n_t+n_d-1. Edge ids
    index a flat list. Raises CarryInconsistencyError on mismatches.
    """
    edges: list[tuple[int, int]] = []
    edge_id: dict[tuple[int, int], int] = {}
    for slot, t in enumerate(s.tours()):
        for pos in range(len(t.nodes) - 1):
            edge_id[(slot, pos)] = len(edges)
            edges.append((slot, pos))
    truck_index = [t.edge_index() for t in s.truck_tours]
    classes: list[list[int]] = []
    class_of_truck_edge: dict[tuple[int, int], int] = {}
    for ti, t in enumerate(s.truck_tours):
        for pos in range(len(t.nodes) - 1):
            class_of_truck_edge[(ti, pos)] = len(classes)
            classes.append([edge_id[(ti, pos)]])
    n_t = s.n_t
    for di, d in enumerate(s.drone_tours):
        for pos, (u, v) in enumerate(d.edges()):
            c = d.carry[pos]
            if c == 0:
                classes.append([edge_id[(n_t + di, pos)]])
                continue
            tpos = truck_index[c - 1].get((u, v))
            if tpos is None or (di + 1) not in s.truck(c).carry[tpos]:
                raise CarryInconsistencyError(
                    f"drone {di + 1} rides truck {c} on {u}->{v} "
                    "but the truck tour disagrees"
                )
            classes[class_of_truck_edge[(c - 1, tpos)]].append(
                edge_id[(n_t + di, pos)]
            )
    return edges, classes


def marking_rounds(s: Solution) -> list[frozenset[int]]:
    """Snapshots of the marked edge set after each marking round.

    Round 0 marks the depot-leaving edges; each later round marks those
    edges whose tour predecessors are all marked and whose whole
    joint-travel class has marked predecessors too.
    """
    edges, classes = _edge_classes(s)
    class_of = [0] * len(edges)
    for ci, cls in enumerate(classes):
        for e in cls:
            class_of[e] = ci
    marked: set[int] = set()
    snapshots: list[frozenset[int]] = []

    def eligible(e: int) -> bool:
        slot, pos = edges[e]
        if pos == 0:
            return True
        # predecessor edge of the same tour
        return (e - 1) in marked

    while True:
        estar = {e for e in range(len(edges)) if eligible(e)}
        newly = {
            e
            for e in estar - marked
            if all(m in estar for m in classes[class_of[e]])
        }
        if not newly:
            break
        marked |= newly
        snapshots.append(frozenset(marked))
    return snapshots


def check_schedule_consistency_marking(s: Solution) -> bool:
    """True iff the marking fixpoint marks every edge of every tour."""
    total = sum(len(t.nodes) - 1 for t in s.tours())
    if total == 0:
        return True
    rounds = marking_rounds(s)
    return bool(rounds) and len(rounds[-1]) == total


def check_flip_cycles(g: SolutionGraph) -> bool:
    """True iff every depot-avoiding cycle in the multigraph contains a flip.

    A flip is a pair of consecutive flying edges of two different drones.
    The check builds the edge-transition relation (e1 -> e2 allowed at a
    shared node v != 0 unless the pair is a flip) and searches it for a
    cycle; any cycle found witnesses a flip-free depot-avoiding circuit.
    """
    edges = g.edges
    out_at: dict[int, list[int]] = {}
    for i, e in enumerate(edges):
        if e.u != 0:
            out_at.setdefault(e.u, []).append(i)

    def successors(i: int) -> Iterable[int]:
        e = edges[i]
        if e.v == 0:
            return ()
        outs = out_at.get(e.v, ())
        if not e.flying:
            return outs
        return [
            j
            for j in outs
            if not (edges[j].flying and edges[j].vehicle != e.vehicle)
        ]

    # iterative three-colour DFS over the transition structure
    WHITE, GRAY, BLACK = 0, 1, 2
    colour = [WHITE] * len(edges)
    for root in range(len(edges)):
        if colour[root] != WHITE:
            continue
        stack: list[tuple[int, Iterable]] = [(root, iter(successors(root)))]
        colour[root] = GRAY
        while stack:
            node, it = stack[-1]
            advanced = False
            for nxt in it:
                if colour[nxt] == GRAY:
                    return False  # cycle in the transition structure
                if colour[nxt] == WHITE:
                    colour[nxt] = GRAY
                    stack.append((nxt, iter(successors(nxt))))
                    advanced = True
                    break
            if not advanced:
                colour[node] = BLACK
                stack.pop()
    return True


def check_feasible(s: Solution, inst: Instance) -> FeasibilityReport:
    """Full feasibility: almost-feasibility plus schedule consistency.

    The marking checker is authoritative for the consistency half.
    """
    report = check_almost_feasible(s, inst)
    if report.verdict != FEASIBLE:
        return report
    if not check_schedule_consistency_marking(s):
        return FeasibilityReport(
            INCONSISTENT,
            (("schedule", "vehicles wait for each other in a cycle"),),
        )
    return report


def is_feasible(s: Solution, inst: Instance) -> bool:
    return check_feasible(s, inst).verdict == FEASIBLE
