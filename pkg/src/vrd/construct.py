"""Solution construction: angular-sweep mTSP, drone distribution, the
latency-TSP local search, the initial solution and the greedy baseline."""

from __future__ import annotations

import math
from dataclasses import dataclass

from .model import Instance, Solution, Tour, euclid, idle_drone, truck_tour, drone_tour
from .schedule import objective
from .search import SearchConfig, derive_seed, run_config


@dataclass(frozen=True)
class SectorAssignment:
    """Contiguous angular sectors around the depot, one package list per truck."""

    start_angle: float
    groups: tuple[tuple[int, ...], ...]


def assign_sectors(inst: Instance, start_angle: float, n_t: int) -> SectorAssignment:
    """Sort packages by angle from `start_angle` and split into n_t balanced
    contiguous groups (sizes differ by at most one)."""
    two_pi = 2.0 * math.pi

    def key(p: int):
        pt = inst.position(p)
        return ((math.atan2(pt.y, pt.x) - start_angle) % two_pi, p)

    order = sorted(range(1, inst.n_p + 1), key=key)
    q, r = divmod(inst.n_p, n_t)
    groups = []
    at = 0
    for i in range(n_t):
        size = q + (1 if i < r else 0)
        groups.append(tuple(order[at:at + size]))
        at += size
    return SectorAssignment(start_angle, tuple(groups))


def tour_latency(order, inst: Instance) -> float:
    """Sum of Manhattan arrival times along a single-truck tour; the final
    depot-return edge contributes nothing."""
    t = 0.0
    total = 0.0
    x0 = y0 = 0
    for p in order:
        pt = inst.positions[p - 1]
        t += abs(pt.x - x0) + abs(pt.y - y0)
        total += t
        x0, y0 = pt.x, pt.y
    return total


def _latency_sample(order, rng):
    """One random 2-opt reversal or single-node relocation."""
    n = len(order)
    if n < 2:
        return None
    if rng.random() < 0.5:
        i = rng.randrange(n - 1)
        j = rng.randrange(i + 1, n)
        return order[:i] + order[i:j + 1][::-1] + order[j + 1:]
    i = rng.randrange(n)
    j = rng.randrange(n - 1)
    if j >= i:
        j += 1  # skip the identity relocation
    lst = list(order)
    v = lst.pop(i)
    lst.insert(j, v)
    return tuple(lst)


def _latency_neighbors(order):
    """Full 2-opt + relocation neighbourhood with move signatures."""
    n = len(order)
    for i in range(n - 1):
        for j in range(i + 1, n):
            sig = ("2opt", order[i], order[j])
            yield order[:i] + order[i:j + 1][::-1] + order[j + 1:], sig, sig
    for i in range(n):
        for j in range(n):
            if j == i:
                continue
            lst = list(order)
            v = lst.pop(i)
            lst.insert(j, v)
            cand = tuple(lst)
            if cand != order:
                yield cand, ("relocate", v), ("relocate", v)


def tsp_latency_search(
    packages, inst: Instance, cfg: SearchConfig, seed: int, truck_index: int = 1
) -> Tour:
    """Local search over single-truck orders minimizing the latency sum."""
    init = tuple(packages)
    if not init:
        raise ValueError("latency search needs at least one package")
    if len(init) == 1:
        return truck_tour(truck_index, (0, init[0], 0))
    result = run_config(
        cfg,
        init,
        lambda order: tour_latency(order, inst),
        sample=_latency_sample,
        enumerate_fn=_latency_neighbors,
        seed=seed,
    )
    return truck_tour(truck_index, (0, *result.state, 0))


def solve_mtsp(inst: Instance, n_angles: int, tsp_cfg: SearchConfig, seed: int) -> Solution:
    """Trucks-only solution: best angular sector split over n_angles starts.

    Drones stay idle at the depot. Requires n_p >= n_t so every truck gets
    at least one package.
    """
    if n_angles < 1:
        raise ValueError("need at least one start angle")
    if inst.n_p < inst.n_t:
        raise ValueError("fewer packages than trucks: some truck would stay idle")
    best = None
    best_obj = None
    for a in range(n_angles):
        angle = 2.0 * math.pi * a / n_angles
        sectors = assign_sectors(inst, angle, inst.n_t)
        tours = [
            tsp_latency_search(
                group, inst, tsp_cfg, derive_seed(seed, "angle", a, "truck", ti),
                truck_index=ti,
            )
            for ti, group in enumerate(sectors.groups, start=1)
        ]
        sol = Solution(
            tuple(tours), tuple(idle_drone(i) for i in range(1, inst.n_d + 1))
        )
        obj = objective(sol, inst)
        if best_obj is None or obj < best_obj:
            best, best_obj = sol, obj
    return best


def _drone_assignment(n_d: int, n_t: int) -> list[list[int]]:
    """Round-robin by index: drone i rides truck 1 + (i-1) mod n_t."""
    per_truck: list[list[int]] = [[] for _ in range(n_t)]
    for i in range(1, n_d + 1):
        per_truck[(i - 1) % n_t].append(i)
    return per_truck

def distribute_drones(s: Solution, inst: Instance) -> Solution:
    """Assign drones round-robin; each rides its truck's whole tour."""
    if any(not d.is_idle for d in s.drone_tours):
        raise ValueError("expected a trucks-only solution")
    per_truck = _drone_assignment(inst.n_d, inst.n_t)
    trucks = []
    drones: list[Tour] = [None] * inst.n_d
    for ti, t in enumerate(s.truck_tours, start=1):
        aboard = frozenset(per_truck[ti - 1])
        carry = tuple(set(c) | aboard for c in t.carry)
        trucks.append(truck_tour(ti, t.nodes, carry))
        for di in per_truck[ti - 1]:
            drones[di - 1] = drone_tour(di, t.nodes, [ti] * (len(t.nodes) - 1))
    return Solution(tuple(trucks), tuple(drones))


def initial_from_mtsp(
    mtsp: Solution, inst: Instance, speedup_cfg: SearchConfig, seed: int
) -> Solution:
    """Distribute drones over the mTSP tours, then run the inner search once
    per drone on its whole tour."""
    from .neighborhoods import find_speedup_areas
    from .search import run_speedup

    s = distribute_drones(mtsp, inst)
    for di in range(1, inst.n_d + 1):
        for area in find_speedup_areas(s):
            if area.drone == di:
                s = run_speedup(s, area, speedup_cfg, inst, derive_seed(seed, "drone", di))
                break
    return s


def build_initial_solution(inst: Instance, cfg, seed: int) -> Solution:
    """mTSP pre-initial, drones distributed, inner search per drone."""
    pre = solve_mtsp(inst, cfg.n_angles, cfg.tsp, derive_seed(seed, "mtsp"))
    return initial_from_mtsp(pre, inst, cfg.speedup1, derive_seed(seed, "speedup1"))


def greedy_drones(inst: Instance, mtsp: Solution, seed: int = 0) -> Solution:
    """Greedy baseline: keep the mTSP truck tours; whenever all of a truck's
    k drones are charged, dispatch them to the next k packages and meet at
    package k+1, then ride one edge together to recharge.

    The rendezvous may be the depot only when the dispatch covers the last
    packages of the tour and the truck keeps at least one node. Deterministic
    despite the seed parameter (kept for interface symmetry).
    """
    if any(not d.is_idle for d in mtsp.drone_tours):
        raise ValueError("expected a trucks-only solution")
    per_truck = _drone_assignment(inst.n_d, inst.n_t)
    trucks = []
    drones: list[Tour] = [idle_drone(i) for i in range(1, inst.n_d + 1)]
    for ti, t in enumerate(mtsp.truck_tours, start=1):
        ds = per_truck[ti - 1]
        k = len(ds)
        orig = list(t.nodes[1:-1])
        m = len(orig)
        if k == 0:
            trucks.append(truck_tour(ti, t.nodes))
            continue
        out: list[int] = []
        flyover_edges: set[int] = set()  # edge positions in the new path with no drones
        flights: list[tuple[int, list[int], int]] = []  # (depart, packages, rendezvous)
        j = 0
        prev = 0
        charged = True
        while j < m:
            dispatch = None
            if charged and j + k <= m:
                if j + k < m:
                    rv = orig[j + k]
                elif out:
                    rv = 0  # rendezvous at the tour's end
                else:
                    rv = None  # the truck would keep no node to meet at
                if rv is not None:
                    ok = all(
                        euclid(inst.position(prev), inst.position(orig[j + x]))
                        + euclid(inst.position(orig[j + x]), inst.position(rv))
                        <= inst.drone_range
                        for x in range(k)
                    )
                    if ok:
                        dispatch = rv
            if dispatch is None:
                out.append(orig[j])
                prev = orig[j]
                j += 1
                charged = True
            else:
                flights.append((prev, orig[j:j + k], dispatch))
                flyover_edges.add(len(out))  # the edge prev -> rendezvous
                if dispatch == 0:
                    j = m
                else:
                    out.append(dispatch)
                    prev = dispatch
                    j = j + k + 1
                    charged = False
        path = [0, *out, 0]
        aboard = frozenset(ds)
        carry = tuple(
            frozenset() if e in flyover_edges else aboard for e in range(len(path) - 1)
        )
        trucks.append(truck_tour(ti, path, carry))
        for x, di in enumerate(ds):
            nodes = [0]
            carried = []
            pi = 0
            for depart, packages, rv in flights:
                pd = path.index(depart)
                while pi < pd:
                    pi += 1
                    nodes.append(path[pi])
                    carried.append(ti)
                nodes.append(packages[x])
                carried.append(0)
                nodes.append(rv)
                carried.append(0)
                pi = pd + 1  # the rendezvous directly follows the depart node
            while pi < len(path) - 1:
                pi += 1
                nodes.append(path[pi])
                carried.append(ti)
            drones[di - 1] = drone_tour(di, nodes, carried)
    return Solution(tuple(trucks), tuple(drones))
