"""Shared test machinery: a random weaver of almost-feasible solutions, an
independent discrete-event simulator used as the objective oracle, and an
exhaustive enumerator of drone tours for tiny instances.

The simulator deliberately takes a different route than the production
evaluator: it advances a time-ordered event loop and attributes deliveries
online, so agreement between the two is meaningful evidence.
"""

from __future__ import annotations

import heapq
import itertools
import math
import random

from vrd.model import (
    Instance,
    Point,
    Solution,
    Tour,
    drone_tour,
    idle_drone,
    truck_tour,
)


def random_instance(rng, n_t, n_d, n_p, span=10, drone_range=1e9):
    pts = []
    while len(pts) < n_p:
        p = (rng.randint(-span, span), rng.randint(-span, span))
        if p != (0, 0):
            pts.append(Point(*p))
    return Instance(n_t, n_d, n_p, tuple(pts), drone_range)


# --- random weaving of almost-feasible solutions ---


def weave_random_solution(rng: random.Random, max_t=2, max_d=2, max_p=6):
    """A random almost-feasible (instance, solution) pair.

    Drones hop between trucks and may land behind a truck's progress, so a
    healthy share of the output is schedule-inconsistent; all structural
    rules hold by construction.
    """
    while True:
        built = _try_weave(rng, max_t, max_d, max_p)
        if built is not None:
            return built


def _try_weave(rng, max_t, max_d, max_p):
    n_t = rng.randint(1, max_t)
    n_d = rng.randint(0, max_d)
    n_p = rng.randint(max(n_t, max_p - 2), max_p)
    n_mid = 0 if n_d == 0 else rng.randint(0, min(2, n_p - n_t))
    packages = list(range(1, n_p + 1))
    rng.shuffle(packages)
    middles = packages[:n_mid]
    truck_pkgs = packages[n_mid:]
    groups = [[] for _ in range(n_t)]
    for i, p in enumerate(truck_pkgs):
        groups[i % n_t].append(p)
    if any(not g for g in groups):
        return None
    t_nodes = [[0, *g, 0] for g in groups]
    t_carry = [[set() for _ in range(len(n) - 1)] for n in t_nodes]

    free_middles = list(middles)
    drones = []
    for di in range(1, n_d + 1):
        tour = _weave_drone(rng, di, t_nodes, t_carry, free_middles)
        if tour is None:
            return None
        drones.append(tour)
    if free_middles:
        return None  # some package would go unvisited

    inst = random_instance(rng, n_t, n_d, n_p)
    trucks = tuple(
        truck_tour(i + 1, t_nodes[i], t_carry[i]) for i in range(n_t)
    )
    return inst, Solution(trucks, tuple(drones))


def _weave_drone(rng, di, t_nodes, t_carry, free_middles):
    """One drone's walk: ride stretches joined by 1- or 2-edge flights."""
    n_t = len(t_nodes)
    if not free_middles and rng.random() < 0.2:
        return idle_drone(di)
    nodes = [0]
    carried = []
    visited = set()

    def ride(t, lo, hi):
        for q in range(lo + 1, hi + 1):
            nodes.append(t_nodes[t - 1][q])
            carried.append(t)
            t_carry[t - 1][q - 1].add(di)
            visited.add(t_nodes[t - 1][q])

    def landing_spots(t):
        out = []
        for q in range(1, len(t_nodes[t - 1]) - 1):
            v = t_nodes[t - 1][q]
            if v not in visited and _can_ride_one(t, q):
                out.append(q)
        return out

    def _can_ride_one(t, q):
        return t_nodes[t - 1][q + 1] == 0 or t_nodes[t - 1][q + 1] not in visited

    # start: board a truck at the depot, or open with a flight; short rides
    # leave unvisited nodes behind the trucks, so later hops can land there
    # and produce schedule-inconsistent weaves
    if rng.random() < 0.6:
        t = rng.randint(1, n_t)
        cap = len(t_nodes[t - 1]) - 1
        hi = 1 if rng.random() < 0.6 else rng.randint(1, cap)
        ride(t, 0, hi)
        if hi == len(t_nodes[t - 1]) - 1:
            return drone_tour(di, nodes, carried)
    for _hop in range(6):
        # take off from `state` (or the depot) on a 1- or 2-edge flight
        used_middle = None
        if free_middles and rng.random() < 0.8:
            used_middle = free_middles.pop(rng.randrange(len(free_middles)))
            nodes.append(used_middle)
            carried.append(0)
            visited.add(used_middle)
        # choose a landing: a truck position, or the depot to finish
        options = []
        for t in range(1, n_t + 1):
            options.extend((t, q) for q in landing_spots(t))
        if not options or rng.random() < 0.2:
            if not used_middle and not carried:
                return None  # would be the empty tour with no flight at all
            nodes.append(0)
            carried.append(0)
            return drone_tour(di, nodes, carried)
        if rng.random() < 0.5:
            t, q = min(options, key=lambda o: o[1])  # land behind a truck
        else:
            t, q = options[rng.randrange(len(options))]
        nodes.append(t_nodes[t - 1][q])
        carried.append(0)
        visited.add(t_nodes[t - 1][q])
        # must ride at least one edge before the next take-off
        max_q = q
        while max_q + 1 <= len(t_nodes[t - 1]) - 1:
            nxt = t_nodes[t - 1][max_q + 1]
            if nxt != 0 and nxt in visited:
                break
            max_q += 1
            if nxt == 0:
                break
        hi = q + 1 if rng.random() < 0.6 else rng.randint(q + 1, max_q)
        ride(t, q, hi)
        if t_nodes[t - 1][hi] == 0:
            return drone_tour(di, nodes, carried)
        if not free_middles and rng.random() < 0.35:
            # ride this truck home if possible
            if all(
                t_nodes[t - 1][r] == 0 or t_nodes[t - 1][r] not in visited
                for r in range(hi + 1, len(t_nodes[t - 1]))
            ):
                ride(t, hi, len(t_nodes[t - 1]) - 1)
                return drone_tour(di, nodes, carried)
    # out of hops: finish with a flight home
    nodes.append(0)
    carried.append(0)
    return drone_tour(di, nodes, carried)


# --- independent discrete-event simulator ---


def simulate_objective(s: Solution, inst: Instance) -> float:
    """Average delivery time via a time-ordered event simulation.

    Legs start when every vehicle of a joint-travel group waits at the tail;
    deliveries are attributed online as arrival events fire. Raises
    RuntimeError when the simulation stalls (inconsistent input).
    """
    tours = list(s.tours())
    slots = range(len(tours))
    n_t = s.n_t

    # group legs: (slot, leg index) -> group key
    truck_pos = {}
    for ti in range(n_t):
        for e, (u, v) in enumerate(tours[ti].edges()):
            truck_pos[(ti + 1, u, v)] = e
    group_of = {}
    groups = {}
    for slot in slots:
        t = tours[slot]
        for e, (u, v) in enumerate(t.edges()):
            if slot < n_t:
                key = ("t", slot, e)
            else:
                c = t.carry[e]
                key = ("t", c - 1, truck_pos[(c, u, v)]) if c else ("d", slot, e)
            group_of[(slot, e)] = key
            groups.setdefault(key, []).append((slot, e))

    def leg_time(slot, e):
        t = tours[slot]
        a = inst.position(t.nodes[e])
        b = inst.position(t.nodes[e + 1])
        if slot >= n_t and t.carry[e] == 0:
            return math.hypot(a.x - b.x, a.y - b.y)
        return float(abs(a.x - b.x) + abs(a.y - b.y))

    ready_time = [0.0 for _ in slots]
    waiting = {key: 0 for key in groups}
    arrivals = []  # (time, kind rank, vehicle index, slot, leg)
    heap = []  # (start time, tiebreak, group key)
    seq = 0

    def arm(key):
        nonlocal seq
        if waiting[key] == len(groups[key]):
            start = max(ready_time[slot] for slot, _ in groups[key])
            heapq.heappush(heap, (start, seq, key))
            seq += 1

    for slot in slots:
        if len(tours[slot].nodes) > 1:
            key = group_of[(slot, 0)]
            waiting[key] += 1
            arm(key)
    started = 0
    while heap:
        start, _, key = heapq.heappop(heap)
        members = groups[key]
        dur = leg_time(*members[0])
        started += 1
        for slot, e in members:
            arrive = start + dur
            ready_time[slot] = arrive
            kind_rank = 0 if slot < n_t else 1
            index = slot + 1 if slot < n_t else slot - n_t + 1
            arrivals.append((arrive, kind_rank, index, slot, e))
            if e + 1 <= len(tours[slot].nodes) - 2:
                nxt = group_of[(slot, e + 1)]
                waiting[nxt] += 1
                arm(nxt)
    if started != len(groups):
        raise RuntimeError("simulation stalled: circular waiting")

    # online delivery attribution in event order
    arrivals.sort(key=lambda ev: (ev[0], ev[1], ev[2], ev[4]))
    delivered = {}
    flight_delivered = {}
    for time, kind_rank, index, slot, e in arrivals:
        t = tours[slot]
        node = t.nodes[e + 1]
        if node == 0:
            continue
        if kind_rank == 0:
            if node not in delivered:
                delivered[node] = time
            continue
        flying = t.carry[e] == 0
        if flying:
            prev_flying = e > 0 and t.carry[e - 1] == 0
            if not prev_flying:
                flight_delivered[slot] = False  # a new flight begins
            if not flight_delivered.get(slot, False):
                # riding arrivals never beat the co-arriving truck, so only
                # flying arrivals compete for the package
                if node not in delivered:
                    delivered[node] = time
                    flight_delivered[slot] = True
        else:
            flight_delivered[slot] = False
    missing = [p for p in range(1, inst.n_p + 1) if p not in delivered]
    if missing:
        raise RuntimeError(f"packages never delivered: {missing}")
    return sum(delivered[p] for p in range(1, inst.n_p + 1)) / inst.n_p


# --- exhaustive enumeration of solutions for tiny instances ---


def enumerate_solutions(inst: Instance):
    """Yield every structurally valid solution of a tiny instance.

    Both consistent and inconsistent solutions come out; callers filter
    with the feasibility checker. Supports n_d <= 1.
    """
    assert inst.n_d <= 1
    packages = list(range(1, inst.n_p + 1))
    for middles in _subsets(packages):
        if inst.n_d == 0 and middles:
            continue
        rest = [p for p in packages if p not in middles]
        for split in _ordered_partitions(rest, inst.n_t):
            if any(not part for part in split):
                continue
            t_nodes = [[0, *part, 0] for part in split]
            if inst.n_d == 0:
                yield Solution(
                    tuple(truck_tour(i + 1, n) for i, n in enumerate(t_nodes)), ()
                )
                continue
            for tour_spec in _enumerate_drone_walks(t_nodes, set(middles)):
                d_nodes, d_carried = tour_spec
                t_carry = [[set() for _ in range(len(n) - 1)] for n in t_nodes]
                ok = True
                for e in range(len(d_carried)):
                    c = d_carried[e]
                    if c:
                        u, v = d_nodes[e], d_nodes[e + 1]
                        found = False
                        for q in range(len(t_nodes[c - 1]) - 1):
                            if (t_nodes[c - 1][q], t_nodes[c - 1][q + 1]) == (u, v):
                                t_carry[c - 1][q].add(1)
                                found = True
                        if not found:
                            ok = False
                            break
                if not ok:
                    continue
                trucks = tuple(
                    truck_tour(i + 1, n, c)
                    for i, (n, c) in enumerate(zip(t_nodes, t_carry))
                )
                yield Solution(trucks, (drone_tour(1, d_nodes, d_carried),))


def _subsets(items):
    for r in range(len(items) + 1):
        yield from (list(c) for c in itertools.combinations(items, r))


def _ordered_partitions(items, k):
    """All ways to deal `items` into k labelled ordered sequences."""
    if k == 1:
        for perm in itertools.permutations(items):
            yield [list(perm)]
        return
    for mask in itertools.product(range(k), repeat=len(items)):
        parts = [[] for _ in range(k)]
        for it, m in zip(items, mask):
            parts[m].append(it)
        for perms in itertools.product(*(itertools.permutations(p) for p in parts)):
            yield [list(p) for p in perms]


def _enumerate_drone_walks(t_nodes, middles):
    """All structurally valid tours of a single drone over the trucks.

    A walk alternates ridden stretches and flights; flights have one or two
    edges and may consume one middle package; every middle must be used.
    """
    results = []

    def finish(nodes, carried):
        results.append((list(nodes), list(carried)))

    def extend_flight(nodes, carried, visited, middles_left, from_node):
        # option A: straight to a landing or home
        for t in range(1, len(t_nodes) + 1):
            for q in range(1, len(t_nodes[t - 1]) - 1):
                v = t_nodes[t - 1][q]
                if v in visited:
                    continue
                land(nodes + [v], carried + [0], visited | {v}, middles_left, t, q)
        if nodes != [0]:
            finish(nodes + [0], carried + [0])
        # option B: via a middle
        for x in sorted(middles_left):
            n2 = nodes + [x]
            c2 = carried + [0]
            v2 = visited | {x}
            m2 = middles_left - {x}
            for t in range(1, len(t_nodes) + 1):
                for q in range(1, len(t_nodes[t - 1]) - 1):
                    v = t_nodes[t - 1][q]
                    if v in v2:
                        continue
                    land(n2 + [v], c2 + [0], v2 | {v}, m2, t, q)
            finish(n2 + [0], c2 + [0])

    def land(nodes, carried, visited, middles_left, t, q):
        # ride at least one edge, then either keep riding, fly again, or end
        tn = t_nodes[t - 1]
        hi = q
        while hi + 1 <= len(tn) - 1:
            nxt = tn[hi + 1]
            if nxt != 0 and nxt in visited:
                break
            hi += 1
            n2 = nodes + [tn[r] for r in range(q + 1, hi + 1)]
            c2 = carried + [t] * (hi - q)
            v2 = visited | {tn[r] for r in range(q + 1, hi + 1) if tn[r] != 0}
            if nxt == 0:
                finish(n2, c2)
                break
            extend_flight(n2, c2, v2, middles_left, tn[hi])

    def board(t, q):
        tn = t_nodes[t - 1]
        nodes = [0]
        carried = []
        visited = set()
        hi = 0
        while hi + 1 <= len(tn) - 1:
            hi += 1
            nodes = nodes + [tn[hi]]
            carried = carried + [t]
            if tn[hi] == 0:
                finish(nodes, carried)
                break
            visited = visited | {tn[hi]}
            extend_flight(list(nodes), list(carried), set(visited), set(middles), tn[hi])

    if not middles:
        results.append(([0], []))  # idle drone
    for t in range(1, len(t_nodes) + 1):
        board(t, 0)
    extend_flight([0], [], set(), set(middles), 0)

    # keep only walks that consumed every middle
    out = []
    for nodes, carried in results:
        if middles <= set(nodes):
            out.append((nodes, carried))
    return out
