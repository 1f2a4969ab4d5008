"""Neighbourhood generators: the nine small moves over one drone-truck
interaction segment, and the outer moves (drone change, package change).

Small moves anchor at a node of the drone tour inside a SpeedUp area. At a
node the drone rides through, types 1 and 9 apply (hand a truck package to
the drone); at the middle of a same-truck flight, types 2-8 apply (collapse
the flight, shift its endpoints, swap with a truck package). A move either
returns a new feasible solution or a rejection:

* P_D  - a flight would exceed the drone range,
* P_T  - the truck would skip a node where another drone is handed off,
* inapplicable - the pattern does not match (wrong anchor, empty candidate
  set, the truck would lose its last package).

Accepted moves rewrite the tours of the drone, its truck, and any drones
riding the modified truck edges, so feasibility is preserved by
construction. Outer moves additionally re-verify the rebuilt solution with
the full feasibility checker before accepting it.
"""

from __future__ import annotations

from dataclasses import dataclass
from random import Random

from .feasibility import FEASIBLE, check_almost_feasible, check_feasible
from .model import (
    FormatError,
    Instance,
    Solution,
    Tour,
    drone_tour,
    euclid,
    manhattan,
    truck_tour,
)


@dataclass(frozen=True)
class SpeedUpArea:
    """Maximal part of a drone tour interacting with a single truck.

    start/end are node positions in the drone tour (inclusive); the edges
    start..end-1 all have carried values in {0, truck}.
    """

    drone: int
    truck: int
    start: int
    end: int


@dataclass(frozen=True)
class SmallMove:
    move_type: int  # 1..9
    anchor: int  # node position in the drone tour
    params: tuple = ()  # move-specific node ids (see apply_small_move)


@dataclass(frozen=True)
class OuterMove:
    variant: str  # "drone-change" | "package-change"
    drone: int = 0
    truck: int = 0
    leaving: int = -1  # node position in the drone tour
    arriving: int = -1  # node position in the target truck tour
    package: int = 0
    from_truck: int = 0
    to_truck: int = 0


@dataclass(frozen=True)
class Rejected:
    reason: str


P_D = "P_D"
P_T = "P_T"
INAPPLICABLE = "inapplicable"


def find_speedup_areas(s: Solution) -> list[SpeedUpArea]:
    """Maximal single-truck segments per drone, in tour order.

    Flying edges between two stretches on the same truck stay inside the
    area; a flying run bridging two different trucks is assigned to the
    preceding truck's area, and a leading run to the following one. Every
    ridden edge is covered exactly once and areas are edge-disjoint.
    """
    areas = []
    for di, d in enumerate(s.drone_tours, start=1):
        carry = d.carry
        m = len(carry)
        positive = [(i, c) for i, c in enumerate(carry) if c != 0]
        if not positive:
            continue
        starts = [0]
        trucks = [positive[0][1]]
        for (i, c), (j, c2) in zip(positive, positive[1:]):
            if c2 != c:
                starts.append(j)
                trucks.append(c2)
        starts.append(m)
        for k, t in enumerate(trucks):
            areas.append(SpeedUpArea(di, t, starts[k], starts[k + 1]))
    return areas


# --- structural classification inside an area ---


def _stretch_bounds(d: Tour, area: SpeedUpArea, pos: int) -> tuple[int, int]:
    """Node positions [lo, hi] of the maximal ridden run containing pos."""
    t = area.truck
    lo = pos
    while lo - 1 >= area.start and d.carry[lo - 1] == t:
        lo -= 1
    hi = pos
    while hi <= area.end - 1 and d.carry[hi] == t:
        hi += 1
    return lo, hi


def _departure_nodes(d: Tour, lo: int, until: int) -> list[int]:
    """Stretch nodes where the drone may take off, strictly before `until`.

    The drone can depart where it arrives carried, or at the depot when the
    stretch opens its tour; it cannot take off at a landing node.
    """
    out = []
    if lo == 0:
        out.append(lo)
    for q in range(lo + 1, until):
        out.append(q)
    return out


def _rejoin_nodes(d: Tour, hi: int, after: int) -> list[int]:
    """Stretch nodes where the drone may land, strictly after `after`.

    Landing right where the next flight departs is forbidden; landing at the
    stretch end is allowed only when it is the tour's final depot.
    """
    out = list(range(after + 1, hi))
    if hi > after and hi == len(d.nodes) - 1:
        out.append(hi)
    return out


def _flight_at(s: Solution, area: SpeedUpArea, pos: int):
    """Same-truck flight with middle at `pos`, as truck positions, or None.

    Returns (a_node, c_node, pa, pc) where the drone departs the truck at a
    (truck position pa) and rejoins at c (truck position pc > pa). The
    shared depot counts as on-path at the tour boundaries.
    """
    d = s.drone(area.drone)
    if pos - 1 < area.start or pos > area.end - 1:
        return None
    if d.carry[pos - 1] != 0 or d.carry[pos] != 0:
        return None
    a, c = d.nodes[pos - 1], d.nodes[pos + 1]
    if a == 0 and pos - 1 != 0:
        return None
    if c == 0 and pos + 1 != len(d.nodes) - 1:
        return None
    tn = s.truck(area.truck).nodes
    pa = 0 if a == 0 else _index_or_none(tn, a)
    pc = len(tn) - 1 if c == 0 else _index_or_none(tn, c)
    if pa is None or pc is None or pa >= pc:
        return None
    return a, c, pa, pc


def _index_or_none(seq, v):
    try:
        return seq.index(v)
    except ValueError:
        return None


def _ride_after(d: Tour, area: SpeedUpArea, pos: int) -> int:
    """Last node position of the ridden run starting at `pos` (a landing)."""
    t = area.truck
    hi = pos
    while hi <= area.end - 1 and d.carry[hi] == t:
        hi += 1
    return hi


def _ride_before(d: Tour, area: SpeedUpArea, pos: int) -> int:
    t = area.truck
    lo = pos
    while lo - 1 >= area.start and d.carry[lo - 1] == t:
        lo -= 1
    return lo


def _truck_handoffs_at(s: Solution, truck: int, node: int, exclude: int) -> bool:
    """True when a drone other than `exclude` lands or takes off at `node`."""
    t = s.truck(truck)
    i = t.nodes.index(node)
    cin = t.carry[i - 1] if i > 0 else frozenset()
    cout = t.carry[i] if i < len(t.carry) else frozenset()
    return bool((cin ^ cout) - {exclude})


def applicable_move_types(
    s: Solution, area: SpeedUpArea, pos: int, inst: Instance
) -> list[int]:
    """Structurally applicable move types at a node of the drone tour.

    Candidate-node availability counts as structure; the drone-range and
    handoff checks happen at application time.
    """
    d = s.drone(area.drone)
    t = area.truck
    types: list[int] = []
    in_ride = pos - 1 >= area.start and d.carry[pos - 1] == t
    out_ride = pos <= area.end - 1 and d.carry[pos] == t
    if in_ride and out_ride:
        lo, hi = _stretch_bounds(d, area, pos)
        dep_ok = (pos - 1 > lo) or (pos - 1 == lo == 0)
        rejoin_ok = (pos + 1 < hi) or (pos + 1 == hi == len(d.nodes) - 1)
        if dep_ok and rejoin_ok:
            types.append(1)
        if _departure_nodes(d, lo, pos) and _rejoin_nodes(d, hi, pos):
            types.append(9)
        return types
    fl = _flight_at(s, area, pos)
    if fl is None:
        return types
    a, c, pa, pc = fl
    tn = s.truck(t).nodes
    if pc == pa + 1:
        types.append(2)
    if pc - pa >= 2:
        types.append(3)  # rejoin earlier: truck nodes strictly between
        types.append(5)  # depart later: same candidate span
    if _t4_candidates(s, area, pos, pc):
        types.append(4)
    if _t6_candidates(s, area, pos, pa):
        types.append(6)
    if pc == pa + 2:
        types.append(7)
    types.append(8)
    return sorted(types)


def _t4_candidates(s, area, pos, pc):
    """Truck positions for a later rejoin: after the current one, before the
    drone's next take-off (or through the final depot when it rides home)."""
    d = s.drone(area.drone)
    tn = s.truck(area.truck).nodes
    hi = _ride_after(d, area, pos + 1)
    if hi == pos + 1 and hi != len(d.nodes) - 1:
        return []  # lands and immediately departs: nothing to extend
    # truck position of the ride end
    end_node = d.nodes[hi]
    p_end = len(tn) - 1 if end_node == 0 else _index_or_none(tn, end_node)
    if p_end is None:
        return []
    if hi == len(d.nodes) - 1:
        return list(range(pc + 1, p_end + 1))  # may fly straight home
    return list(range(pc + 1, p_end))


def _t6_candidates(s, area, pos, pa):
    """Truck positions for an earlier departure: after the ride's start
    (inclusive only when the ride opens the tour at the depot)."""
    d = s.drone(area.drone)
    tn = s.truck(area.truck).nodes
    lo = _ride_before(d, area, pos - 1)
    start_node = d.nodes[lo]
    p_lo = 0 if start_node == 0 else _index_or_none(tn, start_node)
    if p_lo is None:
        return []
    first = p_lo if lo == 0 else p_lo + 1
    return list(range(first, pa))


def has_applicable_moves(s: Solution, area: SpeedUpArea, inst: Instance) -> bool:
    return any(
        applicable_move_types(s, area, pos, inst)
        for pos in range(area.start, area.end + 1)
    )


# --- mutable working copy for tour surgery ---


class _Work:
    def __init__(self, s: Solution):
        self.t_nodes = [list(t.nodes) for t in s.truck_tours]
        self.t_carry = [[set(c) for c in t.carry] for t in s.truck_tours]
        self.d_nodes = [list(d.nodes) for d in s.drone_tours]
        self.d_carry = [list(d.carry) for d in s.drone_tours]

    def solution(self) -> Solution:
        trucks = tuple(
            truck_tour(i + 1, self.t_nodes[i], self.t_carry[i])
            for i in range(len(self.t_nodes))
        )
        drones = tuple(
            drone_tour(i + 1, self.d_nodes[i], self.d_carry[i])
            for i in range(len(self.d_nodes))
        )
        return Solution(trucks, drones)

    def remove_truck_node(self, t: int, node: int, drop: int | None = None):
        """Splice a node out of a truck tour; drones riding through follow
        the truck, the drone `drop` (if given) stops riding those edges."""
        nodes, carry = self.t_nodes[t - 1], self.t_carry[t - 1]
        i = nodes.index(node)
        riders = carry[i - 1] & carry[i]
        merged = set(riders)
        if drop is not None:
            merged.discard(drop)
        for r in merged:
            dn, dc = self.d_nodes[r - 1], self.d_carry[r - 1]
            j = dn.index(node)
            del dn[j]
            del dc[j]
        del nodes[i]
        del carry[i]
        carry[i - 1] = merged

    def insert_truck_node(self, t: int, at: int, node: int):
        """Insert a node at truck position `at`; riders of the split edge
        travel through it."""
        nodes, carry = self.t_nodes[t - 1], self.t_carry[t - 1]
        riders = set(carry[at - 1])
        prev = nodes[at - 1]
        nodes.insert(at, node)
        carry.insert(at - 1, set(riders))
        for r in riders:
            dn, dc = self.d_nodes[r - 1], self.d_carry[r - 1]
            j = dn.index(prev)
            dn.insert(j + 1, node)
            dc.insert(j, dc[j])

    def set_truck_membership(self, t: int, lo: int, hi: int, drone: int, aboard: bool):
        """Add or remove a drone from the carry sets of truck edges lo..hi-1."""
        carry = self.t_carry[t - 1]
        for e in range(lo, hi):
            if aboard:
                carry[e].add(drone)
            else:
                carry[e].discard(drone)


# --- the nine small moves ---


def apply_small_move(
    s: Solution, area: SpeedUpArea, m: SmallMove, inst: Instance
) -> Solution | Rejected:
    """Apply one small move; on rejection the input solution is untouched.

    Move parameters (node ids):
      T1, T2, T7, T8: none (fully determined by the anchor)
      T3, T4: (new rejoin node,)    T5, T6: (new departure node,)
      T9: (departure node, rejoin node)
    """
    handlers = {
        1: _move_t1, 2: _move_t2, 3: _move_t34, 4: _move_t34,
        5: _move_t56, 6: _move_t56, 7: _move_t7, 8: _move_t8, 9: _move_t9,
    }
    if m.move_type not in handlers:
        return Rejected(INAPPLICABLE)
    if not area.start <= m.anchor <= area.end:
        return Rejected(INAPPLICABLE)
    if m.move_type not in applicable_move_types(s, area, m.anchor, inst):
        return Rejected(INAPPLICABLE)
    return handlers[m.move_type](s, area, m, inst)


def _fly(inst: Instance, a: int, b: int) -> float:
    return euclid(inst.position(a), inst.position(b))


def _move_t1(s, area, m, inst):
    """Truck rides two edges a->v->c with the drone aboard: the truck drives
    a->c directly while the drone flies a->v->c and delivers v."""
    d = s.drone(area.drone)
    pos = m.anchor
    a, v, c = d.nodes[pos - 1], d.nodes[pos], d.nodes[pos + 1]
    if _fly(inst, a, v) + _fly(inst, v, c) > inst.drone_range:
        return Rejected(P_D)
    if _truck_handoffs_at(s, area.truck, v, exclude=area.drone):
        return Rejected(P_T)
    if len(s.truck(area.truck).nodes) - 2 <= 1:
        return Rejected(INAPPLICABLE)  # the truck would lose its last package
    w = _Work(s)
    w.remove_truck_node(area.truck, v, drop=area.drone)
    dc = w.d_carry[area.drone - 1]
    dc[pos - 1] = 0
    dc[pos] = 0
    return w.solution()


def _move_t2(s, area, m, inst):
    """Inverse of T1: collapse a flight spanning a single truck edge; all
    ride a->v->c. No checks can fail."""
    d = s.drone(area.drone)
    pos = m.anchor
    a, c, pa, pc = _flight_at(s, area, pos)
    v = d.nodes[pos]
    w = _Work(s)
    dc = w.d_carry[area.drone - 1]
    dc[pos - 1] = area.truck
    dc[pos] = area.truck
    w.insert_truck_node(area.truck, pa + 1, v)
    w.t_carry[area.truck - 1][pa].add(area.drone)
    w.t_carry[area.truck - 1][pa + 1].add(area.drone)
    return w.solution()


def _move_t34(s, area, m, inst):
    """Shift the flight's rejoin node earlier (T3) or later (T4)."""
    d = s.drone(area.drone)
    pos = m.anchor
    a, c, pa, pc = _flight_at(s, area, pos)
    x = d.nodes[pos]
    tn = s.truck(area.truck).nodes
    new_c = m.params[0]
    if m.move_type == 3:
        cands = list(range(pa + 1, pc))
    else:
        cands = _t4_candidates(s, area, pos, pc)
    pc2 = len(tn) - 1 if new_c == 0 else _index_or_none(tn, new_c)
    if pc2 is None or pc2 not in cands:
        return Rejected(INAPPLICABLE)
    if _fly(inst, a, x) + _fly(inst, x, new_c) > inst.drone_range:
        return Rejected(P_D)
    dn = list(d.nodes)
    dc = list(d.carry)
    t = area.truck
    w = _Work(s)
    if m.move_type == 3:
        added = list(tn[pc2:pc])
        if any(n in d.nodes for n in added):
            return Rejected(INAPPLICABLE)
        new_dn = dn[:pos + 1] + added + dn[pos + 1:]
        new_dc = dc[:pos] + [0] + [t] * (pc - pc2) + dc[pos + 1:]
        w.set_truck_membership(t, pc2, pc, area.drone, aboard=True)
    else:
        z = pos + 1 + (pc2 - pc)
        new_dn = dn[:pos + 1] + dn[z:]
        new_dc = dc[:pos] + [0] + dc[z:]
        w.set_truck_membership(t, pc, pc2, area.drone, aboard=False)
    w.d_nodes[area.drone - 1] = new_dn
    w.d_carry[area.drone - 1] = new_dc
    return w.solution()


def _move_t56(s, area, m, inst):
    """Shift the flight's departure node later (T5) or earlier (T6)."""
    d = s.drone(area.drone)
    pos = m.anchor
    a, c, pa, pc = _flight_at(s, area, pos)
    x = d.nodes[pos]
    tn = s.truck(area.truck).nodes
    new_a = m.params[0]
    if m.move_type == 5:
        cands = list(range(pa + 1, pc))
    else:
        cands = _t6_candidates(s, area, pos, pa)
    pa2 = 0 if new_a == 0 else _index_or_none(tn, new_a)
    if pa2 is None or pa2 not in cands:
        return Rejected(INAPPLICABLE)
    if _fly(inst, new_a, x) + _fly(inst, x, c) > inst.drone_range:
        return Rejected(P_D)
    dn = list(d.nodes)
    dc = list(d.carry)
    t = area.truck
    w = _Work(s)
    if m.move_type == 5:
        added = list(tn[pa + 1:pa2 + 1])
        if any(n in d.nodes for n in added):
            return Rejected(INAPPLICABLE)
        new_dn = dn[:pos] + added + dn[pos:]
        new_dc = dc[:pos - 1] + [t] * (pa2 - pa) + [0] + dc[pos:]
        w.set_truck_membership(t, pa, pa2, area.drone, aboard=True)
    else:
        back = pa - pa2
        z = pos - 1 - back  # node position of the new departure
        new_dn = dn[:z + 1] + dn[pos:]
        new_dc = dc[:z] + [0] + dc[pos:]
        w.set_truck_membership(t, pa2, pa, area.drone, aboard=False)
    w.d_nodes[area.drone - 1] = new_dn
    w.d_carry[area.drone - 1] = new_dc
    return w.solution()


def _move_t7(s, area, m, inst):
    """Swap the flight package with the single truck package in between:
    the drone now delivers y while the truck drives through x."""
    d = s.drone(area.drone)
    pos = m.anchor
    a, c, pa, pc = _flight_at(s, area, pos)
    x = d.nodes[pos]
    tn = s.truck(area.truck).nodes
    y = tn[pa + 1]
    if _fly(inst, a, y) + _fly(inst, y, c) > inst.drone_range:
        return Rejected(P_D)
    if _truck_handoffs_at(s, area.truck, y, exclude=0):
        return Rejected(P_T)
    # x hosts only the moving drone, so no handoff can block it
    w = _Work(s)
    w.t_nodes[area.truck - 1][pa + 1] = x
    riders = w.t_carry[area.truck - 1][pa] & w.t_carry[area.truck - 1][pa + 1]
    for r in riders:
        dn = w.d_nodes[r - 1]
        dn[dn.index(y)] = x
    w.d_nodes[area.drone - 1][pos] = y
    return w.solution()


def _move_t8(s, area, m, inst):
    """Collapse a flight: the drone rides a..c and the truck delivers x,
    inserted next to its Manhattan-nearest node on the a..c subpath."""
    d = s.drone(area.drone)
    pos = m.anchor
    a, c, pa, pc = _flight_at(s, area, pos)
    x = d.nodes[pos]
    tn = s.truck(area.truck).nodes
    t = area.truck
    px = inst.position(x)
    nearest = min(
        range(pa, pc + 1), key=lambda q: (manhattan(inst.position(tn[q]), px), q)
    )
    options = []
    if nearest > 0:
        prev = inst.position(tn[nearest - 1])
        here = inst.position(tn[nearest])
        delta = manhattan(prev, px) + manhattan(px, here) - manhattan(prev, here)
        options.append((delta, 0, nearest))  # insert before
    if nearest < len(tn) - 1:
        here = inst.position(tn[nearest])
        nxt = inst.position(tn[nearest + 1])
        delta = manhattan(here, px) + manhattan(px, nxt) - manhattan(here, nxt)
        options.append((delta, 1, nearest + 1))
    at = min(options)[2]
    span = list(tn[pa + 1:pc])
    if any(n in d.nodes for n in span):
        return Rejected(INAPPLICABLE)
    dn = list(d.nodes)
    dc = list(d.carry)
    w = _Work(s)
    w.d_nodes[area.drone - 1] = dn[:pos] + span + dn[pos + 1:]
    w.d_carry[area.drone - 1] = dc[:pos - 1] + [t] * (pc - pa) + dc[pos + 1:]
    w.set_truck_membership(t, pa, pc, area.drone, aboard=True)
    w.insert_truck_node(t, at, x)
    return w.solution()


def _move_t9(s, area, m, inst):
    """Inverse of T8: along a ridden stretch, the drone takes over the truck
    package at the anchor, departing and rejoining at the given nodes."""
    d = s.drone(area.drone)
    pos = m.anchor
    y = d.nodes[pos]
    t = area.truck
    a_node, c_node = m.params
    lo, hi = _stretch_bounds(d, area, pos)
    dep = _departure_nodes(d, lo, pos)
    rej = _rejoin_nodes(d, hi, pos)
    ia = _index_or_none(d.nodes, a_node) if a_node != 0 else 0
    ic = (
        len(d.nodes) - 1
        if c_node == 0 and len(d.nodes) - 1 in rej
        else _index_or_none(d.nodes, c_node)
    )
    if ia is None or ic is None or ia not in dep or ic not in rej:
        return Rejected(INAPPLICABLE)
    if _truck_handoffs_at(s, t, y, exclude=area.drone):
        return Rejected(P_T)
    if _fly(inst, a_node, y) + _fly(inst, y, c_node) > inst.drone_range:
        return Rejected(P_D)
    if len(s.truck(t).nodes) - 2 <= 1:
        return Rejected(INAPPLICABLE)
    w = _Work(s)
    tn = s.truck(t).nodes
    pa = tn.index(a_node) if a_node != 0 else 0
    pc = tn.index(c_node) if c_node != 0 else len(tn) - 1
    w.set_truck_membership(t, pa, pc, area.drone, aboard=False)
    w.remove_truck_node(t, y)
    dn = list(d.nodes)
    dc = list(d.carry)
    w.d_nodes[area.drone - 1] = dn[:ia + 1] + [y] + dn[ic:]
    w.d_carry[area.drone - 1] = dc[:ia] + [0, 0] + dc[ic:]
    return w.solution()


def _param_candidates(
    s: Solution, area: SpeedUpArea, pos: int, move_type: int, inst: Instance
) -> list[tuple]:
    """Parameter tuples for a move type at an anchor, range-filtered."""
    d = s.drone(area.drone)
    if move_type in (1, 2, 7, 8):
        return [()]
    tn = s.truck(area.truck).nodes
    if move_type in (3, 4, 5, 6):
        a, c, pa, pc = _flight_at(s, area, pos)
        x = d.nodes[pos]
        if move_type == 3:
            cands = range(pa + 1, pc)
            ok = lambda q: _fly(inst, a, x) + _fly(inst, x, tn[q]) <= inst.drone_range
        elif move_type == 4:
            cands = _t4_candidates(s, area, pos, pc)
            ok = lambda q: _fly(inst, a, x) + _fly(inst, x, tn[q]) <= inst.drone_range
        elif move_type == 5:
            cands = range(pa + 1, pc)
            ok = lambda q: _fly(inst, tn[q], x) + _fly(inst, x, c) <= inst.drone_range
        else:
            cands = _t6_candidates(s, area, pos, pa)
            ok = lambda q: _fly(inst, tn[q], x) + _fly(inst, x, c) <= inst.drone_range
        return [(tn[q],) for q in cands if ok(q)]
    if move_type == 9:
        y = d.nodes[pos]
        lo, hi = _stretch_bounds(d, area, pos)
        dep = _departure_nodes(d, lo, pos)
        rej = _rejoin_nodes(d, hi, pos)
        out = []
        for ja in dep:
            na = d.nodes[ja]
            fa = _fly(inst, na, y)
            for jc in rej:
                nc = d.nodes[jc]
                if fa + _fly(inst, y, nc) <= inst.drone_range:
                    out.append((na, nc))
        return out
    return []


def sample_small_neighbor(
    s: Solution, area: SpeedUpArea, rng: Random, inst: Instance
) -> tuple[Solution, SmallMove] | None:
    """Draw a uniform node of the area, a uniform applicable move type
    there, uniform parameters, and apply. Returns None when the drawn node
    admits nothing or the move is rejected (the engine redraws)."""
    pos = rng.randint(area.start, area.end)
    types = applicable_move_types(s, area, pos, inst)
    if not types:
        return None
    ty = types[rng.randrange(len(types))]
    cands = _param_candidates(s, area, pos, ty, inst)
    if not cands:
        return None
    params = cands[rng.randrange(len(cands))]
    move = SmallMove(ty, pos, params)
    res = apply_small_move(s, area, move, inst)
    if isinstance(res, Rejected):
        return None
    return res, move


# --- outer moves ---


def _trailing_fly_run(carried: list[int]) -> int:
    n = 0
    for c in reversed(carried):
        if c != 0:
            break
        n += 1
    return n


def outer_drone_change(
    s: Solution,
    m: OuterMove,
    speedup_engine,
    rng: Random,
    inst: Instance,
) -> Solution | Rejected:
    """Re-home a drone: truncate its tour at the leaving node, fold its
    remaining deliveries back into the truck routes, fly it to the arriving
    node of the target truck and let it ride from there; then run the inner
    search on the post-arrival segment."""
    di, t_new = m.drone, m.truck
    d = s.drone(di)
    tn_orig = s.truck(t_new)
    L, A = m.leaving, m.arriving
    if not (0 <= L <= max(len(d.nodes) - 2, 0)):
        return Rejected("leaving node out of range")
    if not (0 <= A <= len(tn_orig.nodes) - 1):
        return Rejected("arriving node out of range")
    a_node = tn_orig.nodes[A]

    keep_nodes = list(d.nodes[:L + 1])
    keep_carried = list(d.carry[:L])
    # skip a trailing package-less flying edge
    if keep_carried and keep_carried[-1] == 0:
        is_middle = L < len(d.carry) and d.carry[L] == 0
        if not is_middle:
            keep_nodes.pop()
            keep_carried.pop()

    w = _Work(s)
    # strip the drone from every truck edge beyond the cut
    cut = len(keep_carried)
    for e in range(cut, len(d.carry)):
        t_old = d.carry[e]
        if t_old != 0:
            uv_i = w.t_nodes[t_old - 1].index(d.nodes[e])
            w.t_carry[t_old - 1][uv_i].discard(di)
    # fold stripped deliveries back into their trucks, in tour order
    K = len(keep_nodes) - 1
    for mid in range(1, len(d.nodes) - 1):
        if mid > K and d.carry[mid - 1] == 0 and d.carry[mid] == 0:
            takeoff = d.nodes[mid - 1]
            if mid - 2 >= 0 and d.carry[mid - 2] != 0:
                truck_f = d.carry[mid - 2]  # the truck the drone departed from
            elif mid + 1 < len(d.carry) and d.carry[mid + 1] != 0:
                truck_f = d.carry[mid + 1]  # flight from the depot: use the landing truck
            else:
                return Rejected("no truck to take over a stranded delivery")
            at = w.t_nodes[truck_f - 1].index(takeoff) + 1
            w.insert_truck_node(truck_f, at, d.nodes[mid])

    u = keep_nodes[-1]
    run = _trailing_fly_run(keep_carried)
    new_tn = w.t_nodes[t_new - 1]
    ride_from = None
    if u == a_node:
        if u == 0:
            if A == len(tn_orig.nodes) - 1:
                # leaves at the start and arrives at the end: idle drone
                w.d_nodes[di - 1] = [0]
                w.d_carry[di - 1] = []
                return _verify_outer(w, inst)
            ride_from = 0
        else:
            if not keep_carried or keep_carried[-1] != t_new:
                return Rejected("cannot continue on a different truck in place")
            ride_from = new_tn.index(u)
    elif a_node == 0 and A == 0:
        return Rejected("cannot fly back to the depot start")
    else:
        if run + 1 > 2:
            return Rejected("connecting flight too long")
        flight_len = _fly(inst, u, a_node)
        if run == 1:
            flight_len += _fly(inst, keep_nodes[-2], u)
        if flight_len > inst.drone_range:
            return Rejected(P_D)
        if a_node in keep_nodes:
            return Rejected("arriving node already visited")
        keep_nodes.append(a_node)
        keep_carried.append(0)
        if A == len(tn_orig.nodes) - 1:
            ride_from = None  # flies straight home
        else:
            ride_from = new_tn.index(a_node)

    if ride_from is not None:
        tail = new_tn[ride_from + 1:]
        if any(n in keep_nodes for n in tail if n != 0):
            return Rejected("riding would revisit a node")
        keep_nodes.extend(tail)
        keep_carried.extend([t_new] * len(tail))
        w.set_truck_membership(t_new, ride_from, len(new_tn) - 1, di, aboard=True)
    w.d_nodes[di - 1] = keep_nodes
    w.d_carry[di - 1] = keep_carried
    sol = _verify_outer(w, inst)
    if isinstance(sol, Rejected):
        return sol
    if ride_from is not None and ride_from < len(new_tn) - 1:
        nodes2 = sol.drone(di).nodes
        area = SpeedUpArea(di, t_new, nodes2.index(a_node) if a_node != 0 else 0,
                           len(nodes2) - 1)
        sol = speedup_engine(sol, area, rng)
    return sol


def _verify_outer(w: "_Work", inst: Instance) -> Solution | Rejected:
    try:
        sol = w.solution()
    except FormatError as exc:
        return Rejected(f"rewrite broke tour structure: {exc}")
    report = check_feasible(sol, inst)
    if report.verdict != FEASIBLE:
        return Rejected(f"rewrite broke feasibility: {report.verdict}")
    return sol


def outer_package_change(
    s: Solution, m: OuterMove, rng: Random, inst: Instance
) -> Solution | Rejected:
    """Move a truck-delivered package to another truck (or re-place it on
    the same one), relocating any drone handoff at its node to an adjacent
    node if needed."""
    p, from_t, to_t = m.package, m.from_truck, m.to_truck
    ft = s.truck(from_t)
    if p not in ft.nodes[1:-1]:
        return Rejected("package is not delivered by that truck")
    if len(ft.nodes) - 2 <= 1:
        # removing the only package would orphan the truck tour
        return Rejected("truck would be left without a node")
    i = ft.nodes.index(p)
    cin, cout = ft.carry[i - 1], ft.carry[i]
    handoffs = cin ^ cout

    if not handoffs:
        w = _Work(s)
        w.remove_truck_node(from_t, p)
    else:
        w = None
        for adj in (ft.nodes[i - 1], ft.nodes[i + 1]):
            w = _relocate_handoffs(s, from_t, p, adj, handoffs, inst)
            if w is not None:
                break
        if w is None:
            return Rejected("handoff cannot move to an adjacent node")

    to_nodes = w.t_nodes[to_t - 1]
    interior = to_nodes[1:-1]
    if not interior:
        return Rejected("target truck has no node to insert next to")
    pp = inst.position(p)
    close = min(interior, key=lambda n: (euclid(inst.position(n), pp), n))
    j = to_nodes.index(close)
    before = to_nodes[:j] + [p] + to_nodes[j:]
    after = to_nodes[:j + 1] + [p] + to_nodes[j + 1:]
    at = j if _path_latency(before, inst) <= _path_latency(after, inst) else j + 1
    w.insert_truck_node(to_t, at, p)
    return _verify_outer(w, inst)


def _path_latency(nodes, inst: Instance) -> float:
    t = 0.0
    total = 0.0
    prev = inst.position(nodes[0])
    for n in nodes[1:-1]:
        pt = inst.position(n)
        t += manhattan(prev, pt)
        total += t
        prev = pt
    return total


def _relocate_handoffs(
    s: Solution, from_t: int, p: int, adj: int, handoffs: frozenset, inst: Instance
) -> _Work | None:
    """Move every drone handoff at node p to the adjacent node, splice p
    out, and validate the rewrite; None when this direction fails."""
    w = _Work(s)
    ft_nodes = w.t_nodes[from_t - 1]
    i = ft_nodes.index(p)
    extra_riders: set[int] = set()  # drones that now ride the merged edge
    for r in sorted(handoffs):
        dn, dc = w.d_nodes[r - 1], w.d_carry[r - 1]
        j = dn.index(p)
        lands = j > 0 and dc[j - 1] == 0
        if lands:
            if adj == dn[j - 1]:
                return None  # flight would fold back onto its takeoff
            if j + 1 < len(dn) and adj == dn[j + 1]:
                # lands one node later, where it already rides: drop p and
                # turn the remaining edge into the flying one
                del dn[j]
                del dc[j - 1]
                dc[j - 1] = 0
            elif adj in dn:
                return None  # would revisit a node (includes the depot start)
            else:
                dn[j] = adj  # lands earlier and rides through the splice
                extra_riders.add(r)
        else:
            # takes off at p
            if j + 1 < len(dn) and adj == dn[j + 1]:
                return None  # flight would fold back onto its landing
            if j > 0 and adj == dn[j - 1]:
                # departs one node earlier, where it already rides: drop p
                if j - 1 > 0 and dc[j - 2] == 0:
                    return None  # would take off right after landing
                del dn[j]
                del dc[j - 1]
            elif adj in dn:
                return None  # includes taking off from the final depot
            else:
                dn[j] = adj  # rides through the splice, departs later
                extra_riders.add(r)
    # splice p out of the truck; drones riding through follow the truck and
    # relocated drones now riding the merged edge join its carry set
    cin = w.t_carry[from_t - 1][i - 1]
    cout = w.t_carry[from_t - 1][i]
    riders = cin & cout
    del ft_nodes[i]
    del w.t_carry[from_t - 1][i]
    w.t_carry[from_t - 1][i - 1] = set(riders) | extra_riders
    for r in riders:
        dn, dc = w.d_nodes[r - 1], w.d_carry[r - 1]
        j = dn.index(p)
        del dn[j]
        del dc[j]
    try:
        sol = w.solution()
    except FormatError:
        return None
    if check_almost_feasible(sol, inst).verdict != FEASIBLE:
        return None
    return _Work(sol)


def sample_outer_neighbor(
    s: Solution, inst: Instance, speedup_engine, rng: Random, retries: int = 32
) -> tuple[Solution, OuterMove] | None:
    """Fair coin between a drone change and a package change; parameters
    drawn uniformly. Returns None when the draw or the move is rejected."""
    for _ in range(retries):
        if rng.random() < 0.5:
            if s.n_d == 0:
                continue
            di = rng.randint(1, s.n_d)
            t_new = rng.randint(1, s.n_t)
            d = s.drone(di)
            L = rng.randrange(max(len(d.nodes) - 1, 1))
            A = rng.randrange(len(s.truck(t_new).nodes))
            move = OuterMove(
                "drone-change", drone=di, truck=t_new, leaving=L, arriving=A
            )
            res = outer_drone_change(s, move, speedup_engine, rng, inst)
        else:
            pool = [
                (ti, n)
                for ti, t in enumerate(s.truck_tours, start=1)
                for n in t.nodes[1:-1]
            ]
            if not pool:
                continue
            from_t, p = pool[rng.randrange(len(pool))]
            to_t = rng.randint(1, s.n_t)
            move = OuterMove(
                "package-change", package=p, from_truck=from_t, to_truck=to_t
            )
            res = outer_package_change(s, move, rng, inst)
        if isinstance(res, Rejected):
            return None
        return res, move
    return None
