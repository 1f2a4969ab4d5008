import random

import pytest
from hypothesis import given, settings, strategies as st

from vrd.feasibility import (
    FEASIBLE,
    INCONSISTENT,
    INFEASIBLE,
    check_almost_feasible,
    check_feasible,
    check_flip_cycles,
    check_schedule_consistency_marking,
    flights,
    marking_rounds,
)
from vrd.model import (
    Instance,
    Point,
    Solution,
    build_solution_graph,
    drone_tour,
    truck_tour,
)

from constructions import INSTANCE_4, deadlock_solution, drone_swap_solution
from helpers import weave_random_solution


def inst_n(n, n_t=1, n_d=1):
    pts = tuple(Point(i + 1, 1) for i in range(n))
    return Instance(n_t, n_d, n, pts, 10000.0)


def test_truck_only_feasible():
    inst = inst_n(3, n_t=1, n_d=0)
    s = Solution((truck_tour(1, (0, 1, 2, 3, 0)),), ())
    assert check_almost_feasible(s, inst).verdict == FEASIBLE
    assert check_feasible(s, inst).verdict == FEASIBLE


def test_three_consecutive_flying_edges_violation():
    inst = inst_n(3)
    t = truck_tour(1, (0, 1, 0), [{1}, set()])
    d = drone_tour(1, (0, 1, 2, 3, 0), [1, 0, 0, 0])
    rep = check_almost_feasible(Solution((t,), (d,)), inst)
    assert rep.verdict == INFEASIBLE
    assert any(rule == "flight-shape" for rule, _ in rep.violations)


def test_flight_range_violation():
    pts = (Point(100, 0), Point(200, 0))
    inst = Instance(1, 1, 2, pts, drone_range=150.0)
    t = truck_tour(1, (0, 1, 0), [{1}, {1}])
    d = drone_tour(1, (0, 1, 2, 0), [1, 0, 0])
    rep = check_almost_feasible(Solution((t,), (d,)), inst)
    assert any(rule == "drone-range" for rule, _ in rep.violations)


def test_carry_mismatch_violation():
    inst = inst_n(2)
    t = truck_tour(1, (0, 1, 2, 0), [{1}, set(), set()])
    d = drone_tour(1, (0, 2, 0), [0, 0])
    rep = check_almost_feasible(Solution((t,), (d,)), inst)
    assert rep.verdict == INFEASIBLE
    assert any(rule == "carry" for rule, _ in rep.violations)


def test_unvisited_package_violation():
    inst = inst_n(3, n_t=1, n_d=0)
    s = Solution((truck_tour(1, (0, 1, 2, 0)),), ())
    rep = check_feasible(s, inst)
    assert rep.verdict == INFEASIBLE
    assert any(rule == "coverage" for rule, _ in rep.violations)


def test_drone_flying_through_truck_node_violation():
    inst = inst_n(3)
    t = truck_tour(1, (0, 1, 2, 3, 0), [{1}, set(), set(), set()])
    # drone flies 1 -> 2 -> 0 but node 2 belongs to the truck: at 2 the
    # drone is neither carried in nor carried out
    d = drone_tour(1, (0, 1, 2, 0), [1, 0, 0])
    rep = check_almost_feasible(Solution((t,), (d,)), inst)
    assert rep.verdict == INFEASIBLE
    assert any(rule == "node-visit" for rule, _ in rep.violations)


def test_two_trucks_same_node_violation():
    pts = (Point(1, 1), Point(2, 2))
    inst = Instance(2, 0, 2, pts, 10.0)
    t1 = truck_tour(1, (0, 1, 2, 0))
    t2 = truck_tour(2, (0, 1, 0))
    # structurally valid tours; the clash is at node 1
    rep = check_almost_feasible(Solution((t1, t2)[:2], ()), inst)
    assert rep.verdict == INFEASIBLE
    assert any(rule == "node-visit" for rule, _ in rep.violations)


def test_flights_helper_does_not_wrap_depot():
    d = drone_tour(1, (0, 1, 2, 3, 0), [0, 1, 0, 0])
    runs = flights(d)
    assert runs == [(0, 0), (2, 3)]


def test_deadlock_is_almost_feasible_but_inconsistent():
    s = deadlock_solution()
    assert check_almost_feasible(s, INSTANCE_4).verdict == FEASIBLE
    assert check_schedule_consistency_marking(s) is False
    assert check_flip_cycles(build_solution_graph(s, 4)) is False
    assert check_feasible(s, INSTANCE_4).verdict == INCONSISTENT


def test_drone_swap_is_fully_feasible():
    s = drone_swap_solution()
    assert check_almost_feasible(s, INSTANCE_4).verdict == FEASIBLE
    assert check_schedule_consistency_marking(s) is True
    assert check_flip_cycles(build_solution_graph(s, 4)) is True
    assert check_feasible(s, INSTANCE_4).verdict == FEASIBLE


def test_truck_only_graph_has_no_depot_avoiding_cycles():
    s = Solution((truck_tour(1, (0, 1, 2, 3, 0)),), ())
    assert check_flip_cycles(build_solution_graph(s, 3)) is True


def test_marking_monotone_and_bounded():
    for sol in (drone_swap_solution(), deadlock_solution()):
        rounds = marking_rounds(sol)
        total = sum(len(t.nodes) - 1 for t in sol.tours())
        assert len(rounds) <= total
        for a, b in zip(rounds, rounds[1:]):
            assert a < b  # strictly growing marked sets


@settings(max_examples=500)
@given(st.integers(min_value=0, max_value=10**9))
def test_theorem_equivalence_random(seed):
    inst, s = weave_random_solution(random.Random(seed))
    assert check_almost_feasible(s, inst).verdict == FEASIBLE
    mark = check_schedule_consistency_marking(s)
    flip = check_flip_cycles(build_solution_graph(s, inst.n_p))
    assert mark == flip


@settings(max_examples=200)
@given(
    st.integers(min_value=0, max_value=10**9),
    st.randoms(use_true_random=False),
)
def test_flip_check_invariant_under_relabeling(seed, pyrng):
    inst, s = weave_random_solution(random.Random(seed))
    perm = list(range(1, inst.n_p + 1))
    pyrng.shuffle(perm)
    mapping = {0: 0, **{i + 1: perm[i] for i in range(inst.n_p)}}

    def relabel(tour):
        return type(tour)(
            tour.vehicle, tuple(mapping[v] for v in tour.nodes), tour.carry
        )

    s2 = Solution(
        tuple(relabel(t) for t in s.truck_tours),
        tuple(relabel(d) for d in s.drone_tours),
    )
    g1 = build_solution_graph(s, inst.n_p)
    g2 = build_solution_graph(s2, inst.n_p)
    assert check_flip_cycles(g1) == check_flip_cycles(g2)
