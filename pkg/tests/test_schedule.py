import math
import random

import pytest
from hypothesis import given, settings, strategies as st
from pytest import approx

from vrd.feasibility import check_feasible
from vrd.model import (
    Instance,
    Point,
    Solution,
    VehicleId,
    drone_tour,
    truck_tour,
)
from vrd.schedule import (
    Delivery,
    attribute_deliveries,
    compute_schedule,
    edge_length,
    objective,
)

from helpers import simulate_objective, weave_random_solution


def test_edge_length_cases():
    assert edge_length("truck", Point(0, 0), Point(3, 4)) == 7.0
    assert edge_length("ride", Point(0, 0), Point(3, 4)) == 7.0
    assert edge_length("fly", Point(0, 0), Point(3, 4)) == 5.0
    assert edge_length("fly", Point(0, 0), Point(0, 0)) == 0.0
    with pytest.raises(ValueError):
        edge_length("boat", Point(0, 0), Point(1, 1))


def test_truck_only_two_packages():
    inst = Instance(1, 0, 2, (Point(3, 4), Point(3, 10)), 10000.0)
    s = Solution((truck_tour(1, (0, 1, 2, 0)),), ())
    sched = compute_schedule(s, inst)
    assert sched.arrivals[VehicleId("truck", 1)] == (0.0, 7.0, 13.0, 26.0)
    assert objective(s, inst) == approx(10.0)


def test_single_package_objective():
    inst = Instance(1, 0, 1, (Point(3, 4),), 10000.0)
    s = Solution((truck_tour(1, (0, 1, 0)),), ())
    assert objective(s, inst) == approx(7.0)


def test_rendezvous_waiting():
    # truck drives 0 -> (10,0) -> (20,0) -> 0; the drone leaves at node 1,
    # delivers (14,3) and rejoins at node 2, where both wait for the later one
    inst = Instance(1, 1, 3, (Point(10, 0), Point(20, 0), Point(14, 3)), 10000.0)
    t = truck_tour(1, (0, 1, 2, 0), [{1}, set(), {1}])
    d = drone_tour(1, (0, 1, 3, 2, 0), [1, 0, 0, 1])
    s = Solution((t,), (d,))
    sched = compute_schedule(s, inst)
    truck, drone = VehicleId("truck", 1), VehicleId("drone", 1)
    drone_back = 10 + 5 + math.sqrt(36 + 9)
    assert sched.arrivals[drone][2] == approx(15.0)  # 10 + fly((10,0),(14,3))
    assert sched.arrivals[drone][3] == approx(drone_back)
    assert sched.arrivals[truck][2] == approx(20.0)
    # joint departure onto the last edge waits for the drone
    assert sched.departures[truck][2] == approx(drone_back)
    assert sched.departures[drone][3] == approx(drone_back)
    assert objective(s, inst) == approx((10 + 15 + 20) / 3)


def test_class_synchronization_invariant():
    s_inst = weave_random_solution(random.Random(99))
    inst, s = s_inst
    from vrd.feasibility import check_schedule_consistency_marking

    if not check_schedule_consistency_marking(s):
        pytest.skip("weave happened to be inconsistent")
    sched = compute_schedule(s, inst)
    for t in s.truck_tours:
        for e, (u, v) in enumerate(t.edges()):
            for di in t.carry[e]:
                d = s.drone(di)
                pos = d.edge_index()[(u, v)]
                assert sched.departures[d.vehicle][pos] == approx(
                    sched.departures[t.vehicle][e]
                )
                assert sched.arrivals[d.vehicle][pos + 1] == approx(
                    sched.arrivals[t.vehicle][e + 1]
                )


def test_out_and_back_drone_delivers_middle():
    inst = Instance(1, 1, 2, (Point(10, 0), Point(5, 5)), 10000.0)
    t = truck_tour(1, (0, 1, 0), [{1}, {1}])
    d = drone_tour(1, (0, 2, 1, 0), [0, 0, 1])
    s = Solution((t,), (d,))
    sched = compute_schedule(s, inst)
    assert sched.deliveries[2].vehicle == VehicleId("drone", 1)
    assert sched.deliveries[2].time == approx(math.hypot(5, 5))


def test_returning_drone_cannot_deliver_landing_node():
    # the drone delivers (1,2) mid-flight and lands at (10,0) well before
    # the truck gets there; having delivered on this flight it is
    # ineligible, so the truck delivers the landing node on arrival
    inst = Instance(1, 1, 3, (Point(10, 0), Point(1, 2), Point(0, 8)), 10000.0)
    t = truck_tour(1, (0, 3, 1, 0), [set(), set(), {1}])
    d = drone_tour(1, (0, 2, 1, 0), [0, 0, 1])
    s = Solution((t,), (d,))
    sched = compute_schedule(s, inst)
    drone_lands = math.hypot(1, 2) + math.hypot(9, 2)
    truck_arrives = 8.0 + (10 + 8)
    assert drone_lands < truck_arrives
    assert sched.arrivals[VehicleId("drone", 1)][2] == approx(drone_lands)
    assert sched.deliveries[1] == Delivery(approx(truck_arrives), VehicleId("truck", 1))
    assert sched.deliveries[2].vehicle == VehicleId("drone", 1)


def test_tie_breaks_prefer_truck_then_index():
    # both truck and carried drones arrive together; the truck delivers
    inst = Instance(1, 2, 1, (Point(4, 4),), 10000.0)
    t = truck_tour(1, (0, 1, 0), [{1, 2}, {1, 2}])
    d1 = drone_tour(1, (0, 1, 0), [1, 1])
    d2 = drone_tour(2, (0, 1, 0), [1, 1])
    s = Solution((t,), (d1, d2))
    sched = compute_schedule(s, inst)
    assert sched.deliveries[1].vehicle == VehicleId("truck", 1)


def test_landing_drone_may_deliver_when_first():
    # a 1-edge flight carries no package, so the drone may deliver where it
    # lands if it beats the truck there
    inst = Instance(1, 1, 2, (Point(3, 4), Point(30, 0)), 10000.0)
    t = truck_tour(1, (0, 1, 2, 0), [{1}, set(), {1}])
    d = drone_tour(1, (0, 1, 2, 0), [1, 0, 1])  # hop 1 -> 2 with no delivery
    s = Solution((t,), (d,))
    sched = compute_schedule(s, inst)
    fly_time = 7 + math.hypot(27, 4)
    assert fly_time < 7 + 27 + 4
    assert sched.deliveries[2] == Delivery(approx(fly_time), VehicleId("drone", 1))


def test_attribute_deliveries_matches_schedule():
    inst, s = None, None
    rng = random.Random(3)
    from vrd.feasibility import check_feasible as cf

    while True:
        inst, s = weave_random_solution(rng)
        if cf(s, inst).verdict == "feasible":
            break
    sched = compute_schedule(s, inst)
    assert attribute_deliveries(s, sched) == sched.deliveries


def test_determinism():
    inst = Instance(1, 1, 3, (Point(10, 0), Point(20, 0), Point(14, 3)), 10000.0)
    t = truck_tour(1, (0, 1, 2, 0), [{1}, set(), {1}])
    d = drone_tour(1, (0, 1, 3, 2, 0), [1, 0, 0, 1])
    s = Solution((t,), (d,))
    assert compute_schedule(s, inst) == compute_schedule(s, inst)
    assert objective(s, inst) == objective(s, inst)


def test_monotone_prefix():
    # dropping the final package of a truck-only tour never delays the rest
    rng = random.Random(5)
    for _ in range(50):
        n = rng.randint(2, 8)
        pts = []
        while len(pts) < n:
            p = (rng.randint(-9, 9), rng.randint(-9, 9))
            if p != (0, 0):
                pts.append(Point(*p))
        inst = Instance(1, 0, n, tuple(pts), 10.0)
        prefix = list(range(1, n))
        rng.shuffle(prefix)
        full = Solution((truck_tour(1, (0, *prefix, n, 0)),), ())
        sched_full = compute_schedule(full, inst)
        trimmed_inst = Instance(1, 0, n - 1, tuple(pts[:-1]), 10.0)
        trimmed = Solution((truck_tour(1, (0, *prefix, 0)),), ())
        sched_trim = compute_schedule(trimmed, trimmed_inst)
        for p in prefix:
            assert (
                sched_trim.deliveries[p].time
                <= sched_full.deliveries[p].time + 1e-9
            )


@settings(max_examples=300)
@given(st.integers(min_value=0, max_value=10**9))
def test_objective_matches_event_simulator(seed):
    inst, s = weave_random_solution(random.Random(seed))
    if check_feasible(s, inst).verdict != "feasible":
        return
    assert objective(s, inst) == approx(simulate_objective(s, inst), abs=1e-9)
