"""Hand-built fixtures: a circular-wait deadlock and a consistent drone
swap, both over two trucks and two drones."""

from vrd.model import Instance, Point, Solution, drone_tour, truck_tour

INSTANCE_4 = Instance(
    2, 2, 4, (Point(1, 1), Point(2, 2), Point(-1, -1), Point(-2, -2)), 10000.0
)


def deadlock_solution() -> Solution:
    """Each truck waits at its first stop for the other truck's drone, but
    that drone can only fly once its own truck has moved past the stop."""
    t1 = truck_tour(1, (0, 1, 2, 0), [{1}, {1, 2}, {2}])
    t2 = truck_tour(2, (0, 3, 4, 0), [{2}, {2, 1}, {1}])
    d1 = drone_tour(1, (0, 1, 2, 3, 4, 0), [1, 1, 0, 2, 2])
    d2 = drone_tour(2, (0, 3, 4, 1, 2, 0), [2, 2, 0, 1, 1])
    return Solution((t1, t2), (d1, d2))


def drone_swap_solution() -> Solution:
    """Drone 1 flies 1 -> 3 while drone 2 flies 3 -> 1; the crossing flights
    form a depot-avoiding cycle whose consecutive edges belong to different
    drones (a flip), so the schedule still completes."""
    t1 = truck_tour(1, (0, 1, 2, 0), [{1}, {2}, {2}])
    t2 = truck_tour(2, (0, 3, 4, 0), [{2}, {1}, {1}])
    d1 = drone_tour(1, (0, 1, 3, 4, 0), [1, 0, 2, 2])
    d2 = drone_tour(2, (0, 3, 1, 2, 0), [2, 0, 1, 1])
    return Solution((t1, t2), (d1, d2))
