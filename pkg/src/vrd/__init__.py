"""Vehicle routing with truck-carried delivery drones.

Trucks move on the Manhattan metric and carry drones that fly Euclidean
sorties delivering one package per flight; the objective is the average
delivery time. The package provides the domain model, feasibility and
consistency verification, a synchronized schedule evaluator, nested
local-search solvers, a greedy baseline, and a benchmark harness with a
CLI (`vrd`).
"""

from .model import (
    Instance,
    Point,
    Solution,
    SolutionGraph,
    Tour,
    VehicleId,
    build_solution_graph,
    parse_instance,
    parse_solution,
    serialize_instance,
    serialize_solution,
)
from .feasibility import (
    FeasibilityReport,
    check_almost_feasible,
    check_feasible,
    check_flip_cycles,
    check_schedule_consistency_marking,
)
from .schedule import Schedule, attribute_deliveries, compute_schedule, edge_length, objective
from .search import SearchConfig, SolveConfig, StopCriterion, TemperatureLadder, solve

__all__ = [
    "Instance",
    "Point",
    "Solution",
    "SolutionGraph",
    "Tour",
    "VehicleId",
    "build_solution_graph",
    "parse_instance",
    "parse_solution",
    "serialize_instance",
    "serialize_solution",
    "FeasibilityReport",
    "check_almost_feasible",
    "check_feasible",
    "check_flip_cycles",
    "check_schedule_consistency_marking",
    "Schedule",
    "attribute_deliveries",
    "compute_schedule",
    "edge_length",
    "objective",
    "SearchConfig",
    "SolveConfig",
    "StopCriterion",
    "TemperatureLadder",
    "solve",
]
