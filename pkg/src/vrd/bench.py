"""Instance generation, experiment orchestration, report emission and SVG
tour plots.

Experiments follow the measurement protocol of the long-run study: each row
fixes (n_p, n_t, n_d), samples several instances by seed, runs the selected
pipelines on shared instances, and reports per-pipeline means plus the
greedy/final and no-drones/final ratio columns. Desk-scale runs shrink only
the stop criteria (via the scale factor), never the instance semantics, so
orderings rather than absolute values are the reproducible targets.
"""

from __future__ import annotations

import json
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from random import Random
from xml.sax.saxutils import quoteattr

from .model import Instance, Point, Solution
from .schedule import objective
from .search import SolveConfig, derive_seed, run_outer_search
from . import construct

PIPELINES = ("final", "initial", "no_drones", "greedy")


@dataclass(frozen=True)
class ExperimentRow:
    n_p: int
    n_t: int
    n_d: int
    seeds: tuple[int, ...]


@dataclass(frozen=True)
class ExperimentSpec:
    rows: tuple[ExperimentRow, ...]
    pipelines: tuple[str, ...] = PIPELINES
    scale: float = 1.0
    package_range: int = 200
    drone_range: float = 10000.0
    config: SolveConfig = field(default_factory=SolveConfig)

    def __post_init__(self):
        for p in self.pipelines:
            if p not in PIPELINES:
                raise ValueError(f"unknown pipeline {p!r}")


@dataclass
class SampleResult:
    seed: int
    objectives: dict[str, float]
    seconds: float


@dataclass
class RowReport:
    n_p: int
    n_t: int
    n_d: int
    samples: list[SampleResult]
    partial: bool = False

    def mean(self, pipeline: str) -> float | None:
        vals = [s.objectives[pipeline] for s in self.samples if pipeline in s.objectives]
        if not vals:
            return None
        return sum(vals) / len(vals)


@dataclass
class Report:
    pipelines: tuple[str, ...]
    rows: list[RowReport]


def gen_instance(
    n_p: int,
    n_t: int,
    n_d: int,
    package_range: int = 200,
    drone_range: float = 10000.0,
    seed: int = 0,
) -> Instance:
    """Positions i.i.d. uniform on the centered integer grid
    [-R/2, R/2]^2 minus the depot; deterministic per seed."""
    rng = Random(derive_seed(seed, "instance"))
    half = package_range // 2
    pts = []
    while len(pts) < n_p:
        p = (rng.randint(-half, half), rng.randint(-half, half))
        if p != (0, 0):
            pts.append(Point(*p))
    return Instance(n_t, n_d, n_p, tuple(pts), drone_range)


def run_sample(spec: ExperimentSpec, row: ExperimentRow, seed: int) -> SampleResult:
    """All requested pipelines on one instance; the mTSP tours are shared
    between them for comparability."""
    cfg = spec.config.scaled(spec.scale)
    inst = gen_instance(
        row.n_p, row.n_t, row.n_d, spec.package_range, spec.drone_range, seed
    )
    t0 = time.perf_counter()
    objectives: dict[str, float] = {}
    pre = construct.solve_mtsp(inst, cfg.n_angles, cfg.tsp, derive_seed(seed, "mtsp"))
    if "no_drones" in spec.pipelines:
        objectives["no_drones"] = objective(pre, inst)
    if "greedy" in spec.pipelines:
        objectives["greedy"] = objective(construct.greedy_drones(inst, pre), inst)
    if "initial" in spec.pipelines or "final" in spec.pipelines:
        initial = construct.initial_from_mtsp(
            pre, inst, cfg.speedup1, derive_seed(seed, "speedup1")
        )
        if "initial" in spec.pipelines:
            objectives["initial"] = objective(initial, inst)
        if "final" in spec.pipelines:
            final = run_outer_search(
                initial, cfg.outer, cfg.speedup2, inst, derive_seed(seed, "outer")
            )
            objectives["final"] = objective(final, inst)
    return SampleResult(seed, objectives, time.perf_counter() - t0)


def _worker(args):
    spec, row, seed = args
    return run_sample(spec, row, seed)


def run_experiment(spec: ExperimentSpec, workers: int | None = None) -> Report:
    """Run every pipeline on every sample of every row.

    The pool size comes from `workers` or the VRD_WORKERS environment
    variable; aggregation folds samples in seed order, so results do not
    depend on the pool.
    """
    if workers is None:
        workers = int(os.environ.get("VRD_WORKERS", "1"))
    jobs = [(spec, row, seed) for row in spec.rows for seed in row.seeds]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_worker, jobs))
    else:
        results = [_worker(j) for j in jobs]
    report_rows = []
    at = 0
    for row in spec.rows:
        samples = []
        partial = False
        for _seed in row.seeds:
            res = results[at]
            at += 1
            if res.objectives:
                samples.append(res)
            else:
                partial = True
        report_rows.append(RowReport(row.n_p, row.n_t, row.n_d, samples, partial))
    return Report(tuple(spec.pipelines), report_rows)


def _columns(report: Report):
    cols = ["row", "n_p", "n_t", "n_d"]
    cols += [p for p in PIPELINES if p in report.pipelines]
    if "greedy" in report.pipelines and "final" in report.pipelines:
        cols.append("greedy_over_final")
    if "no_drones" in report.pipelines and "final" in report.pipelines:
        cols.append("no_drones_over_final")
    n_samples = max((len(r.samples) for r in report.rows), default=0)
    for i in range(n_samples):
        cols.append(f"sample{i}_seed")
        for p in PIPELINES:
            if p in report.pipelines:
                cols.append(f"sample{i}_{p}")
        cols.append(f"sample{i}_seconds")
    return cols


def _row_values(report: Report, idx: int, row: RowReport) -> dict:
    out = {"row": idx, "n_p": row.n_p, "n_t": row.n_t, "n_d": row.n_d}
    for p in PIPELINES:
        if p in report.pipelines:
            m = row.mean(p)
            out[p] = m
    if "greedy" in report.pipelines and "final" in report.pipelines:
        g, f = row.mean("greedy"), row.mean("final")
        out["greedy_over_final"] = g / f if g is not None and f else None
    if "no_drones" in report.pipelines and "final" in report.pipelines:
        n, f = row.mean("no_drones"), row.mean("final")
        out["no_drones_over_final"] = n / f if n is not None and f else None
    for i, s in enumerate(row.samples):
        out[f"sample{i}_seed"] = s.seed
        for p in PIPELINES:
            if p in report.pipelines:
                out[f"sample{i}_{p}"] = s.objectives.get(p)
        out[f"sample{i}_seconds"] = round(s.seconds)
    return out


def emit_report(report: Report, fmt: str = "csv") -> str:
    """Deterministic column order: row id, shape, pipeline means, ratio
    columns, then per-sample blocks. Wall-clock is reported in whole
    seconds."""
    cols = _columns(report)
    if fmt == "json":
        doc = {
            "pipelines": list(report.pipelines),
            "columns": cols,
            "rows": [
                _row_values(report, i, r) for i, r in enumerate(report.rows)
            ],
        }
        return json.dumps(doc, indent=2)
    if fmt != "csv":
        raise ValueError(f"unknown report format {fmt!r}")
    lines = [",".join(cols)]
    for i, r in enumerate(report.rows):
        vals = _row_values(report, i, r)
        cells = []
        for c in cols:
            v = vals.get(c)
            if v is None:
                cells.append("")
            elif isinstance(v, float):
                cells.append(repr(v))
            else:
                cells.append(str(v))
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"


def experiment_spec_from_doc(doc: dict) -> ExperimentSpec:
    from .search import solve_config_from_doc

    rows = tuple(
        ExperimentRow(r["n_p"], r["n_t"], r["n_d"], tuple(r["seeds"]))
        for r in doc["rows"]
    )
    return ExperimentSpec(
        rows=rows,
        pipelines=tuple(doc.get("pipelines", PIPELINES)),
        scale=float(doc.get("scale", 1.0)),
        package_range=int(doc.get("package_range", 200)),
        drone_range=float(doc.get("drone_range", 10000.0)),
        config=solve_config_from_doc(doc.get("config", {})),
    )


# --- SVG tour plots ---

TRUCK_LOADED = "black"
TRUCK_EMPTY = "blue"
DRONE_RIDING = "black"
DRONE_FLYING = "green"


def _edge_color(tour, e) -> str:
    if tour.vehicle.kind == "truck":
        return TRUCK_LOADED if tour.carry[e] else TRUCK_EMPTY
    return DRONE_FLYING if tour.carry[e] == 0 else DRONE_RIDING


def render_tours_svg(
    s: Solution, inst: Instance, per_vehicle: bool = False
) -> str:
    """One line element per tour edge, coloured by load: loaded truck edges
    and ridden drone edges black, empty truck edges blue, flying edges
    green. The first panel overlays all tours; with per_vehicle=True one
    panel per vehicle follows."""
    xs = [0] + [p.x for p in inst.positions]
    ys = [0] + [p.y for p in inst.positions]
    margin = max(4, (max(xs) - min(xs)) // 20)
    x0, x1 = min(xs) - margin, max(xs) + margin
    y0, y1 = min(ys) - margin, max(ys) + margin
    w, h = x1 - x0, y1 - y0

    def sx(x):
        return x - x0

    def sy(y):
        return y1 - y  # flip: SVG y grows downward

    panels = [("all", list(s.tours()))]
    if per_vehicle:
        panels += [(str(t.vehicle), [t]) for t in s.tours()]

    parts = []
    for pi, (name, tours) in enumerate(panels):
        ox = pi * (w + margin)
        parts.append(f'<g id={quoteattr("panel-" + name)} transform="translate({ox},0)">')
        for t in tours:
            parts.append(f'<g id={quoteattr(f"panel{pi}-{t.vehicle}")}>')
            for e, (u, v) in enumerate(t.edges()):
                a, b = inst.position(u), inst.position(v)
                parts.append(
                    f'<line x1="{sx(a.x)}" y1="{sy(a.y)}" x2="{sx(b.x)}" '
                    f'y2="{sy(b.y)}" stroke="{_edge_color(t, e)}" '
                    f'stroke-width="0.6"/>'
                )
            parts.append("</g>")
        parts.append(f'<rect x="{sx(0) - 1.5}" y="{sy(0) - 1.5}" width="3" height="3" fill="red"/>')
        parts.append("</g>")
    total_w = len(panels) * (w + margin)
    return (
        f'<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {total_w} {h}" '
        f'width="{total_w}" height="{h}">' + "".join(parts) + "</svg>"
    )
