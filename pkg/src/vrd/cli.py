"""Command-line interface: generate instances, solve them, evaluate and
verify solutions, run benchmark sweeps and plot tours."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from random import Random

from . import bench, construct
from .feasibility import FEASIBLE, INCONSISTENT, check_feasible
from .model import parse_instance, parse_solution, serialize_instance, serialize_solution
from .schedule import compute_schedule, objective
from .search import (
    SolveConfig,
    derive_seed,
    run_outer_search,
    solve,
    solve_config_from_doc,
)


def _load_instance(path: str):
    return parse_instance(Path(path).read_text(encoding="utf-8"))


def _load_solution(path: str, inst):
    return parse_solution(Path(path).read_text(encoding="utf-8"), inst)


def _load_config(args) -> SolveConfig:
    cfg = SolveConfig()
    if getattr(args, "config", None):
        cfg = solve_config_from_doc(json.loads(Path(args.config).read_text("utf-8")))
    scale = getattr(args, "scale", 1.0)
    return cfg.scaled(scale)


def _write(path: str | None, text: str):
    if path is None or path == "-":
        sys.stdout.write(text if text.endswith("\n") else text + "\n")
    else:
        Path(path).write_text(text, encoding="utf-8")


def cmd_gen(args):
    inst = bench.gen_instance(
        args.n_p, args.n_t, args.n_d, args.package_range, args.drone_range, args.seed
    )
    _write(args.output, serialize_instance(inst))
    return 0


def cmd_mtsp(args):
    inst = _load_instance(args.instance)
    cfg = _load_config(args)
    sol = construct.solve_mtsp(
        inst, cfg.n_angles, cfg.tsp, derive_seed(args.seed, "mtsp")
    )
    _write(args.output, serialize_solution(sol))
    print(f"objective: {objective(sol, inst):.6f}", file=sys.stderr)
    return 0


def cmd_greedy(args):
    inst = _load_instance(args.instance)
    cfg = _load_config(args)
    pre = construct.solve_mtsp(
        inst, cfg.n_angles, cfg.tsp, derive_seed(args.seed, "mtsp")
    )
    sol = construct.greedy_drones(inst, pre, args.seed)
    _write(args.output, serialize_solution(sol))
    print(f"objective: {objective(sol, inst):.6f}", file=sys.stderr)
    return 0


def cmd_solve(args):
    inst = _load_instance(args.instance)
    cfg = _load_config(args)
    outcome = solve(inst, cfg, args.seed)
    _write(args.output, serialize_solution(outcome.final))
    for stage in ("pre_initial", "initial", "final"):
        print(f"{stage}: {outcome.objectives[stage]:.6f}", file=sys.stderr)
    if args.report:
        doc = {"objectives": outcome.objectives, "timings": outcome.timings}
        Path(args.report).write_text(json.dumps(doc, indent=2), encoding="utf-8")
    return 0


def cmd_eval(args):
    inst = _load_instance(args.instance)
    sol = _load_solution(args.solution, inst)
    sched = compute_schedule(sol, inst)
    print(f"{objective(sol, inst):.6f}")
    print("package,x,y,delivery_time,vehicle")
    for p in range(1, inst.n_p + 1):
        d = sched.deliveries[p]
        pt = inst.position(p)
        print(f"{p},{pt.x},{pt.y},{d.time!r},{d.vehicle}")
    return 0


def cmd_check(args):
    inst = _load_instance(args.instance)
    sol = _load_solution(args.solution, inst)
    report = check_feasible(sol, inst)
    print(report.render())
    if report.verdict == FEASIBLE:
        return 0
    return 1 if report.verdict == INCONSISTENT else 2


def cmd_bench(args):
    doc = json.loads(Path(args.spec).read_text(encoding="utf-8"))
    spec = bench.experiment_spec_from_doc(doc)
    if args.scale is not None:
        from dataclasses import replace

        spec = replace(spec, scale=args.scale)
    report = bench.run_experiment(spec, workers=args.workers)
    _write(args.out, bench.emit_report(report, args.format))
    return 0


def cmd_plot(args):
    inst = _load_instance(args.instance)
    sol = _load_solution(args.solution, inst)
    _write(args.out, bench.render_tours_svg(sol, inst, per_vehicle=args.per_vehicle))
    return 0


def cmd_debug_move(args):
    """Reproduce a single sampled small move of a given type from a seed."""
    from . import neighborhoods as nb

    inst = _load_instance(args.instance)
    sol = _load_solution(args.solution, inst)
    rng = Random(args.seed)
    areas = nb.find_speedup_areas(sol)
    if not areas:
        print("no interaction areas", file=sys.stderr)
        return 2
    for _ in range(100000):
        area = areas[rng.randrange(len(areas))]
        res = nb.sample_small_neighbor(sol, area, rng, inst)
        if res is None:
            continue
        cand, move = res
        if args.type is not None and move.move_type != args.type:
            continue
        print(f"move: type={move.move_type} anchor={move.anchor} params={move.params}")
        print(f"area: drone={area.drone} truck={area.truck} [{area.start},{area.end}]")
        print(f"objective: {objective(sol, inst):.6f} -> {objective(cand, inst):.6f}")
        print(f"feasible: {check_feasible(cand, inst).verdict}")
        return 0
    print("no matching move sampled", file=sys.stderr)
    return 1


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="vrd",
        description="Vehicle routing with truck-carried delivery drones.",
    )
    sub = ap.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="generate a random instance")
    g.add_argument("--n-p", type=int, required=True)
    g.add_argument("--n-t", type=int, required=True)
    g.add_argument("--n-d", type=int, required=True)
    g.add_argument("--package-range", type=int, default=200)
    g.add_argument("--drone-range", type=float, default=10000.0)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("-o", "--output", default="-")
    g.set_defaults(fn=cmd_gen)

    for name, fn in (("mtsp", cmd_mtsp), ("greedy", cmd_greedy)):
        p = sub.add_parser(name, help=f"{name} construction")
        p.add_argument("--instance", required=True)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--config")
        p.add_argument("--scale", type=float, default=1.0)
        p.add_argument("-o", "--output", default="-")
        p.set_defaults(fn=fn)

    p = sub.add_parser("solve", help="full nested-search pipeline")
    p.add_argument("--instance", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--config")
    p.add_argument("--scale", type=float, default=1.0)
    p.add_argument("--report")
    p.add_argument("-o", "--output", default="-")
    p.set_defaults(fn=cmd_solve)

    p = sub.add_parser("eval", help="objective and per-package delivery table")
    p.add_argument("--instance", required=True)
    p.add_argument("--solution", required=True)
    p.set_defaults(fn=cmd_eval)

    p = sub.add_parser("check", help="feasibility report (exit 0/1/2)")
    p.add_argument("--instance", required=True)
    p.add_argument("--solution", required=True)
    p.set_defaults(fn=cmd_check)

    p = sub.add_parser("bench", help="run an experiment spec")
    p.add_argument("--spec", required=True)
    p.add_argument("--out", default="-")
    p.add_argument("--scale", type=float, default=None)
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--workers", type=int, default=None)
    p.set_defaults(fn=cmd_bench)

    p = sub.add_parser("plot", help="render tours as SVG")
    p.add_argument("--instance", required=True)
    p.add_argument("--solution", required=True)
    p.add_argument("--out", default="-")
    p.add_argument("--per-vehicle", action="store_true")
    p.set_defaults(fn=cmd_plot)

    p = sub.add_parser("debug-move")
    p.add_argument("--instance", required=True)
    p.add_argument("--solution", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--type", type=int, default=None)
    p.set_defaults(fn=cmd_debug_move)

    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
