"""Local search engines and the nested solve pipeline.

Engines are generic over an opaque state: sampling engines (random descent,
Metropolis, parallel tempering) need ``sample(state, rng) -> state | None``,
enumerating engines (steepest descent, tabu) need
``enumerate(state) -> iterable of (state, signature, inverse signature)``.
Every engine tracks and returns the best state seen, so its result never
exceeds the initial objective. "Steps without improvement" counts sampled
neighbours (accepted or not, across all replicas) since the last strict
improvement of the global best.
"""

from __future__ import annotations

import hashlib
import math
import time
from collections import deque
from dataclasses import dataclass, field, replace
from random import Random
from typing import Callable, Iterable, Optional

from .model import Instance, Solution


def derive_seed(seed: int, *tags) -> int:
    """Stable 63-bit child seed for an independent stream."""
    digest = hashlib.sha256(repr((seed, *tags)).encode()).digest()
    return int.from_bytes(digest[:8], "big") >> 1


STEEPEST = "steepest"
RANDOM_DESCENT = "random-descent"
TABU = "tabu"
METROPOLIS = "metropolis"
PARALLEL_TEMPERING = "parallel-tempering"
PIPED = "piped"


@dataclass(frozen=True)
class StopCriterion:
    max_steps_without_improvement: int | None = None
    max_runtime_ms: float | None = None

    def __post_init__(self):
        if self.max_steps_without_improvement is None and self.max_runtime_ms is None:
            raise ValueError("stop criterion needs at least one bound")

    def scaled(self, factor: float) -> "StopCriterion":
        steps = self.max_steps_without_improvement
        ms = self.max_runtime_ms
        return StopCriterion(
            None if steps is None else max(1, round(steps * factor)),
            None if ms is None else ms * factor,
        )


@dataclass(frozen=True)
class TemperatureLadder:
    min_temperature: float
    max_temperature: float
    replicas: int = 3

    def __post_init__(self):
        if not 0 < self.min_temperature < self.max_temperature:
            raise ValueError("need 0 < min temperature < max temperature")
        if self.replicas < 2:
            raise ValueError("need at least two replicas")

    def temperatures(self) -> list[float]:
        """Geometric ladder from min to max, strictly increasing."""
        lo, hi, k = self.min_temperature, self.max_temperature, self.replicas
        ratio = hi / lo
        return [lo * ratio ** (i / (k - 1)) for i in range(k)]


@dataclass(frozen=True)
class SearchConfig:
    method: str
    stop: StopCriterion | None = None
    ladder: TemperatureLadder | None = None
    temperature: float | None = None
    tabu_tenure: int | None = None
    swap_interval: int = 50
    pipeline: tuple["SearchConfig", ...] = ()
    seed: int | None = None

    def __post_init__(self):
        if self.method == PIPED:
            if not self.pipeline:
                raise ValueError("piped config needs stages")
            return
        if self.stop is None:
            raise ValueError(f"{self.method} needs a stop criterion")
        if self.method == PARALLEL_TEMPERING and self.ladder is None:
            raise ValueError("parallel tempering needs a temperature ladder")
        if self.method == METROPOLIS and (
            self.temperature is None or self.temperature <= 0
        ):
            raise ValueError("metropolis needs a positive temperature")
        if self.method == TABU and self.tabu_tenure is None:
            raise ValueError("tabu needs a tenure")
        if self.method not in (
            STEEPEST,
            RANDOM_DESCENT,
            TABU,
            METROPOLIS,
            PARALLEL_TEMPERING,
        ):
            raise ValueError(f"unknown search method {self.method!r}")

    def scaled(self, factor: float) -> "SearchConfig":
        if self.method == PIPED:
            return replace(
                self, pipeline=tuple(c.scaled(factor) for c in self.pipeline)
            )
        return replace(self, stop=self.stop.scaled(factor))


@dataclass
class SearchStats:
    samples: int = 0
    accepted: int = 0
    improvements: int = 0
    swaps: int = 0
    elapsed_s: float = 0.0

    def merge(self, other: "SearchStats") -> "SearchStats":
        return SearchStats(
            self.samples + other.samples,
            self.accepted + other.accepted,
            self.improvements + other.improvements,
            self.swaps + other.swaps,
            self.elapsed_s + other.elapsed_s,
        )


@dataclass
class SearchResult:
    state: object
    objective: float
    stats: SearchStats


class _Budget:
    def __init__(self, stop: StopCriterion):
        self.stall = 0
        self.max_stall = stop.max_steps_without_improvement
        self.deadline = None
        if stop.max_runtime_ms is not None:
            self.deadline = time.perf_counter() + stop.max_runtime_ms / 1000.0

    def step(self):
        self.stall += 1

    def improved(self):
        self.stall = 0

    def exhausted(self) -> bool:
        if self.max_stall is not None and self.stall >= self.max_stall:
            return True
        return self.deadline is not None and time.perf_counter() >= self.deadline


def metropolis_accept(delta: float, temperature: float, rng: Random) -> bool:
    """Accept improvements always, worsenings with probability exp(-d/T)."""
    if delta <= 0:
        return True
    if temperature <= 0:
        return False
    return rng.random() < math.exp(-delta / temperature)


def swap_accept(
    obj_a: float, obj_b: float, temp_a: float, temp_b: float, rng: Random
) -> bool:
    """Replica-exchange rule: min(1, exp((1/Ta - 1/Tb) * (f(a) - f(b))))."""
    exponent = (1.0 / temp_a - 1.0 / temp_b) * (obj_a - obj_b)
    if exponent >= 0:
        return True
    return rng.random() < math.exp(exponent)


SampleFn = Callable[[object, Random], Optional[object]]
EnumerateFn = Callable[[object], Iterable[tuple[object, object, object]]]


def random_descent(init, sample: SampleFn, obj, stop: StopCriterion, seed: int):
    rng = Random(derive_seed(seed, "random-descent"))
    start = time.perf_counter()
    budget = _Budget(stop)
    stats = SearchStats()
    cur, cur_obj = init, obj(init)
    best, best_obj = cur, cur_obj
    while not budget.exhausted():
        cand = sample(cur, rng)
        stats.samples += 1
        budget.step()
        if cand is None:
            continue
        c = obj(cand)
        if c < cur_obj:
            cur, cur_obj = cand, c
            stats.accepted += 1
            if c < best_obj:
                best, best_obj = cand, c
                stats.improvements += 1
                budget.improved()
    stats.elapsed_s = time.perf_counter() - start
    return SearchResult(best, best_obj, stats)


def metropolis(
    init, sample: SampleFn, obj, temperature: float, stop: StopCriterion, seed: int
):
    rng = Random(derive_seed(seed, "metropolis"))
    start = time.perf_counter()
    budget = _Budget(stop)
    stats = SearchStats()
    cur, cur_obj = init, obj(init)
    best, best_obj = cur, cur_obj
    while not budget.exhausted():
        cand = sample(cur, rng)
        stats.samples += 1
        budget.step()
        if cand is None:
            continue
        c = obj(cand)
        if metropolis_accept(c - cur_obj, temperature, rng):
            cur, cur_obj = cand, c
            stats.accepted += 1
            if c < best_obj:
                best, best_obj = cand, c
                stats.improvements += 1
                budget.improved()
    stats.elapsed_s = time.perf_counter() - start
    return SearchResult(best, best_obj, stats)


def parallel_tempering(
    init,
    sample: SampleFn,
    obj,
    ladder: TemperatureLadder,
    stop: StopCriterion,
    seed: int,
    swap_interval: int = 50,
):
    """Metropolis replicas on a temperature ladder with adjacent swaps.

    Replicas are stepped round-robin from per-replica streams; every
    ``swap_interval`` sweeps one uniformly chosen adjacent pair attempts a
    state exchange drawn from a separately seeded swap stream, keeping
    single-worker runs bit-reproducible.
    """
    temps = ladder.temperatures()
    k = len(temps)
    rngs = [Random(derive_seed(seed, "replica", i)) for i in range(k)]
    swap_rng = Random(derive_seed(seed, "swap"))
    start = time.perf_counter()
    budget = _Budget(stop)
    stats = SearchStats()
    init_obj = obj(init)
    states = [init] * k
    objs = [init_obj] * k
    best, best_obj = init, init_obj
    sweep = 0
    while not budget.exhausted():
        for i in range(k):
            cand = sample(states[i], rngs[i])
            stats.samples += 1
            budget.step()
            if cand is not None:
                c = obj(cand)
                if metropolis_accept(c - objs[i], temps[i], rngs[i]):
                    states[i], objs[i] = cand, c
                    stats.accepted += 1
                    if c < best_obj:
                        best, best_obj = cand, c
                        stats.improvements += 1
                        budget.improved()
            if budget.exhausted():
                break
        sweep += 1
        if k >= 2 and sweep % swap_interval == 0:
            j = swap_rng.randrange(k - 1)
            if swap_accept(objs[j], objs[j + 1], temps[j], temps[j + 1], swap_rng):
                states[j], states[j + 1] = states[j + 1], states[j]
                objs[j], objs[j + 1] = objs[j + 1], objs[j]
                stats.swaps += 1
    stats.elapsed_s = time.perf_counter() - start
    return SearchResult(best, best_obj, stats)


def steepest_descent(init, enumerate_fn: EnumerateFn, obj, stop: StopCriterion):
    """Move to the best neighbour while it improves; stop at a local optimum."""
    start = time.perf_counter()
    budget = _Budget(stop)
    stats = SearchStats()
    cur, cur_obj = init, obj(init)
    while not budget.exhausted():
        best_cand, best_c = None, cur_obj
        for cand, _sig, _inv in enumerate_fn(cur):
            stats.samples += 1
            c = obj(cand)
            if c < best_c:
                best_cand, best_c = cand, c
        if best_cand is None:
            break
        cur, cur_obj = best_cand, best_c
        stats.accepted += 1
        stats.improvements += 1
        budget.improved()
    stats.elapsed_s = time.perf_counter() - start
    return SearchResult(cur, cur_obj, stats)


def tabu_search(
    init, enumerate_fn: EnumerateFn, obj, tenure: int, stop: StopCriterion, seed: int
):
    """Steepest step over non-tabu moves with best-solution aspiration.

    After accepting a move its inverse signature becomes tabu for `tenure`
    iterations. One iteration (full neighbourhood sweep) counts as one step
    towards the stall bound.
    """
    start = time.perf_counter()
    budget = _Budget(stop)
    stats = SearchStats()
    cur, cur_obj = init, obj(init)
    best, best_obj = cur, cur_obj
    tabu: deque = deque(maxlen=tenure) if tenure > 0 else deque(maxlen=1)
    while not budget.exhausted():
        chosen = None
        chosen_obj = None
        chosen_inv = None
        for cand, sig, inv in enumerate_fn(cur):
            stats.samples += 1
            c = obj(cand)
            if tenure > 0 and sig in tabu and not c < best_obj:
                continue  # tabu, and aspiration does not fire
            if chosen is None or c < chosen_obj:
                chosen, chosen_obj, chosen_inv = cand, c, inv
        if chosen is None:
            break  # everything tabu
        cur, cur_obj = chosen, chosen_obj
        stats.accepted += 1
        if tenure > 0:
            tabu.append(chosen_inv)
        if cur_obj < best_obj:
            best, best_obj = cur, cur_obj
            stats.improvements += 1
            budget.improved()
        else:
            budget.step()
    stats.elapsed_s = time.perf_counter() - start
    return SearchResult(best, best_obj, stats)


def run_config(
    cfg: SearchConfig,
    init,
    obj,
    sample: SampleFn | None = None,
    enumerate_fn: EnumerateFn | None = None,
    seed: int = 0,
) -> SearchResult:
    """Dispatch one engine (or a pipe of engines) on an opaque state."""
    if cfg.seed is not None:
        seed = cfg.seed
    if cfg.method == PIPED:
        state = init
        stats = SearchStats()
        result = None
        for i, stage in enumerate(cfg.pipeline):
            result = run_config(
                stage, state, obj, sample, enumerate_fn, derive_seed(seed, "pipe", i)
            )
            state = result.state
            stats = stats.merge(result.stats)
        return SearchResult(result.state, result.objective, stats)
    if cfg.method == RANDOM_DESCENT:
        return random_descent(init, _need(sample, cfg), obj, cfg.stop, seed)
    if cfg.method == METROPOLIS:
        return metropolis(init, _need(sample, cfg), obj, cfg.temperature, cfg.stop, seed)
    if cfg.method == PARALLEL_TEMPERING:
        return parallel_tempering(
            init, _need(sample, cfg), obj, cfg.ladder, cfg.stop, seed, cfg.swap_interval
        )
    if cfg.method == STEEPEST:
        return steepest_descent(init, _need(enumerate_fn, cfg), obj, cfg.stop)
    if cfg.method == TABU:
        return tabu_search(
            init, _need(enumerate_fn, cfg), obj, cfg.tabu_tenure, cfg.stop, seed
        )
    raise ValueError(f"unknown search method {cfg.method!r}")


def _need(fn, cfg):
    if fn is None:
        raise ValueError(f"method {cfg.method!r} needs a neighbourhood of that form")
    return fn


# --- solver configuration (mirrors the experiment parameter blocks) ---


@dataclass(frozen=True)
class SolveConfig:
    """Per-phase search settings for the full pipeline.

    Defaults reproduce the long-run parameter blocks: TSP and the two
    drone-search phases all run parallel tempering with three replicas.
    """

    n_angles: int = 10
    tsp: SearchConfig = field(
        default_factory=lambda: SearchConfig(
            PARALLEL_TEMPERING,
            stop=StopCriterion(max_steps_without_improvement=1_000_000),
            ladder=TemperatureLadder(1.0e-6, 10.0, 3),
        )
    )
    speedup1: SearchConfig = field(
        default_factory=lambda: SearchConfig(
            PARALLEL_TEMPERING,
            stop=StopCriterion(max_steps_without_improvement=3000),
            ladder=TemperatureLadder(0.001, 1.0, 3),
        )
    )
    outer: SearchConfig = field(
        default_factory=lambda: SearchConfig(
            PARALLEL_TEMPERING,
            stop=StopCriterion(max_steps_without_improvement=5),
            ladder=TemperatureLadder(1.0e-7, 10.0, 3),
        )
    )
    speedup2: SearchConfig = field(
        default_factory=lambda: SearchConfig(
            PARALLEL_TEMPERING,
            stop=StopCriterion(max_steps_without_improvement=5),
            ladder=TemperatureLadder(1.0e-6, 10.0, 3),
        )
    )

    def scaled(self, factor: float) -> "SolveConfig":
        if factor == 1.0:
            return self
        return SolveConfig(
            n_angles=self.n_angles,
            tsp=self.tsp.scaled(factor),
            speedup1=self.speedup1.scaled(factor),
            outer=self.outer.scaled(factor),
            speedup2=self.speedup2.scaled(factor),
        )


def _search_config_to_doc(cfg: SearchConfig) -> dict:
    doc: dict = {"method": cfg.method}
    if cfg.method == PIPED:
        doc["stages"] = [_search_config_to_doc(c) for c in cfg.pipeline]
        return doc
    stop = {}
    if cfg.stop.max_steps_without_improvement is not None:
        stop["max_steps_no_improve"] = cfg.stop.max_steps_without_improvement
    if cfg.stop.max_runtime_ms is not None:
        stop["max_runtime_ms"] = cfg.stop.max_runtime_ms
    doc["stop"] = stop
    if cfg.ladder is not None:
        doc["min_temperature"] = cfg.ladder.min_temperature
        doc["max_temperature"] = cfg.ladder.max_temperature
        doc["replicas"] = cfg.ladder.replicas
    if cfg.temperature is not None:
        doc["temperature"] = cfg.temperature
    if cfg.tabu_tenure is not None:
        doc["tabu_tenure"] = cfg.tabu_tenure
    if cfg.seed is not None:
        doc["seed"] = cfg.seed
    return doc


def _search_config_from_doc(doc: dict) -> SearchConfig:
    method = doc["method"]
    if method == PIPED:
        return SearchConfig(
            PIPED, pipeline=tuple(_search_config_from_doc(d) for d in doc["stages"])
        )
    stop_doc = doc.get("stop", {})
    stop = StopCriterion(
        max_steps_without_improvement=stop_doc.get("max_steps_no_improve"),
        max_runtime_ms=stop_doc.get("max_runtime_ms"),
    )
    ladder = None
    if "min_temperature" in doc:
        ladder = TemperatureLadder(
            doc["min_temperature"], doc["max_temperature"], doc.get("replicas", 3)
        )
    return SearchConfig(
        method,
        stop=stop,
        ladder=ladder,
        temperature=doc.get("temperature"),
        tabu_tenure=doc.get("tabu_tenure"),
        swap_interval=doc.get("swap_interval", 50),
        seed=doc.get("seed"),
    )


def solve_config_to_doc(cfg: SolveConfig) -> dict:
    return {
        "n_angles": cfg.n_angles,
        "tsp": _search_config_to_doc(cfg.tsp),
        "speedup1": _search_config_to_doc(cfg.speedup1),
        "outer": _search_config_to_doc(cfg.outer),
        "speedup2": _search_config_to_doc(cfg.speedup2),
    }


def solve_config_from_doc(doc: dict) -> SolveConfig:
    base = SolveConfig()
    return SolveConfig(
        n_angles=doc.get("n_angles", base.n_angles),
        tsp=_search_config_from_doc(doc["tsp"]) if "tsp" in doc else base.tsp,
        speedup1=_search_config_from_doc(doc["speedup1"])
        if "speedup1" in doc
        else base.speedup1,
        outer=_search_config_from_doc(doc["outer"]) if "outer" in doc else base.outer,
        speedup2=_search_config_from_doc(doc["speedup2"])
        if "speedup2" in doc
        else base.speedup2,
    )


# --- nested search orchestration ---


def run_speedup(
    s: Solution, area, cfg: SearchConfig, inst: Instance, seed: int
) -> Solution:
    """Run the inner drone search over one interaction segment; returns the
    best solution found (never worse than the input)."""
    from . import neighborhoods as nb
    from .schedule import objective

    drone_nodes = s.drone(area.drone).nodes
    start_marker = None if area.start == 0 else drone_nodes[area.start]
    end_marker = None if area.end == len(drone_nodes) - 1 else drone_nodes[area.end]

    def area_for(state: Solution) -> nb.SpeedUpArea:
        nodes = state.drone(area.drone).nodes
        lo = 0 if start_marker is None else nodes.index(start_marker)
        hi = len(nodes) - 1 if end_marker is None else nodes.index(end_marker)
        return nb.SpeedUpArea(area.drone, area.truck, lo, hi)

    if not nb.has_applicable_moves(s, area_for(s), inst):
        return s

    def sample(state: Solution, rng: Random):
        res = nb.sample_small_neighbor(state, area_for(state), rng, inst)
        return None if res is None else res[0]

    result = run_config(cfg, s, lambda x: objective(x, inst), sample=sample, seed=seed)
    return result.state


def run_outer_search(
    s: Solution, outer_cfg: SearchConfig, inner_cfg: SearchConfig,
    inst: Instance, seed: int,
) -> Solution:
    """Outer search over drone changes and package changes; each drone
    change reruns the inner search on the rewired tail segment."""
    from . import neighborhoods as nb
    from .schedule import objective

    def speedup_engine(sol: Solution, area, rng: Random) -> Solution:
        return run_speedup(sol, area, inner_cfg, inst, seed=rng.getrandbits(63))

    def sample(state: Solution, rng: Random):
        res = nb.sample_outer_neighbor(state, inst, speedup_engine, rng)
        return None if res is None else res[0]

    result = run_config(
        outer_cfg, s, lambda x: objective(x, inst), sample=sample, seed=seed
    )
    return result.state


@dataclass
class SolveOutcome:
    pre_initial: Solution
    initial: Solution
    final: Solution
    objectives: dict[str, float]
    timings: dict[str, float]


def solve(inst: Instance, cfg: SolveConfig, seed: int) -> SolveOutcome:
    """mTSP pre-initial -> drone distribution + inner search -> outer search."""
    from . import construct
    from .schedule import objective

    t0 = time.perf_counter()
    pre = construct.solve_mtsp(inst, cfg.n_angles, cfg.tsp, derive_seed(seed, "mtsp"))
    t1 = time.perf_counter()
    initial = construct.initial_from_mtsp(
        pre, inst, cfg.speedup1, derive_seed(seed, "speedup1")
    )
    t2 = time.perf_counter()
    final = run_outer_search(
        initial, cfg.outer, cfg.speedup2, inst, derive_seed(seed, "outer")
    )
    t3 = time.perf_counter()
    return SolveOutcome(
        pre_initial=pre,
        initial=initial,
        final=final,
        objectives={
            "pre_initial": objective(pre, inst),
            "initial": objective(initial, inst),
            "final": objective(final, inst),
        },
        timings={"mtsp": t1 - t0, "initial": t2 - t1, "outer": t3 - t2},
    )
