"""Simulated-annealing / genetic search over fixed-budget phase-encode masks.

Each iteration keeps the better half of the pool, breeds as many offspring from it
(tournament selection, uniform crossover, swap mutation), and admits offspring that
beat the worst elite or pass a Metropolis test at the current temperature. Rejected
offspring are replaced by freshly mutated elites, so the pool size is constant and
the best mask is never lost.

All randomness is drawn from generators seeded by ``(seed, iteration, slot, stream)``,
so the result does not depend on evaluation order or on the number of workers.
"""

from __future__ import annotations

import csv
import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .kspace import SamplingMask
from .trajectories import (
    DEFAULT_VD_ALPHA,
    TrajectoryBudget,
    random_mask,
    repair_mask,
    uniform_mask,
    variable_density_mask,
)

logger = logging.getLogger(__name__)

INIT_MODES = ("uniform", "variable-density")

# Stream ids for the per-slot generators.
_BREED, _BARRIER, _REPLACE, _INIT = 0, 1, 2, 3


def _rng(seed: int, iteration: int, slot: int, stream: int) -> np.random.Generator:
    return np.random.default_rng([int(seed), int(iteration), int(slot), int(stream)])


@dataclass
class OptimizerConfig:
    n_iterations: int = 20
    n_candidates: int = 50
    mutation_swaps_mean: float = 2.0
    t_initial: float | None = None
    t_decay: float = 0.85
    seed: int = 0
    init: str = "uniform"
    vd_alpha: float = DEFAULT_VD_ALPHA
    n_jobs: int = 1

    def __post_init__(self):
        if self.init == "vd":
            self.init = "variable-density"
        if self.n_iterations < 0:
            raise ValueError(f"n_iterations must be non-negative, got {self.n_iterations}")
        if self.n_candidates < 2:
            raise ValueError(f"n_candidates must be >= 2, got {self.n_candidates}")
        if self.mutation_swaps_mean < 1:
            raise ValueError(f"mutation_swaps_mean must be >= 1, got {self.mutation_swaps_mean}")
        if self.t_initial is not None and self.t_initial <= 0:
            raise ValueError(f"t_initial must be positive, got {self.t_initial}")
        if not 0 < self.t_decay < 1:
            raise ValueError(f"t_decay must lie in (0, 1), got {self.t_decay}")
        if self.init not in INIT_MODES:
            raise ValueError(f"init must be one of {INIT_MODES}, got {self.init!r}")
        if self.n_jobs < 1:
            raise ValueError(f"n_jobs must be >= 1, got {self.n_jobs}")

    @property
    def max_evaluations(self) -> int:
        return (self.n_iterations + 1) * self.n_candidates


@dataclass(frozen=True)
class Candidate:
    mask: SamplingMask
    cost: float
    origin: str  # "init", "elite" or "offspring"


@dataclass
class IterationRecord:
    iteration: int
    best_cost: float
    mean_cost: float
    temperature: float
    best_mask: SamplingMask
    n_evaluations: int


@dataclass
class OptimizationTrace:
    records: list = field(default_factory=list)
    total_evaluations: int = 0
    wall_time_seconds: float = 0.0

    @property
    def best_costs(self) -> np.ndarray:
        return np.array([r.best_cost for r in self.records])

    def to_csv(self, path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["iteration", "best_cost", "mean_cost", "temperature", "n_evaluations"])
            for r in self.records:
                writer.writerow([r.iteration, repr(r.best_cost), repr(r.mean_cost), repr(r.temperature), r.n_evaluations])
        return path


def crossover(parent_a: SamplingMask, parent_b: SamplingMask, b: TrajectoryBudget, seed=0) -> SamplingMask:
    """Uniform per-line mixing of two parents, repaired back onto the budget.

    Missing lines are restored from the parents' union first, so the child stays
    inside ``a | b`` whenever that union holds at least ``budget`` lines.
    """
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    a, bb = parent_a.indicator, parent_b.indicator
    take_a = rng.random(b.n_lines) < 0.5
    child = np.where(take_a, a, bb)
    return repair_mask(child, b, rng, prefer=a | bb)


def mutate(parent: SamplingMask, b: TrajectoryBudget, swaps_mean: float = 2.0, seed=0) -> SamplingMask:
    """Move ``s ~ Geometric(mean=swaps_mean)`` random non-ACS lines to random unsampled lines."""
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    ind = parent.indicator
    acs = b.acs_indicator
    if not np.any(ind & ~acs) or np.all(ind):
        return parent
    n_swaps = int(rng.geometric(1.0 / swaps_mean))
    for _ in range(n_swaps):
        movable = np.flatnonzero(ind & ~acs)
        free = np.flatnonzero(~ind)
        ind[rng.choice(movable)] = False
        ind[rng.choice(free)] = True
    return SamplingMask.from_indicator(ind)


class _Evaluator:
    """Memoized, optionally threaded cost evaluation with an evaluation counter."""

    def __init__(self, cost_fn, n_jobs: int):
        self.cost_fn = cost_fn
        self.n_jobs = n_jobs
        self.cache: dict[SamplingMask, float] = {}
        self.n_evaluations = 0
        self._pool = ThreadPoolExecutor(max_workers=n_jobs) if n_jobs > 1 else None

    def __call__(self, masks) -> list[float]:
        todo = list(dict.fromkeys(m for m in masks if m not in self.cache))
        if self._pool is not None and len(todo) > 1:
            costs = list(self._pool.map(self.cost_fn, todo))
        else:
            costs = [self.cost_fn(m) for m in todo]
        for m, c in zip(todo, costs):
            c = float(c)
            if not math.isfinite(c) or c < 0:
                raise ValueError(f"cost function returned invalid value {c} for {m!r}")
            self.cache[m] = c
        self.n_evaluations += len(todo)
        return [self.cache[m] for m in masks]

    def close(self):
        if self._pool is not None:
            self._pool.shutdown()


def _initial_masks(b: TrajectoryBudget, cfg: OptimizerConfig) -> list[SamplingMask]:
    masks = [uniform_mask(b)]
    for slot in range(1, cfg.n_candidates):
        rng = _rng(cfg.seed, 0, slot, _INIT)
        if cfg.init == "uniform":
            masks.append(random_mask(b, seed=rng))
        else:
            masks.append(variable_density_mask(b, alpha=cfg.vd_alpha, seed=rng))
    return masks


def _tournament(elites: list[Candidate], rng: np.random.Generator) -> Candidate:
    i, j = rng.integers(len(elites), size=2)
    # Elites are sorted by cost, so the lower index wins.
    return elites[min(i, j)]


def optimize(cost_fn, b: TrajectoryBudget, cfg: OptimizerConfig | None = None):
    """Search for the budget-feasible mask minimizing ``cost_fn(mask)``.

    ``cost_fn`` is typically a :class:`~outcomes.cost.CostContext`. Returns the best
    mask found and the :class:`OptimizationTrace`; the trace has one record for the
    initial pool plus one per iteration.
    """
    cfg = cfg or OptimizerConfig()
    start = time.perf_counter()
    evaluate = _Evaluator(cost_fn, cfg.n_jobs)
    trace = OptimizationTrace()
    # An odd pool keeps the larger half as elites.
    n_offspring = cfg.n_candidates // 2
    n_elite = cfg.n_candidates - n_offspring

    def record(iteration, pool, temperature):
        best = pool[0]
        trace.records.append(
            IterationRecord(
                iteration=iteration,
                best_cost=best.cost,
                mean_cost=float(np.mean([c.cost for c in pool])),
                temperature=temperature,
                best_mask=best.mask,
                n_evaluations=evaluate.n_evaluations,
            )
        )

    def ranked(pool):
        order = sorted(range(len(pool)), key=lambda k: pool[k].cost)
        return [pool[k] for k in order]

    try:
        masks = _initial_masks(b, cfg)
        pool = ranked([Candidate(m, c, "init") for m, c in zip(masks, evaluate(masks))])
        temperature = cfg.t_initial if cfg.t_initial is not None else 0.1 * pool[0].cost
        record(0, pool, temperature)

        for it in range(1, cfg.n_iterations + 1):
            elites = [Candidate(c.mask, c.cost, "elite") for c in pool[:n_elite]]
            worst_elite = elites[-1].cost

            children = []
            for slot in range(n_offspring):
                rng = _rng(cfg.seed, it, slot, _BREED)
                pa, pb = _tournament(elites, rng), _tournament(elites, rng)
                child = crossover(pa.mask, pb.mask, b, rng)
                children.append(mutate(child, b, cfg.mutation_swaps_mean, rng))
            child_costs = evaluate(children)

            barrier = _rng(cfg.seed, it, n_offspring, _BARRIER)
            admitted, rejected_slots = [], []
            for slot, (m, c) in enumerate(zip(children, child_costs)):
                u = barrier.random()
                if c < worst_elite:
                    accept = True
                elif temperature > 0:
                    accept = u < math.exp(-(c - worst_elite) / temperature)
                else:
                    accept = False
                if accept:
                    admitted.append(Candidate(m, c, "offspring"))
                else:
                    rejected_slots.append(slot)

            replacements = []
            for slot in rejected_slots:
                rng = _rng(cfg.seed, it, slot, _REPLACE)
                parent = elites[int(rng.integers(n_elite))]
                replacements.append(mutate(parent.mask, b, cfg.mutation_swaps_mean, rng))
            admitted += [Candidate(m, c, "offspring") for m, c in zip(replacements, evaluate(replacements))]

            pool = ranked(elites + admitted)
            temperature *= cfg.t_decay
            record(it, pool, temperature)
            logger.debug("iteration %d: best %.6g mean %.6g T %.3g", it, pool[0].cost, trace.records[-1].mean_cost, temperature)
    finally:
        evaluate.close()

    trace.total_evaluations = evaluate.n_evaluations
    trace.wall_time_seconds = time.perf_counter() - start
    return pool[0].mask, trace


def config_to_dict(cfg: OptimizerConfig) -> dict:
    return asdict(cfg)


def read_config(path, **overrides) -> OptimizerConfig:
    """Read a flat key/value file (JSON object or ``key = value`` lines) into a config.

    Keys must match :class:`OptimizerConfig` field names; ``overrides`` win.
    """
    import json

    text = Path(path).read_text()
    if text.lstrip().startswith("{"):
        values = json.loads(text)
    else:
        values = {}
        for raw in text.splitlines():
            line = raw.split("#", 1)[0].strip()
            if not line or line.startswith("["):
                continue
            key, _, value = line.partition("=")
            value = value.strip()
            try:
                values[key.strip()] = json.loads(value)
            except json.JSONDecodeError:
                values[key.strip()] = value.strip("'\"")
    known = set(OptimizerConfig.__dataclass_fields__)
    unknown = set(values) - known
    if unknown:
        raise ValueError(f"unknown optimizer config keys: {sorted(unknown)}")
    values.update(overrides)
    return OptimizerConfig(**values)
