"""Illumination search core: a dynamically growing map of elites.

The loop evolves one individual at a time: pick an occupied cell uniformly,
mutate its elite, evaluate, and write the result back into the map. Fitness
is minimized everywhere; negative fitness marks a misbehaviour. Cells keep
the best individual seen plus counters of how many evaluations landed there.
"""
from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Protocol

import numpy as np

from .errors import (EvaluationError, FeatureUndefinedError, IllumineError,
                     MutationError, SeedGenerationError)

MUTATION_RETRY_BOUND = 50
SEED_RETRY_BOUND = 100
DISCARD_GUARD = 2000  # consecutive discarded evaluations before aborting


@dataclass(frozen=True)
class Budget:
    """Either a number of loop evaluations or a wall-clock allowance."""

    evaluations: int | None = None
    seconds: float | None = None

    def __post_init__(self):
        if (self.evaluations is None) == (self.seconds is None):
            raise ValueError("specify exactly one of evaluations or seconds")
        if self.evaluations is not None and self.evaluations < 0:
            raise ValueError("evaluation budget must be >= 0")
        if self.seconds is not None and self.seconds <= 0:
            raise ValueError("time budget must be > 0")

    def to_json_dict(self) -> dict:
        if self.evaluations is not None:
            return {"evaluations": self.evaluations}
        return {"seconds": self.seconds}

    @classmethod
    def from_json_dict(cls, d: dict) -> "Budget":
        return cls(evaluations=d.get("evaluations"), seconds=d.get("seconds"))


@dataclass(frozen=True)
class SearchConfig:
    feature_pair: tuple[str, ...]
    grid_scale_factors: tuple[float, ...]
    seed_pool_size: int = 100
    population_size: int = 50
    budget: Budget = Budget(evaluations=1000)
    mutation_lower_bound: float = 0.01
    mutation_upper_bound: float = 0.6
    rng_seed: int = 0
    workers: int = 1

    def __post_init__(self):
        if not (self.seed_pool_size >= self.population_size >= 1):
            raise ValueError("require seed_pool_size >= population_size >= 1")
        if not (self.mutation_lower_bound < self.mutation_upper_bound):
            raise ValueError("require mutation_lower_bound < mutation_upper_bound")
        if self.mutation_lower_bound <= 0:
            raise ValueError("mutation bounds must be positive")
        if len(self.feature_pair) != len(self.grid_scale_factors):
            raise ValueError("one grid scale factor per feature")
        if any(a <= 0 for a in self.grid_scale_factors):
            raise ValueError("grid scale factors must be positive")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")

    def to_json_dict(self) -> dict:
        return {
            "feature_pair": list(self.feature_pair),
            "grid_scale_factors": list(self.grid_scale_factors),
            "seed_pool_size": self.seed_pool_size,
            "population_size": self.population_size,
            "budget": self.budget.to_json_dict(),
            "mutation_lower_bound": self.mutation_lower_bound,
            "mutation_upper_bound": self.mutation_upper_bound,
            "rng_seed": self.rng_seed,
            "workers": self.workers,
        }


@dataclass
class Individual:
    id: int
    genome: Any
    features: tuple[float, ...]
    fitness: float
    coords: tuple[int, ...]
    parent_id: int | None
    input_digest: str
    input_bytes: bytes = b""

    @property
    def misbehaviour(self) -> bool:
        return self.fitness < 0


@dataclass
class Cell:
    elite: Individual
    total_evals: int = 0
    misbehaving_evals: int = 0


@dataclass
class PlacementReport:
    coords: tuple[int, ...]
    replaced: bool


class FeatureMap:
    """Sparse grid keyed by integer coordinate tuples; grows as new
    coordinates are discovered. Negative coordinates are legal keys."""

    def __init__(self, dims: int):
        self.dims = dims
        self.cells: dict[tuple[int, ...], Cell] = {}
        self._coord_order: list[tuple[int, ...]] = []  # insertion order, append-only

    def __len__(self) -> int:
        return len(self.cells)

    def occupied_coords(self) -> list[tuple[int, ...]]:
        return list(self._coord_order)

    def ranges(self) -> list[tuple[int, int]]:
        """Observed [min, max] per dimension over occupied coordinates."""
        if not self.cells:
            return [(0, -1)] * self.dims
        arr = np.array(self._coord_order)
        return [(int(lo), int(hi)) for lo, hi in zip(arr.min(axis=0), arr.max(axis=0))]

    def covered_cell_count(self) -> int:
        """Number of cells in the axis-aligned range spanned so far."""
        if not self.cells:
            return 0
        out = 1
        for lo, hi in self.ranges():
            out *= hi - lo + 1
        return out


def map_coordinates(features, alphas) -> tuple[int, ...]:
    """Map feature values to integer cell coordinates: floor(alpha_i * f_i)."""
    f = np.asarray(features, dtype=float)
    a = np.asarray(alphas, dtype=float)
    if f.shape != a.shape:
        raise ValueError(f"feature/scale length mismatch: {f.shape} vs {a.shape}")
    bad = ~np.isfinite(f)
    if bad.any():
        raise FeatureUndefinedError(f"non-finite feature at index {int(np.argmax(bad))}")
    return tuple(int(v) for v in np.floor(a * f))


def update_map(fmap: FeatureMap, ind: Individual) -> PlacementReport:
    """Place an evaluated individual: bump the cell counters and replace the
    elite when the cell is empty or the newcomer has strictly lower fitness
    (ties keep the incumbent)."""
    coords = ind.coords
    cell = fmap.cells.get(coords)
    if cell is None:
        fmap.cells[coords] = Cell(elite=ind, total_evals=1,
                                  misbehaving_evals=1 if ind.misbehaviour else 0)
        fmap._coord_order.append(coords)
        return PlacementReport(coords, True)
    cell.total_evals += 1
    if ind.misbehaviour:
        cell.misbehaving_evals += 1
    if ind.fitness < cell.elite.fitness:
        cell.elite = ind
        return PlacementReport(coords, True)
    return PlacementReport(coords, False)


def random_selection(fmap: FeatureMap, rng: np.random.Generator) -> Individual:
    """Elite of a uniformly chosen occupied cell."""
    if not fmap.cells:
        raise IllumineError("cannot select from an empty map")
    order = fmap._coord_order
    return fmap.cells[order[int(rng.integers(len(order)))]].elite


def manhattan(a, b) -> int:
    return int(sum(abs(x - y) for x, y in zip(a, b)))


def initialise_population(seeds: list[Individual], popsize: int,
                          rng: np.random.Generator) -> list[Individual]:
    """Greedy max-min diverse subset of the seeds by map-coordinate
    Manhattan distance, starting from one uniformly random seed."""
    if len(seeds) < popsize:
        raise IllumineError(f"{len(seeds)} seeds cannot fill a population of {popsize}")
    coords = np.array([s.coords for s in seeds], dtype=float)
    first = int(rng.integers(len(seeds)))
    chosen = [first]
    mind = np.abs(coords - coords[first]).sum(axis=1)
    mind[first] = -1.0
    while len(chosen) < popsize:
        nxt = int(np.argmax(mind))
        chosen.append(nxt)
        mind = np.minimum(mind, np.abs(coords - coords[nxt]).sum(axis=1))
        mind[nxt] = -1.0
    return [seeds[i] for i in chosen]


# ---------------------------------------------------------------------------
# domain interface


class DomainAdapter(Protocol):
    """What a domain must provide for the search to run against it."""

    name: str

    def random_seed_genome(self, rng: np.random.Generator) -> Any: ...

    def mutate(self, genome: Any, lb: float, ub: float, rng: np.random.Generator) -> Any: ...

    def evaluate(self, genome: Any, eval_seed: int) -> "Evaluation": ...


@dataclass
class Evaluation:
    features: tuple[float, ...]
    fitness: float
    input_digest: str
    input_bytes: bytes


@dataclass
class EvalRecord:
    """One line of the archive's evaluation log."""

    id: int
    parent_id: int | None
    features: tuple[float, ...]
    fitness: float
    coords: tuple[int, ...]
    misbehaviour: bool
    input_digest: str
    mapped: bool


@dataclass
class RunResult:
    config: SearchConfig
    domain_name: str
    mode: str
    fmap: FeatureMap
    log: list[EvalRecord]
    individuals: dict[int, Individual]
    diagnostics: dict = field(default_factory=dict)


def _budget_exhausted(budget: Budget, loop_evals: int, t0: float) -> bool:
    if budget.evaluations is not None:
        return loop_evals >= budget.evaluations
    return time.monotonic() - t0 >= budget.seconds


def run_search(config: SearchConfig, domain: DomainAdapter, mode: str = "illumination") -> RunResult:
    """Run the full search loop and return the map plus the evaluation log.

    mode "illumination" selects parents from the map; mode "baseline"
    mutates a uniformly random seed from the pool each iteration instead,
    as a random-search control with the identical pipeline.
    """
    if mode not in ("illumination", "baseline"):
        raise ValueError(f"unknown mode {mode!r}")
    t0 = time.monotonic()
    rng = np.random.default_rng(config.rng_seed)
    fmap = FeatureMap(dims=len(config.feature_pair))
    log: list[EvalRecord] = []
    individuals: dict[int, Individual] = {}
    diagnostics = {"discarded_evaluations": 0, "mutation_retries_exhausted": 0,
                   "evaluation_errors": 0}
    next_id = 0

    def evaluate_genome(genome: Any, parent_id: int | None, eval_seed: int) -> Individual:
        nonlocal next_id
        ev = domain.evaluate(genome, eval_seed)
        coords = map_coordinates(ev.features, config.grid_scale_factors)
        ind = Individual(
            id=next_id, genome=genome, features=tuple(float(v) for v in ev.features),
            fitness=float(ev.fitness), coords=coords, parent_id=parent_id,
            input_digest=ev.input_digest, input_bytes=ev.input_bytes,
        )
        next_id += 1
        individuals[ind.id] = ind
        return ind

    # --- seed pool -----------------------------------------------------
    seeds: list[Individual] = []
    pool = ThreadPoolExecutor(max_workers=config.workers) if config.workers > 1 else None
    try:
        while len(seeds) < config.seed_pool_size:
            want = config.seed_pool_size - len(seeds)
            genomes = []
            for _ in range(want):
                genome = None
                for _ in range(SEED_RETRY_BOUND):
                    try:
                        genome = domain.random_seed_genome(rng)
                        break
                    except IllumineError:
                        continue
                if genome is None:
                    raise SeedGenerationError(
                        f"domain {domain.name!r} produced no valid seed in {SEED_RETRY_BOUND} attempts")
                genomes.append((genome, int(rng.integers(2**63))))
            # evaluate in submission order; a worker pool only adds parallelism
            if pool is not None:
                evs = list(pool.map(lambda ge: _try_evaluate(domain, *ge), genomes))
            else:
                evs = [_try_evaluate(domain, g, s) for g, s in genomes]
            for (genome, eval_seed), ev in zip(genomes, evs):
                if ev is None:
                    diagnostics["discarded_evaluations"] += 1
                    continue
                coords = map_coordinates(ev.features, config.grid_scale_factors)
                ind = Individual(
                    id=next_id, genome=genome,
                    features=tuple(float(v) for v in ev.features),
                    fitness=float(ev.fitness), coords=coords, parent_id=None,
                    input_digest=ev.input_digest, input_bytes=ev.input_bytes,
                )
                next_id += 1
                individuals[ind.id] = ind
                seeds.append(ind)
    finally:
        if pool is not None:
            pool.shutdown()

    population = initialise_population(seeds, config.population_size, rng)
    selected_ids = {ind.id for ind in population}
    for ind in seeds:
        log.append(EvalRecord(ind.id, None, ind.features, ind.fitness, ind.coords,
                              ind.misbehaviour, ind.input_digest, ind.id in selected_ids))
    # place the selected population in evaluation order (deterministic replay)
    for ind in sorted(population, key=lambda i: i.id):
        update_map(fmap, ind)

    # --- evolutionary loop ----------------------------------------------
    loop_evals = 0
    consecutive_discards = 0
    while not _budget_exhausted(config.budget, loop_evals, t0):
        if mode == "illumination":
            parent = random_selection(fmap, rng)
        else:
            parent = seeds[int(rng.integers(len(seeds)))]
        child: Individual | None = None
        for _ in range(MUTATION_RETRY_BOUND):
            try:
                genome = domain.mutate(parent.genome, config.mutation_lower_bound,
                                       config.mutation_upper_bound, rng)
            except MutationError:
                diagnostics["mutation_retries_exhausted"] += 1
                break  # reselect a new parent
            eval_seed = int(rng.integers(2**63))
            try:
                child = evaluate_genome(genome, parent.id, eval_seed)
                break
            except (FeatureUndefinedError, EvaluationError):
                diagnostics["discarded_evaluations"] += 1
                consecutive_discards += 1
                if consecutive_discards > DISCARD_GUARD:
                    raise SeedGenerationError(
                        f"{DISCARD_GUARD} consecutive evaluations discarded; aborting")
        if child is None:
            consecutive_discards += 1
            if consecutive_discards > DISCARD_GUARD:
                raise SeedGenerationError(
                    f"{DISCARD_GUARD} consecutive failed mutations; aborting")
            continue
        consecutive_discards = 0
        log.append(EvalRecord(child.id, child.parent_id, child.features, child.fitness,
                              child.coords, child.misbehaviour, child.input_digest, True))
        update_map(fmap, child)
        loop_evals += 1

    diagnostics["loop_evaluations"] = loop_evals
    diagnostics["elapsed_seconds"] = time.monotonic() - t0
    return RunResult(config=config, domain_name=domain.name, mode=mode, fmap=fmap,
                     log=log, individuals=individuals, diagnostics=diagnostics)


def _try_evaluate(domain: DomainAdapter, genome: Any, eval_seed: int) -> Evaluation | None:
    try:
        return domain.evaluate(genome, eval_seed)
    except (FeatureUndefinedError, EvaluationError):
        return None


def replay_map(records: list[EvalRecord], dims: int) -> FeatureMap:
    """Rebuild the final map from an evaluation log (elitism check)."""
    fmap = FeatureMap(dims)
    for rec in records:
        if not rec.mapped:
            continue
        ind = Individual(rec.id, None, rec.features, rec.fitness, rec.coords,
                         rec.parent_id, rec.input_digest)
        update_map(fmap, ind)
    return fmap
