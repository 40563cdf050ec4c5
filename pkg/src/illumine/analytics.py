"""Post-run map analytics: rescaled maps, coverage and failure metrics,
failure-probability cells with Wilson intervals, and rank statistics for
comparing run groups.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .archive import RunArchive
from .errors import IllumineError
from .mapelites import EvalRecord

HIGHLIGHT_MP = 0.8
HIGHLIGHT_CI_LOW = 0.65
DEFAULT_GRID = 25
DEFAULT_Z = 1.96
PERMUTATIONS = 499


@dataclass(frozen=True)
class RescaleSpec:
    grid_size: int
    mins: tuple[float, ...]
    maxs: tuple[float, ...]

    def __post_init__(self):
        if self.grid_size < 1:
            raise ValueError("grid size must be >= 1")
        for lo, hi in zip(self.mins, self.maxs):
            if not hi > lo:
                raise IllumineError(f"degenerate feature range [{lo}, {hi}]")

    def bin_of(self, features) -> tuple[int, ...]:
        out = []
        for f, lo, hi in zip(features, self.mins, self.maxs):
            if f < lo - 1e-9 or f > hi + 1e-9:
                raise IllumineError(f"feature value {f} outside rescale range [{lo}, {hi}]")
            x = int(math.floor(self.grid_size * (f - lo) / (hi - lo)))
            out.append(min(max(x, 0), self.grid_size - 1))  # f == max folds into the last bin
        return tuple(out)


@dataclass
class RescaledCell:
    coords: tuple[int, ...]
    elite_id: int
    elite_fitness: float
    total_evals: int
    misbehaving_evals: int


@dataclass
class RescaledMap:
    grid_size: int
    feature_pair: tuple[str, ...]
    spec: RescaleSpec
    cells: dict[tuple[int, ...], RescaledCell]


def observed_feature_ranges(archives: list[RunArchive]) -> tuple[tuple[float, ...], tuple[float, ...]]:
    """Per-feature min/max over the mapped evaluations of all archives."""
    pairs = {a.feature_pair for a in archives}
    if len(pairs) != 1:
        raise IllumineError(f"archives mix feature pairs: {sorted(pairs)}")
    dims = len(next(iter(pairs)))
    mins = [math.inf] * dims
    maxs = [-math.inf] * dims
    for a in archives:
        for rec in a.mapped_records():
            for i, v in enumerate(rec.features):
                mins[i] = min(mins[i], v)
                maxs[i] = max(maxs[i], v)
    if not all(math.isfinite(v) for v in mins + maxs):
        raise IllumineError("no mapped evaluations to take ranges from")
    return tuple(mins), tuple(maxs)


def rescale_archive(archive: RunArchive, spec: RescaleSpec) -> RescaledMap:
    """Re-bin every mapped evaluation onto the common grid, re-aggregating
    counters and recomputing per-cell elites."""
    cells: dict[tuple[int, ...], RescaledCell] = {}
    for rec in archive.mapped_records():
        coords = spec.bin_of(rec.features)
        cell = cells.get(coords)
        if cell is None:
            cells[coords] = RescaledCell(coords, rec.id, rec.fitness, 1,
                                         1 if rec.misbehaviour else 0)
        else:
            cell.total_evals += 1
            if rec.misbehaviour:
                cell.misbehaving_evals += 1
            if rec.fitness < cell.elite_fitness:
                cell.elite_fitness = rec.fitness
                cell.elite_id = rec.id
    return RescaledMap(spec.grid_size, archive.feature_pair, spec, cells)


def rescale(archives: list[RunArchive], grid_size: int = DEFAULT_GRID,
            spec: RescaleSpec | None = None) -> list[RescaledMap]:
    """Rescale several runs onto one shared grid (shared min/max)."""
    if spec is None:
        mins, maxs = observed_feature_ranges(archives)
        spec = RescaleSpec(grid_size, mins, maxs)
    return [rescale_archive(a, spec) for a in archives]


def merge_maps(maps: list[RescaledMap]) -> RescaledMap:
    """Pool counters of several rescaled maps cell by cell."""
    if not maps:
        raise IllumineError("nothing to merge")
    out: dict[tuple[int, ...], RescaledCell] = {}
    for m in maps:
        for coords, cell in m.cells.items():
            tgt = out.get(coords)
            if tgt is None:
                out[coords] = RescaledCell(coords, cell.elite_id, cell.elite_fitness,
                                           cell.total_evals, cell.misbehaving_evals)
            else:
                tgt.total_evals += cell.total_evals
                tgt.misbehaving_evals += cell.misbehaving_evals
                if cell.elite_fitness < tgt.elite_fitness:
                    tgt.elite_fitness = cell.elite_fitness
                    tgt.elite_id = cell.elite_id
    return RescaledMap(maps[0].grid_size, maps[0].feature_pair, maps[0].spec, out)


# ---------------------------------------------------------------------------
# map metrics


def _cells_of(m) -> dict:
    return m.cells


def filled_cells(m) -> int:
    """FC: cells with at least one evaluation."""
    return sum(1 for c in _cells_of(m).values() if c.total_evals >= 1)


def mapped_misbehaviours(m) -> int:
    """MM: cells with at least one misbehaving evaluation."""
    return sum(1 for c in _cells_of(m).values() if c.misbehaving_evals >= 1)


def misbehaving_coords(m) -> list[tuple[int, ...]]:
    return [coords for coords, c in _cells_of(m).items() if c.misbehaving_evals >= 1]


def sparseness(coords: list[tuple[int, ...]] | set) -> float:
    """Average over cells of the maximum Manhattan distance to any other
    cell in the set. Zero for a singleton."""
    pts = list(coords)
    if not pts:
        raise IllumineError("sparseness of an empty cell set")
    arr = np.asarray(pts, dtype=float)
    dist = np.abs(arr[:, None, :] - arr[None, :, :]).sum(axis=2)
    return float(dist.max(axis=1).mean())


def misbehaviour_sparseness(m) -> float:
    """MS: sparseness over cells containing misbehaviours (0 when none)."""
    coords = misbehaving_coords(m)
    if not coords:
        return 0.0
    return sparseness(coords)


def coverage_sparseness(m) -> float:
    """CS: sparseness over filled cells."""
    return sparseness(list(_cells_of(m).keys()))


# ---------------------------------------------------------------------------
# failure probability


def wilson_interval(k: int, n: int, z: float = DEFAULT_Z) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion."""
    if n < 1:
        raise ValueError("need at least one trial")
    if not 0 <= k <= n:
        raise ValueError("k must lie in [0, n]")
    p = k / n
    z2n = z * z / n
    center = (p + z2n / 2.0) / (1.0 + z2n)
    half = (z / (1.0 + z2n)) * math.sqrt(p * (1.0 - p) / n + z * z / (4.0 * n * n))
    return (max(0.0, center - half), min(1.0, center + half))


@dataclass(frozen=True)
class ProbabilityCell:
    coords: tuple[int, ...]
    mp: float
    ci_low: float
    ci_high: float
    highlighted: bool
    total_evals: int
    misbehaving_evals: int


def probability_map(m, z: float = DEFAULT_Z) -> list[ProbabilityCell]:
    """Per-cell misbehaviour probability with its Wilson interval. A cell is
    highlighted when MP > 0.8 and the interval's lower bound exceeds 0.65."""
    out = []
    for coords in sorted(_cells_of(m)):
        cell = _cells_of(m)[coords]
        n = cell.total_evals
        k = cell.misbehaving_evals
        mp = k / n
        lo, hi = wilson_interval(k, n, z)
        out.append(ProbabilityCell(
            coords=coords, mp=mp, ci_low=lo, ci_high=hi,
            highlighted=(mp > HIGHLIGHT_MP and lo > HIGHLIGHT_CI_LOW),
            total_evals=n, misbehaving_evals=k,
        ))
    return out


# ---------------------------------------------------------------------------
# correlation and run comparison


def pearson(xs, ys, permutations: int = PERMUTATIONS, rng_seed: int = 0) -> dict:
    """Product-moment correlation with a two-sided permutation p-value.

    With 499 resamples the smallest attainable p is 1/500 = 0.002. Resampled
    |r| must strictly exceed the observed |r| to count as more extreme, so a
    perfect correlation always reports the floor.
    """
    x = np.asarray(xs, dtype=float)
    y = np.asarray(ys, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("xs and ys must be equal-length vectors")
    if len(x) < 3:
        raise IllumineError("need at least 3 observations")
    if x.std() == 0 or y.std() == 0:
        raise IllumineError("zero variance: correlation undefined")

    def corr(a, b):
        a = a - a.mean()
        b = b - b.mean()
        return float((a * b).sum() / math.sqrt((a * a).sum() * (b * b).sum()))

    r_obs = corr(x, y)
    rng = np.random.default_rng(rng_seed)
    exceed = 0
    for _ in range(permutations):
        if abs(corr(x, y[rng.permutation(len(y))])) > abs(r_obs):
            exceed += 1
    return {"r": r_obs, "p": (1 + exceed) / (1 + permutations)}


def _midranks(values: np.ndarray) -> np.ndarray:
    order = np.argsort(values, kind="stable")
    ranks = np.empty(len(values), dtype=float)
    sorted_vals = values[order]
    i = 0
    while i < len(values):
        j = i
        while j + 1 < len(values) and sorted_vals[j + 1] == sorted_vals[i]:
            j += 1
        ranks[order[i : j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


def mann_whitney_u(a, b) -> dict:
    """U statistic (for the first sample) with tie-corrected normal
    approximation, two-sided, with continuity correction."""
    x = np.asarray(a, dtype=float)
    y = np.asarray(b, dtype=float)
    if len(x) == 0 or len(y) == 0:
        raise IllumineError("both samples must be non-empty")
    n1, n2 = len(x), len(y)
    combined = np.concatenate([x, y])
    ranks = _midranks(combined)
    r1 = float(ranks[:n1].sum())
    u1 = r1 - n1 * (n1 + 1) / 2.0
    mu = n1 * n2 / 2.0
    n = n1 + n2
    _, counts = np.unique(combined, return_counts=True)
    tie_term = float(((counts**3 - counts).sum())) / (n * (n - 1)) if n > 1 else 0.0
    var = n1 * n2 / 12.0 * ((n + 1) - tie_term)
    if var <= 0:
        return {"U": u1, "p": 1.0}
    z = (u1 - mu - math.copysign(0.5, u1 - mu)) / math.sqrt(var) if u1 != mu else 0.0
    p = 2.0 * (1.0 - 0.5 * (1.0 + math.erf(abs(z) / math.sqrt(2.0))))
    return {"U": u1, "p": min(p, 1.0)}


def vargha_delaney_a12(a, b) -> float:
    """Probability-of-superiority effect size: (#(a>b) + 0.5 #(a=b)) / (nm)."""
    x = np.asarray(a, dtype=float)[:, None]
    y = np.asarray(b, dtype=float)[None, :]
    if x.size == 0 or y.size == 0:
        raise IllumineError("both samples must be non-empty")
    wins = (x > y).sum() + 0.5 * (x == y).sum()
    return float(wins / (x.size * y.size))


def agreement_within_one(a, b) -> float:
    """Share of paired ratings equal or one scale step apart (helper for
    inter-rater tables)."""
    x = np.asarray(a, dtype=float)
    y = np.asarray(b, dtype=float)
    if x.shape != y.shape:
        raise ValueError("paired ratings must align")
    return float(np.mean(np.abs(x - y) <= 1.0))


# ---------------------------------------------------------------------------
# exports


def map_metrics(m) -> dict:
    return {
        "MM": mapped_misbehaviours(m),
        "MS": misbehaviour_sparseness(m),
        "FC": filled_cells(m),
        "CS": coverage_sparseness(m),
    }


def write_cells_csv(m, path: str | Path, z: float = DEFAULT_Z) -> None:
    """One row per cell: coordinates, elite fitness, counters, MP and CI."""
    probs = {c.coords: c for c in probability_map(m, z)}
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["x", "y", "elite_fitness", "total_evals", "misbehaving_evals",
                    "mp", "ci_low", "ci_high", "highlighted"])
        for coords in sorted(_cells_of(m)):
            cell = _cells_of(m)[coords]
            pc = probs[coords]
            w.writerow([*coords, repr(cell.elite_fitness), cell.total_evals,
                        cell.misbehaving_evals, repr(pc.mp), repr(pc.ci_low),
                        repr(pc.ci_high), int(pc.highlighted)])


def compare_groups(group_a: list[dict], group_b: list[dict]) -> dict:
    """Per-metric comparison of two run groups (dicts from map_metrics)."""
    out = {}
    for metric in ("MM", "MS", "FC", "CS"):
        a = [g[metric] for g in group_a]
        b = [g[metric] for g in group_b]
        mw = mann_whitney_u(a, b)
        out[metric] = {
            "mean_a": float(np.mean(a)), "sd_a": float(np.std(a, ddof=1)) if len(a) > 1 else 0.0,
            "mean_b": float(np.mean(b)), "sd_b": float(np.std(b, ddof=1)) if len(b) > 1 else 0.0,
            "median_a": float(np.median(a)), "median_b": float(np.median(b)),
            "U": mw["U"], "p": mw["p"], "A12": vargha_delaney_a12(a, b),
        }
    return out
