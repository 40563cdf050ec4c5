"""Digit input model: closed Bezier paths on a 28x28 canvas.

Genomes are edited at the model level (control points), then rasterized to
grayscale for the classifier. Mutation never touches pixels directly.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

import numpy as np

from .bezier import eval_cubic
from .errors import FeatureUndefinedError, MutationError, ValidityError

CANVAS = 28
LIGHT_THRESHOLD = 127  # a pixel is "light" when strictly above this
SUPERSAMPLE = 4
FLATTEN_CHORDS = 16


@dataclass
class DigitGenome:
    """Closed Bezier subpaths plus the ground-truth label they represent.

    paths[i] is a (n_segments, 4, 2) array; consecutive segments share
    anchors and the last segment ends where the first starts. The label is
    fixed: model-level edits preserve what digit the shape depicts.
    """

    expected_label: int
    paths: list[np.ndarray]
    _raster: np.ndarray | None = field(default=None, repr=False, compare=False)

    def validate(self) -> None:
        if not (0 <= self.expected_label <= 9):
            raise ValidityError(f"label {self.expected_label} out of range")
        for p, segs in enumerate(self.paths):
            if segs.ndim != 3 or segs.shape[1:] != (4, 2):
                raise ValidityError(f"subpath {p} has shape {segs.shape}")
            if np.hypot(*(segs[-1, 3] - segs[0, 0])) > 1e-9:
                raise ValidityError(f"subpath {p} is not closed")
            for k in range(len(segs) - 1):
                if np.hypot(*(segs[k, 3] - segs[k + 1, 0])) > 1e-9:
                    raise ValidityError(f"subpath {p} breaks between segments {k} and {k + 1}")
            if segs.min() < 0.0 or segs.max() > CANVAS:
                raise ValidityError(f"subpath {p} leaves the {CANVAS}x{CANVAS} canvas")

    def copy(self) -> "DigitGenome":
        return DigitGenome(self.expected_label, [p.copy() for p in self.paths])

    def to_json_dict(self) -> dict:
        return {
            "expected_label": self.expected_label,
            "paths": [p.tolist() for p in self.paths],
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "DigitGenome":
        paths = [np.asarray(p, dtype=float) for p in d["paths"]]
        return cls(int(d["expected_label"]), paths)


def _polygon_edges(genome: DigitGenome) -> np.ndarray:
    """All flattened edges of all subpaths as an (E, 4) array x0,y0,x1,y1."""
    ts = np.linspace(0.0, 1.0, FLATTEN_CHORDS + 1)
    chunks = []
    for segs in genome.paths:
        poly = np.vstack([eval_cubic(seg, ts)[:-1] for seg in segs])
        nxt = np.roll(poly, -1, axis=0)
        chunks.append(np.hstack([poly, nxt]))
    if not chunks:
        return np.zeros((0, 4))
    return np.vstack(chunks)


def rasterize(genome: DigitGenome) -> np.ndarray:
    """Render to a 28x28 uint8 grayscale image.

    Even-odd fill; each pixel value is round(255 * covered fraction) with the
    fraction estimated on a fixed 4x4 subsample grid, so rendering is a pure
    function of the genome.
    """
    if genome._raster is not None:
        return genome._raster
    edges = _polygon_edges(genome)
    n = CANVAS * SUPERSAMPLE
    centers = (np.arange(n) + 0.5) / SUPERSAMPLE
    if len(edges) == 0:
        img = np.zeros((CANVAS, CANVAS), dtype=np.uint8)
        genome._raster = img
        return img
    x0, y0, x1, y1 = edges.T
    ylo = np.minimum(y0, y1)
    yhi = np.maximum(y0, y1)
    ys = centers[:, None]
    valid = (ys >= ylo) & (ys < yhi)  # half-open: vertices counted once
    with np.errstate(divide="ignore", invalid="ignore"):
        t = (ys - y0) / (y1 - y0)
        xc = x0 + t * (x1 - x0)
    xc = np.where(valid, xc, np.inf)
    xc.sort(axis=1)
    inside = np.empty((n, n), dtype=bool)
    for i in range(n):
        inside[i] = (np.searchsorted(xc[i], centers) % 2).astype(bool)
    coverage = inside.reshape(CANVAS, SUPERSAMPLE, CANVAS, SUPERSAMPLE).mean(axis=(1, 3))
    img = np.rint(coverage * 255).astype(np.uint8)
    genome._raster = img
    return img


def raster_bytes(raster: np.ndarray) -> bytes:
    """Raw grayscale bytes, row-major, as stored in run archives."""
    r = np.asarray(raster, dtype=np.uint8)
    if r.shape != (CANVAS, CANVAS):
        raise ValueError(f"expected {CANVAS}x{CANVAS} raster, got {r.shape}")
    return r.tobytes()


def raster_digest(raster: np.ndarray) -> str:
    return hashlib.sha256(raster_bytes(raster)).hexdigest()


# ---------------------------------------------------------------------------
# mutation


def _point_slots(genome: DigitGenome) -> list[tuple[int, int, int]]:
    """Enumerate distinct movable points as (subpath, segment, role).

    role 0 = the anchor shared by this segment's start and the previous
    segment's end; roles 1 and 2 = the two control points.
    """
    slots = []
    for p, segs in enumerate(genome.paths):
        for k in range(len(segs)):
            slots.append((p, k, 0))
            slots.append((p, k, 1))
            slots.append((p, k, 2))
    return slots


def _displace(genome: DigitGenome, slot: tuple[int, int, int], delta: np.ndarray) -> DigitGenome | None:
    """Apply a displacement to one point slot; None when it leaves the canvas."""
    p, k, role = slot
    g = genome.copy()
    segs = g.paths[p]
    if role == 0:
        prev = (k - 1) % len(segs)
        moved = segs[k, 0] + delta
        if moved.min() < 0.0 or moved.max() > CANVAS:
            return None
        segs[k, 0] = moved
        segs[prev, 3] = moved  # closure twin moves jointly
    else:
        idx = role  # 1 or 2
        moved = segs[k, idx] + delta
        if moved.min() < 0.0 or moved.max() > CANVAS:
            return None
        segs[k, idx] = moved
    return g


def mutate_digit(genome: DigitGenome, lb: float, ub: float, rng: np.random.Generator,
                 max_attempts: int = 50) -> DigitGenome:
    """Displace one uniformly chosen anchor or control point.

    Each axis moves by an independently signed magnitude drawn uniformly from
    [lb, ub]. Candidates that leave the canvas or whose raster is identical
    to the parent's are resampled, up to max_attempts.
    """
    if not (0 < lb < ub):
        raise ValueError("require 0 < lb < ub")
    slots = _point_slots(genome)
    parent_raster = rasterize(genome)
    for _ in range(max_attempts):
        slot = slots[int(rng.integers(len(slots)))]
        mag = rng.uniform(lb, ub, size=2)
        sign = np.where(rng.integers(0, 2, size=2) == 0, -1.0, 1.0)
        child = _displace(genome, slot, mag * sign)
        if child is None:
            continue
        if np.array_equal(rasterize(child), parent_raster):
            continue
        return child
    raise MutationError(f"no visibly distinct in-canvas mutant after {max_attempts} attempts")


# ---------------------------------------------------------------------------
# feature metrics


def feat_luminosity(raster: np.ndarray) -> int:
    """Count of light pixels (value strictly above 127)."""
    return int(np.count_nonzero(np.asarray(raster) > LIGHT_THRESHOLD))


def feat_moves(genome: DigitGenome) -> float:
    """Sum of gaps between consecutive subpaths: distance from the end anchor
    of one subpath to the start anchor of the next, in trace order."""
    if not genome.paths:
        raise FeatureUndefinedError("genome has no subpaths")
    total = 0.0
    for a, b in zip(genome.paths[:-1], genome.paths[1:]):
        total += float(np.hypot(*(b[0, 0] - a[-1, 3])))
    return total


def feat_orientation(raster: np.ndarray) -> float:
    """Least-squares slope of pixel row regressed on pixel column over all
    non-black pixels (value > 0)."""
    r = np.asarray(raster)
    rows, cols = np.nonzero(r > 0)
    if len(cols) < 2:
        raise FeatureUndefinedError("fewer than two non-black pixels")
    cvar = cols.var()
    if cvar == 0:
        raise FeatureUndefinedError("single-column stroke: orientation undefined")
    cov = np.mean((cols - cols.mean()) * (rows - rows.mean()))
    return float(cov / cvar)


# ---------------------------------------------------------------------------
# serialization helpers


def genome_to_json(genome: DigitGenome) -> str:
    return json.dumps(genome.to_json_dict(), sort_keys=True)


def genome_from_json(text: str) -> DigitGenome:
    return DigitGenome.from_json_dict(json.loads(text))


def genome_to_svg(genome: DigitGenome, scale: float = 8.0) -> str:
    """SVG path document for a genome (even-odd fill), for report galleries."""
    size = CANVAS * scale
    cmds = []
    for segs in genome.paths:
        s = segs * scale
        cmds.append(f"M {s[0, 0, 0]:.3f} {s[0, 0, 1]:.3f} ")
        for seg in s:
            cmds.append(
                f"C {seg[1, 0]:.3f} {seg[1, 1]:.3f} {seg[2, 0]:.3f} {seg[2, 1]:.3f} "
                f"{seg[3, 0]:.3f} {seg[3, 1]:.3f} "
            )
        cmds.append("Z ")
    d = "".join(cmds).strip()
    return (
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{size:.0f}" height="{size:.0f}" '
        f'viewBox="0 0 {size:.0f} {size:.0f}">'
        f'<rect width="100%" height="100%" fill="white"/>'
        f'<path d="{d}" fill="black" fill-rule="evenodd"/></svg>'
    )
