"""Cubic Bezier primitives: evaluation, flattening, simplification and fitting.

A segment is a (4, 2) float array: start anchor, two control points, end
anchor. Paths are sequences of segments whose anchors chain together.
"""
from __future__ import annotations

import numpy as np


def eval_cubic(segment: np.ndarray, t: np.ndarray) -> np.ndarray:
    """Evaluate one cubic segment at parameters t (any shape); returns (..., 2)."""
    t = np.asarray(t, dtype=float)[..., None]
    p0, p1, p2, p3 = segment
    u = 1.0 - t
    return (u * u * u) * p0 + (3 * u * u * t) * p1 + (3 * u * t * t) * p2 + (t * t * t) * p3


def flatten_segment(segment: np.ndarray, n: int = 16) -> np.ndarray:
    """Polyline approximation with n chords; returns (n + 1, 2) including endpoints."""
    return eval_cubic(segment, np.linspace(0.0, 1.0, n + 1))


def rdp_indices(points: np.ndarray, epsilon: float) -> np.ndarray:
    """Indices of the vertices kept by Ramer-Douglas-Peucker simplification."""
    pts = np.asarray(points, dtype=float)
    if len(pts) < 3:
        return np.arange(len(pts))
    keep = np.zeros(len(pts), dtype=bool)
    keep[0] = keep[-1] = True
    # iterative stack to avoid recursion limits on long contours
    stack = [(0, len(pts) - 1)]
    while stack:
        lo, hi = stack.pop()
        if hi - lo < 2:
            continue
        a, b = pts[lo], pts[hi]
        chord = b - a
        norm = np.hypot(*chord)
        mid = pts[lo + 1 : hi]
        if norm < 1e-12:
            dist = np.hypot(mid[:, 0] - a[0], mid[:, 1] - a[1])
        else:
            cross = chord[0] * (mid[:, 1] - a[1]) - chord[1] * (mid[:, 0] - a[0])
            dist = np.abs(cross) / norm
        imax = int(np.argmax(dist))
        if dist[imax] > epsilon:
            k = lo + 1 + imax
            keep[k] = True
            stack.append((lo, k))
            stack.append((k, hi))
    return np.flatnonzero(keep)


def rdp(points: np.ndarray, epsilon: float) -> np.ndarray:
    """Ramer-Douglas-Peucker simplification of an open polyline."""
    pts = np.asarray(points, dtype=float)
    return pts[rdp_indices(pts, epsilon)]


def _chord_parameterize(points: np.ndarray) -> np.ndarray:
    d = np.hypot(*np.diff(points, axis=0).T)
    u = np.concatenate([[0.0], np.cumsum(d)])
    total = u[-1]
    if total <= 0:
        return np.linspace(0.0, 1.0, len(points))
    return u / total


def _fit_single_cubic(points: np.ndarray, u: np.ndarray, tan_l: np.ndarray, tan_r: np.ndarray) -> np.ndarray:
    """Least-squares cubic with fixed end anchors and end tangent directions."""
    p0, p3 = points[0], points[-1]
    b1 = 3 * (1 - u) ** 2 * u
    b2 = 3 * (1 - u) * u**2
    a1 = b1[:, None] * tan_l[None, :]
    a2 = b2[:, None] * tan_r[None, :]
    # residual against the degenerate curve with both controls at the anchors
    base = eval_cubic(np.array([p0, p0, p3, p3]), u)
    rhs = points - base
    c00 = np.sum(a1 * a1)
    c01 = np.sum(a1 * a2)
    c11 = np.sum(a2 * a2)
    x0 = np.sum(a1 * rhs)
    x1 = np.sum(a2 * rhs)
    det = c00 * c11 - c01 * c01
    seg_len = float(np.hypot(*(p3 - p0)))
    if abs(det) < 1e-12:
        alpha_l = alpha_r = seg_len / 3.0
    else:
        alpha_l = (x0 * c11 - x1 * c01) / det
        alpha_r = (c00 * x1 - c01 * x0) / det
    eps = 1e-6 * max(seg_len, 1.0)
    if alpha_l < eps or alpha_r < eps:
        alpha_l = alpha_r = seg_len / 3.0
    return np.array([p0, p0 + tan_l * alpha_l, p3 + tan_r * alpha_r, p3])


def _max_error(points: np.ndarray, segment: np.ndarray, u: np.ndarray) -> tuple[float, int]:
    d = eval_cubic(segment, u) - points
    err = np.hypot(d[:, 0], d[:, 1])
    i = int(np.argmax(err))
    return float(err[i]), i


def _unit(v: np.ndarray) -> np.ndarray:
    n = float(np.hypot(*v))
    if n < 1e-12:
        return np.array([1.0, 0.0])
    return v / n


def fit_cubics(points: np.ndarray, max_error: float = 0.75, _depth: int = 0) -> list[np.ndarray]:
    """Fit a run of points with one or more cubics, splitting where the
    least-squares fit exceeds max_error (in the same units as the points)."""
    pts = np.asarray(points, dtype=float)
    if len(pts) < 2:
        raise ValueError("need at least two points to fit")
    if len(pts) == 2:
        d = (pts[1] - pts[0]) / 3.0
        return [np.array([pts[0], pts[0] + d, pts[1] - d, pts[1]])]
    tan_l = _unit(pts[1] - pts[0])
    tan_r = _unit(pts[-2] - pts[-1])
    u = _chord_parameterize(pts)
    seg = _fit_single_cubic(pts, u, tan_l, tan_r)
    err, split = _max_error(pts, seg, u)
    if err <= max_error or len(pts) <= 3 or _depth > 16:
        return [seg]
    split = min(max(split, 1), len(pts) - 2)
    left = fit_cubics(pts[: split + 1], max_error, _depth + 1)
    right = fit_cubics(pts[split:], max_error, _depth + 1)
    return left + right


def fit_closed_contour(points: np.ndarray, simplify_eps: float = 0.5, max_error: float = 0.75) -> list[np.ndarray]:
    """Convert a closed polyline (first point == last point) into a closed
    sequence of cubic segments.

    The contour is first simplified; the surviving vertices act as corner
    breakpoints, and each run of original points between corners is fitted
    independently so corners are preserved.
    """
    pts = np.asarray(points, dtype=float)
    if len(pts) < 4:
        raise ValueError("contour too short")
    if not np.allclose(pts[0], pts[-1]):
        pts = np.vstack([pts, pts[0]])
    corner_idx = list(rdp_indices(pts, simplify_eps))
    segments: list[np.ndarray] = []
    for a, b in zip(corner_idx[:-1], corner_idx[1:]):
        if b - a < 1:
            continue
        run = pts[a : b + 1]
        if len(run) == 2 and np.allclose(run[0], run[1]):
            continue
        segments.extend(fit_cubics(run, max_error))
    if not segments:
        raise ValueError("degenerate contour")
    # force exact closure
    segments[-1][3] = segments[0][0].copy()
    return segments
