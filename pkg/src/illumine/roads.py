"""Road input model: control points -> Catmull-Rom center line -> lane geometry.

The center line is evaluated with the Barry-Goldman pyramid on uniform knots;
end segments duplicate the first/last control point. Roads carry two lanes of
fixed width; the car drives the right lane and distances are measured from
that lane's center.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

import numpy as np

from .errors import MutationError, ValidityError

BOX_HALF = 125.0  # validity box is a 250 m square centered at the origin
LANE_WIDTH = 4.0
MIN_RADIUS_CAP = 200.0
TURN_THRESHOLD_DEG = 5.0
WAYPOINT_SPACING = 1.0  # meters of arc length between structural-metric waypoints
DEFAULT_SAMPLES_PER_SEGMENT = 32


@dataclass
class RoadGenome:
    control_points: np.ndarray  # (n, 2) meters; first point is the fixed start
    lane_width: float = LANE_WIDTH
    _geometry: "RoadGeometry | None" = field(default=None, repr=False, compare=False)

    def copy(self) -> "RoadGenome":
        return RoadGenome(self.control_points.copy(), self.lane_width)

    def to_json_dict(self) -> dict:
        return {"control_points": self.control_points.tolist(), "lane_width": self.lane_width}

    @classmethod
    def from_json_dict(cls, d: dict) -> "RoadGenome":
        return cls(np.asarray(d["control_points"], dtype=float), float(d.get("lane_width", LANE_WIDTH)))


@dataclass
class RoadGeometry:
    center_line: np.ndarray       # (m, 2) dense samples, spacing <= 1 m
    headings: np.ndarray          # (m,) tangent heading per sample, radians, unwrapped
    arc_length: np.ndarray        # (m,) cumulative, arc_length[0] == 0
    lane_width: float
    waypoints: np.ndarray         # (k, 2) resampled at WAYPOINT_SPACING
    waypoint_headings: np.ndarray # (k,) headings interpolated at the waypoints

    @property
    def total_length(self) -> float:
        return float(self.arc_length[-1])

    def right_lane_center(self) -> np.ndarray:
        """The driving path: center line offset half a lane to the right."""
        nx = np.sin(self.headings)
        ny = -np.cos(self.headings)
        return self.center_line + (self.lane_width / 2.0) * np.stack([nx, ny], axis=1)


def barry_goldman(p0, p1, p2, p3, t: np.ndarray) -> np.ndarray:
    """Uniform Catmull-Rom segment between p1 and p2 via the pyramid scheme.

    t runs over [0, 1]; knots are implicitly (-1, 0, 1, 2).
    """
    t = np.asarray(t, dtype=float)[:, None]
    t0, t1, t2, t3 = -1.0, 0.0, 1.0, 2.0
    a1 = (t1 - t) / (t1 - t0) * p0 + (t - t0) / (t1 - t0) * p1
    a2 = (t2 - t) / (t2 - t1) * p1 + (t - t1) / (t2 - t1) * p2
    a3 = (t3 - t) / (t3 - t2) * p2 + (t - t2) / (t3 - t2) * p3
    b1 = (t2 - t) / (t2 - t0) * a1 + (t - t0) / (t2 - t0) * a2
    b2 = (t3 - t) / (t3 - t1) * a2 + (t - t1) / (t3 - t1) * a3
    return (t2 - t) / (t2 - t1) * b1 + (t - t1) / (t2 - t1) * b2


def _spline_samples(points: np.ndarray, samples_per_segment: int) -> np.ndarray:
    """Dense center-line samples through all control points."""
    p = np.asarray(points, dtype=float)
    ext = np.vstack([p[0], p, p[-1]])  # duplicated end control points
    chunks = []
    for i in range(len(p) - 1):
        n = samples_per_segment
        # refine until chord spacing is at most 1 m (bounded doubling)
        for _ in range(6):
            t = np.linspace(0.0, 1.0, n + 1)
            seg = barry_goldman(ext[i], ext[i + 1], ext[i + 2], ext[i + 3], t)
            step = np.hypot(*np.diff(seg, axis=0).T)
            if len(step) == 0 or step.max() <= WAYPOINT_SPACING:
                break
            n *= 2
        chunks.append(seg[:-1] if i < len(p) - 2 else seg)
    return np.vstack(chunks)


def _headings_of(samples: np.ndarray) -> np.ndarray:
    d = np.diff(samples, axis=0)
    h = np.arctan2(d[:, 1], d[:, 0])
    h = np.unwrap(h)
    return np.concatenate([h, h[-1:]])  # heading per sample; last repeats


def segments_intersect(a0, a1, b0, b1) -> bool:
    """Proper or touching intersection of two closed segments."""
    d1 = np.asarray(a1) - np.asarray(a0)
    d2 = np.asarray(b1) - np.asarray(b0)

    def cross(u, v):
        return u[0] * v[1] - u[1] * v[0]

    def on_segment(p, q, r):
        return (min(p[0], r[0]) - 1e-12 <= q[0] <= max(p[0], r[0]) + 1e-12
                and min(p[1], r[1]) - 1e-12 <= q[1] <= max(p[1], r[1]) + 1e-12)

    o1 = cross(d1, np.asarray(b0) - np.asarray(a0))
    o2 = cross(d1, np.asarray(b1) - np.asarray(a0))
    o3 = cross(d2, np.asarray(a0) - np.asarray(b0))
    o4 = cross(d2, np.asarray(a1) - np.asarray(b0))
    if ((o1 > 0) != (o2 > 0)) and ((o3 > 0) != (o4 > 0)) and o1 != 0 and o2 != 0 and o3 != 0 and o4 != 0:
        return True
    for p, q, r, o in ((a0, b0, a1, o1), (a0, b1, a1, o2), (b0, a0, b1, o3), (b0, a1, b1, o4)):
        if o == 0 and on_segment(p, q, r):
            return True
    return False


def polyline_self_intersects(samples: np.ndarray) -> bool:
    """Sweep over x-sorted segments; adjacent segments sharing an endpoint
    are not intersections."""
    pts = np.asarray(samples, dtype=float)
    n = len(pts) - 1
    if n < 2:
        return False
    a = pts[:-1]
    b = pts[1:]
    xmin = np.minimum(a[:, 0], b[:, 0])
    xmax = np.maximum(a[:, 0], b[:, 0])
    ymin = np.minimum(a[:, 1], b[:, 1])
    ymax = np.maximum(a[:, 1], b[:, 1])
    order = np.argsort(xmin, kind="stable")
    active: list[int] = []
    for idx in order:
        lo = xmin[idx]
        active = [j for j in active if xmax[j] >= lo]
        for j in active:
            if abs(idx - j) <= 1:
                continue
            if ymin[idx] > ymax[j] or ymax[idx] < ymin[j]:
                continue
            if segments_intersect(a[idx], b[idx], a[j], b[j]):
                return True
        active.append(idx)
    return False


def validate_road(genome: RoadGenome, samples_per_segment: int = DEFAULT_SAMPLES_PER_SEGMENT) -> str | None:
    """Return None when valid, else a message naming the violated constraint:
    (1) start and end differ, (2) the road stays inside the bounding box,
    (3) the center line does not self-intersect."""
    p = np.asarray(genome.control_points, dtype=float)
    if len(p) < 4:
        return "(1) road needs at least 4 control points"
    if np.hypot(*(p[-1] - p[0])) < 1e-9:
        return "(1) start point equals end point"
    samples = _spline_samples(p, samples_per_segment)
    if np.abs(samples).max() > BOX_HALF:
        return f"(2) road leaves the {2 * BOX_HALF:.0f} m bounding box"
    if polyline_self_intersects(samples):
        return "(3) road self-intersects"
    return None


def build_geometry(genome: RoadGenome, samples_per_segment: int = DEFAULT_SAMPLES_PER_SEGMENT) -> RoadGeometry:
    """Sampled center line with headings, arc length and metric waypoints.

    Raises ValidityError naming constraint (1), (2) or (3) when the genome
    is not a valid road.
    """
    if genome._geometry is not None:
        return genome._geometry
    violation = validate_road(genome, samples_per_segment)
    if violation is not None:
        raise ValidityError(violation)
    samples = _spline_samples(np.asarray(genome.control_points, dtype=float), samples_per_segment)
    headings = _headings_of(samples)
    step = np.hypot(*np.diff(samples, axis=0).T)
    arc = np.concatenate([[0.0], np.cumsum(step)])
    n_way = max(int(np.floor(arc[-1] / WAYPOINT_SPACING)) + 1, 2)
    s_way = np.minimum(np.arange(n_way) * WAYPOINT_SPACING, arc[-1])
    if arc[-1] - s_way[-1] > 1e-9:
        s_way = np.append(s_way, arc[-1])
    wx = np.interp(s_way, arc, samples[:, 0])
    wy = np.interp(s_way, arc, samples[:, 1])
    wh = np.interp(s_way, arc, headings)
    geom = RoadGeometry(
        center_line=samples,
        headings=headings,
        arc_length=arc,
        lane_width=genome.lane_width,
        waypoints=np.stack([wx, wy], axis=1),
        waypoint_headings=wh,
    )
    genome._geometry = geom
    return geom


def road_input_bytes(geom: RoadGeometry) -> bytes:
    """Canonical concretized road: the sampled center-line point list."""
    doc = {"points": [[round(float(x), 9), round(float(y), 9)] for x, y in geom.center_line],
           "lane_width": geom.lane_width}
    return json.dumps(doc, sort_keys=True, separators=(",", ":")).encode()


def road_digest(geom: RoadGeometry) -> str:
    return hashlib.sha256(road_input_bytes(geom)).hexdigest()


# ---------------------------------------------------------------------------
# mutation and seeds


def mutate_road(genome: RoadGenome, lb: float, ub: float, rng: np.random.Generator,
                max_attempts: int = 50) -> RoadGenome:
    """Displace one uniformly chosen control point (never the fixed start).

    Per-axis displacement is an independently signed Uniform[lb, ub] draw.
    Candidates failing road validity or not changing the geometry are
    resampled up to max_attempts.
    """
    if not (0 < lb < ub):
        raise ValueError("require 0 < lb < ub")
    n = len(genome.control_points)
    for _ in range(max_attempts):
        idx = int(rng.integers(1, n))
        mag = rng.uniform(lb, ub, size=2)
        sign = np.where(rng.integers(0, 2, size=2) == 0, -1.0, 1.0)
        child = genome.copy()
        child.control_points[idx] += mag * sign
        if validate_road(child) is not None:
            continue
        if np.array_equal(child.control_points, genome.control_points):
            continue
        return child
    raise MutationError(f"no valid road mutant after {max_attempts} attempts")


def random_road(rng: np.random.Generator, n_points: int = 10, step: float = 25.0,
                cone_deg: float = 45.0, max_attempts: int = 200,
                lane_width: float = LANE_WIDTH) -> RoadGenome:
    """Random valid road: fixed start at the origin, then points each `step`
    meters from the previous at a heading within +/-cone_deg of the last."""
    cone = np.deg2rad(cone_deg)
    for _ in range(max_attempts):
        pts = [np.zeros(2)]
        heading = rng.uniform(-np.pi, np.pi)
        for _ in range(n_points - 1):
            heading = heading + rng.uniform(-cone, cone)
            pts.append(pts[-1] + step * np.array([np.cos(heading), np.sin(heading)]))
        genome = RoadGenome(np.asarray(pts), lane_width)
        if validate_road(genome) is None:
            return genome
    raise ValidityError(f"no valid random road in {max_attempts} attempts")


# ---------------------------------------------------------------------------
# structural feature metrics (computed on the waypoint polyline)


def circumradius(p1, p2, p3, cap: float = MIN_RADIUS_CAP) -> float:
    """Radius of the circle through three points; collinear triplets get cap."""
    a = np.hypot(*(np.asarray(p2) - p3))
    b = np.hypot(*(np.asarray(p1) - p3))
    c = np.hypot(*(np.asarray(p1) - p2))
    area2 = abs((p2[0] - p1[0]) * (p3[1] - p1[1]) - (p3[0] - p1[0]) * (p2[1] - p1[1]))
    if area2 < 1e-12:
        return cap
    return min(a * b * c / (2.0 * area2), cap)


def feat_min_radius(geom: RoadGeometry) -> float:
    """Smallest circumradius over consecutive waypoint triplets, capped."""
    w = geom.waypoints
    if len(w) < 3:
        return MIN_RADIUS_CAP
    p1, p2, p3 = w[:-2], w[1:-1], w[2:]
    a = np.hypot(*(p2 - p3).T)
    b = np.hypot(*(p1 - p3).T)
    c = np.hypot(*(p1 - p2).T)
    area2 = np.abs((p2[:, 0] - p1[:, 0]) * (p3[:, 1] - p1[:, 1])
                   - (p3[:, 0] - p1[:, 0]) * (p2[:, 1] - p1[:, 1]))
    with np.errstate(divide="ignore", invalid="ignore"):
        r = np.where(area2 < 1e-12, MIN_RADIUS_CAP, a * b * c / (2.0 * area2))
    return float(np.minimum(r, MIN_RADIUS_CAP).min())


def feat_turn_count(geom: RoadGeometry) -> int:
    """Number of turns: maximal runs of consecutive waypoint heading changes
    above 5 degrees with a constant sign. A sign flip or a change at or
    below the threshold ends the run."""
    h = geom.waypoint_headings
    if len(h) < 3:
        return 0
    d = np.diff(h)
    d = (d + np.pi) % (2 * np.pi) - np.pi  # wrap to (-pi, pi]
    thr = np.deg2rad(TURN_THRESHOLD_DEG)
    turns = 0
    prev_sign = 0
    for delta in d:
        if abs(delta) > thr:
            sign = 1 if delta > 0 else -1
            if sign != prev_sign:
                turns += 1
            prev_sign = sign
        else:
            prev_sign = 0
    return turns


def feat_direction_coverage(geom: RoadGeometry) -> int:
    """Distinct 10-degree sectors hit by waypoint headings (36 sectors)."""
    deg = np.rad2deg(geom.waypoint_headings)
    sectors = np.floor(deg / 10.0).astype(int) % 36
    return int(len(np.unique(sectors)))


# ---------------------------------------------------------------------------
# export


def geometry_to_svg(geom: RoadGeometry, size: float = 500.0, trajectory: np.ndarray | None = None) -> str:
    """Plan view of the road for reports: lane boundaries, center line and an
    optional car trajectory overlay."""
    pts = geom.center_line
    lo = pts.min(axis=0) - 10.0
    hi = pts.max(axis=0) + 10.0
    span = float(max(hi[0] - lo[0], hi[1] - lo[1]))
    scale = size / span

    def xy(p):
        return (p[0] - lo[0]) * scale, size - (p[1] - lo[1]) * scale

    def path_of(samples):
        return "M " + " L ".join(f"{x:.2f} {y:.2f}" for x, y in (xy(p) for p in samples))

    nx = np.sin(geom.headings)
    ny = -np.cos(geom.headings)
    normal = np.stack([nx, ny], axis=1)
    left = pts - geom.lane_width * normal
    right = pts + geom.lane_width * normal
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{size:.0f}" height="{size:.0f}" '
        f'viewBox="0 0 {size:.0f} {size:.0f}">',
        '<rect width="100%" height="100%" fill="#e8f0e0"/>',
        f'<path d="{path_of(left)}" fill="none" stroke="#888888" stroke-width="1"/>',
        f'<path d="{path_of(right)}" fill="none" stroke="#888888" stroke-width="1"/>',
        f'<path d="{path_of(pts)}" fill="none" stroke="#c8a000" stroke-width="1" stroke-dasharray="6 4"/>',
    ]
    if trajectory is not None and len(trajectory):
        parts.append(f'<path d="{path_of(trajectory)}" fill="none" stroke="#c00000" stroke-width="1.5"/>')
    parts.append("</svg>")
    return "".join(parts)
