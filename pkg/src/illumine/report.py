"""Static SVG outputs: feature-map heatmaps and elite-input galleries.

Rendering is deliberately plain string assembly: deterministic, diffable in
tests, no imaging dependency. Blank (never explored) cells are visually
distinct from zero-valued ones, and high-failure-probability cells get a
dark border.
"""
from __future__ import annotations

import json
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .analytics import DEFAULT_Z, RescaledMap, probability_map
from .errors import IllumineError

RAMP_STEPS = 8
RAMP_FROM = (255, 255, 255)
RAMP_TO = (26, 26, 46)
BLANK_FILL = "#f4f1ea"
MAX_GRID = 100


@dataclass(frozen=True)
class HeatmapSpec:
    channel: str = "mp"  # "elite" | "mp" | "total"
    cell_px: int = 24
    z: float = DEFAULT_Z


def _ramp_color(q: int) -> str:
    t = q / (RAMP_STEPS - 1)
    rgb = tuple(round(a + (b - a) * t) for a, b in zip(RAMP_FROM, RAMP_TO))
    return "#%02x%02x%02x" % rgb


def _quantize(value: float, lo: float, hi: float) -> int:
    if hi <= lo:
        return 0
    q = int(np.floor(RAMP_STEPS * (value - lo) / (hi - lo)))
    return min(max(q, 0), RAMP_STEPS - 1)


def _fmt(x: float) -> str:
    return f"{x:.6g}"


def render_heatmap(m: RescaledMap, spec: HeatmapSpec = HeatmapSpec()) -> str:
    """Deterministic SVG heatmap of one value channel over the rescaled map.

    Darker fill means a numerically higher channel value. Cells meeting the
    failure-probability highlight rule are drawn with a dark border.
    """
    gs = m.grid_size
    if gs > MAX_GRID:
        raise IllumineError(f"grid size {gs} too large to render (max {MAX_GRID})")
    if spec.channel not in ("elite", "mp", "total"):
        raise IllumineError(f"unknown channel {spec.channel!r}")
    cp = spec.cell_px
    margin = 46
    size_x = gs * cp + margin + 10
    size_y = gs * cp + margin + 10
    probs = {c.coords: c for c in probability_map(m, spec.z)} if m.cells else {}

    def channel_value(coords):
        cell = m.cells[coords]
        if spec.channel == "elite":
            return cell.elite_fitness
        if spec.channel == "total":
            return float(cell.total_evals)
        return probs[coords].mp

    values = {c: channel_value(c) for c in m.cells}
    lo = min(values.values()) if values else 0.0
    hi = max(values.values()) if values else 1.0
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{size_x}" height="{size_y}" '
        f'viewBox="0 0 {size_x} {size_y}">',
        '<rect width="100%" height="100%" fill="white"/>',
    ]
    # grid: x feature left-to-right, y feature bottom-to-top
    for gy in range(gs):
        for gx in range(gs):
            px = margin + gx * cp
            py = margin + (gs - 1 - gy) * cp - 36
            coords = (gx, gy)
            if coords in values:
                fill = _ramp_color(_quantize(values[coords], lo, hi))
                parts.append(f'<rect x="{px}" y="{py}" width="{cp}" height="{cp}" '
                             f'fill="{fill}" stroke="#cccccc" stroke-width="0.5"/>')
            else:
                parts.append(f'<rect x="{px}" y="{py}" width="{cp}" height="{cp}" '
                             f'fill="{BLANK_FILL}" stroke="#dddddd" stroke-width="0.5"/>')
    # highlighted cells get a border overlay, drawn after the grid
    for coords, pc in sorted(probs.items()):
        if not pc.highlighted:
            continue
        gx, gy = coords
        px = margin + gx * cp
        py = margin + (gs - 1 - gy) * cp - 36
        parts.append(f'<rect x="{px}" y="{py}" width="{cp}" height="{cp}" '
                     f'fill="none" stroke="#111111" stroke-width="2.5"/>')
    # axis labels and range ticks
    fx, fy = m.feature_pair
    (min_x, min_y), (max_x, max_y) = m.spec.mins, m.spec.maxs
    base_y = margin + gs * cp - 36
    parts.append(f'<text x="{margin}" y="{base_y + 26}" font-size="11" '
                 f'font-family="sans-serif">{fx}: {_fmt(min_x)} .. {_fmt(max_x)}</text>')
    parts.append(f'<text x="12" y="{base_y}" font-size="11" font-family="sans-serif" '
                 f'transform="rotate(-90 12 {base_y})">{fy}: {_fmt(min_y)} .. {_fmt(max_y)}</text>')
    for tick in range(0, gs + 1, 5):
        tx = margin + tick * cp
        parts.append(f'<line x1="{tx}" y1="{base_y}" x2="{tx}" y2="{base_y + 4}" '
                     f'stroke="#333333" stroke-width="1"/>')
        ty = base_y - tick * cp
        parts.append(f'<line x1="{margin - 4}" y1="{ty}" x2="{margin}" y2="{ty}" '
                     f'stroke="#333333" stroke-width="1"/>')
    parts.append("</svg>")
    return "".join(parts)


# ---------------------------------------------------------------------------
# elite-input gallery


def _digit_thumb(raw: bytes, x0: float, y0: float, side: float) -> str:
    img = np.frombuffer(raw, dtype=np.uint8).reshape(28, 28)
    scale = side / 28.0
    parts = [f'<rect x="{x0:.2f}" y="{y0:.2f}" width="{side:.2f}" height="{side:.2f}" fill="black"/>']
    for r, c in zip(*np.nonzero(img)):
        v = int(img[r, c])
        parts.append(
            f'<rect x="{x0 + c * scale:.2f}" y="{y0 + r * scale:.2f}" '
            f'width="{scale:.2f}" height="{scale:.2f}" fill="#%02x%02x%02x"/>' % (v, v, v))
    return "".join(parts)


def _road_thumb(raw: bytes, x0: float, y0: float, side: float) -> str:
    doc = json.loads(raw.decode())
    pts = np.asarray(doc["points"], dtype=float)
    lo = pts.min(axis=0)
    span = max(float((pts.max(axis=0) - lo).max()), 1e-9)
    scale = (side - 4) / span
    path = "M " + " L ".join(
        f"{x0 + 2 + (p[0] - lo[0]) * scale:.2f} {y0 + side - 2 - (p[1] - lo[1]) * scale:.2f}"
        for p in pts[:: max(len(pts) // 60, 1)])
    return (f'<rect x="{x0:.2f}" y="{y0:.2f}" width="{side:.2f}" height="{side:.2f}" '
            f'fill="#eef3ea" stroke="#cccccc" stroke-width="0.5"/>'
            f'<path d="{path}" fill="none" stroke="#333333" stroke-width="1.2"/>')


def render_gallery(m: RescaledMap, archive, cell_px: int = 56) -> str:
    """Per-cell thumbnails of the elite inputs; misbehaving elites are marked
    with a circle. Cells whose input file is missing render a placeholder.
    """
    gs = m.grid_size
    if gs > MAX_GRID:
        raise IllumineError(f"grid size {gs} too large to render (max {MAX_GRID})")
    margin = 46
    size = gs * cell_px + margin + 10
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" '
        f'viewBox="0 0 {size} {size}">',
        '<rect width="100%" height="100%" fill="white"/>',
    ]
    domain = archive.domain_name
    for coords in sorted(m.cells):
        cell = m.cells[coords]
        gx, gy = coords
        px = margin + gx * cell_px
        py = margin + (gs - 1 - gy) * cell_px - 36
        input_path = archive.input_path(cell.elite_id)
        if not input_path.exists():
            warnings.warn(f"missing input file for elite {cell.elite_id} at {coords}")
            parts.append(f'<rect x="{px}" y="{py}" width="{cell_px}" height="{cell_px}" '
                         f'fill="#eeeeee" stroke="#bb4444" stroke-width="1"/>')
            continue
        raw = input_path.read_bytes()
        if domain == "digit":
            parts.append(_digit_thumb(raw, px, py, cell_px))
        else:
            parts.append(_road_thumb(raw, px, py, cell_px))
        if cell.elite_fitness < 0:
            r = cell_px * 0.46
            parts.append(f'<circle cx="{px + cell_px / 2:.2f}" cy="{py + cell_px / 2:.2f}" '
                         f'r="{r:.2f}" fill="none" stroke="#d03030" stroke-width="1.6"/>')
    fx, fy = m.feature_pair
    base_y = margin + gs * cell_px - 36
    parts.append(f'<text x="{margin}" y="{base_y + 26}" font-size="11" '
                 f'font-family="sans-serif">{fx}</text>')
    parts.append(f'<text x="12" y="{base_y}" font-size="11" font-family="sans-serif" '
                 f'transform="rotate(-90 12 {base_y})">{fy}</text>')
    parts.append("</svg>")
    return "".join(parts)


def report_filename(run_id: str, feature_x: str, feature_y: str, channel: str) -> str:
    return f"{run_id}_{feature_x}_{feature_y}_{channel}.svg"


def write_reports(m: RescaledMap, archive, out_dir: str | Path, run_id: str,
                  channels: tuple[str, ...] = ("mp", "elite", "total")) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    fx, fy = m.feature_pair
    written = []
    for ch in channels:
        p = out / report_filename(run_id, fx, fy, ch)
        p.write_text(render_heatmap(m, HeatmapSpec(channel=ch)))
        written.append(p)
    g = out / report_filename(run_id, fx, fy, "gallery")
    g.write_text(render_gallery(m, archive))
    written.append(g)
    return written
