"""Bitmap-to-model tracing: grayscale digit image -> closed Bezier paths.

Pipeline: marching-squares contours at the light threshold, polyline
simplification, then least-squares cubic fitting per run between corners.
Outer contours and holes all become subpaths; even-odd fill recovers holes.
"""
from __future__ import annotations

import numpy as np
from skimage import measure

from .bezier import fit_closed_contour
from .digits import CANVAS, LIGHT_THRESHOLD, DigitGenome
from .errors import ValidityError

SIMPLIFY_EPS = 0.5
FIT_MAX_ERROR = 0.75


def extract_contours(raster: np.ndarray, level: float = float(LIGHT_THRESHOLD)) -> list[np.ndarray]:
    """Closed level-set contours of the image in canvas coordinates (x, y).

    The image is zero-padded so shapes touching the border still close.
    Contours come back sorted by their topmost point (outer shells before
    the holes they contain).
    """
    img = np.asarray(raster, dtype=float)
    padded = np.pad(img, 1, mode="constant")
    raw = measure.find_contours(padded, level)
    contours = []
    for c in raw:
        if len(c) < 4:
            continue
        # find_contours yields (row, col) in padded pixel-center space
        xy = np.stack([c[:, 1] - 0.5, c[:, 0] - 0.5], axis=1)
        contours.append(np.clip(xy, 0.0, float(CANVAS)))
    contours.sort(key=lambda c: (float(c[:, 1].min()), float(c[:, 0].min())))
    return contours


def trace_bitmap(raster: np.ndarray, expected_label: int = 0) -> DigitGenome:
    """Fit closed Bezier subpaths to the light region of a grayscale image.

    Raises ValidityError("no shape") when no pixel clears the threshold.
    """
    img = np.asarray(raster)
    if not np.any(img > LIGHT_THRESHOLD):
        raise ValidityError("no shape")
    paths = []
    for contour in extract_contours(img):
        try:
            segs = fit_closed_contour(contour, SIMPLIFY_EPS, FIT_MAX_ERROR)
        except ValueError:
            continue  # sub-pixel speck
        arr = np.clip(np.asarray(segs, dtype=float), 0.0, float(CANVAS))
        arr[-1, 3] = arr[0, 0]
        paths.append(arr)
    if not paths:
        raise ValidityError("no shape")
    genome = DigitGenome(expected_label, paths)
    genome.validate()
    return genome
