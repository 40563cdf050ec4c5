"""MNIST IDX file handling and a built-in synthetic digit corpus.

The IDX parsing is bit-exact: big-endian headers, magic 0x00000803 for image
files and 0x00000801 for label files. The synthetic corpus renders jittered
stroke templates into the same 28x28 format so every pipeline stage can run
without the real dataset; pass a directory of IDX files to use real data.
"""
from __future__ import annotations

import gzip
import os
import struct
from pathlib import Path

import numpy as np

IMAGES_MAGIC = 0x00000803
LABELS_MAGIC = 0x00000801
ENV_DATA_DIR = "ILLUMINE_MNIST_DIR"

TRAIN_IMAGES = "train-images-idx3-ubyte"
TRAIN_LABELS = "train-labels-idx1-ubyte"
TEST_IMAGES = "t10k-images-idx3-ubyte"
TEST_LABELS = "t10k-labels-idx1-ubyte"


def _open_maybe_gz(path: Path):
    if path.suffix == ".gz":
        return gzip.open(path, "rb")
    return open(path, "rb")


def read_idx_images(path: str | Path) -> np.ndarray:
    """Read an IDX image file into a (n, rows, cols) uint8 array."""
    with _open_maybe_gz(Path(path)) as f:
        magic, n, rows, cols = struct.unpack(">IIII", f.read(16))
        if magic != IMAGES_MAGIC:
            raise ValueError(f"bad image magic 0x{magic:08x} in {path}")
        data = f.read(n * rows * cols)
    if len(data) != n * rows * cols:
        raise ValueError(f"truncated image file {path}")
    return np.frombuffer(data, dtype=np.uint8).reshape(n, rows, cols)


def read_idx_labels(path: str | Path) -> np.ndarray:
    with _open_maybe_gz(Path(path)) as f:
        magic, n = struct.unpack(">II", f.read(8))
        if magic != LABELS_MAGIC:
            raise ValueError(f"bad label magic 0x{magic:08x} in {path}")
        data = f.read(n)
    if len(data) != n:
        raise ValueError(f"truncated label file {path}")
    return np.frombuffer(data, dtype=np.uint8)


def write_idx_images(path: str | Path, images: np.ndarray) -> None:
    arr = np.ascontiguousarray(images, dtype=np.uint8)
    n, rows, cols = arr.shape
    with open(path, "wb") as f:
        f.write(struct.pack(">IIII", IMAGES_MAGIC, n, rows, cols))
        f.write(arr.tobytes())


def write_idx_labels(path: str | Path, labels: np.ndarray) -> None:
    arr = np.ascontiguousarray(labels, dtype=np.uint8)
    with open(path, "wb") as f:
        f.write(struct.pack(">II", LABELS_MAGIC, len(arr)))
        f.write(arr.tobytes())


def _find_file(directory: Path, stem: str) -> Path | None:
    for cand in (directory / stem, directory / (stem + ".gz")):
        if cand.exists():
            return cand
    return None


def locate_dataset(directory: str | Path | None = None) -> Path | None:
    """Resolve a dataset directory from the argument or ILLUMINE_MNIST_DIR."""
    cand = directory or os.environ.get(ENV_DATA_DIR)
    if not cand:
        return None
    d = Path(cand)
    if d.is_dir() and _find_file(d, TRAIN_IMAGES) is not None:
        return d
    return None


def load_dataset(directory: str | Path) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Load (train_x, train_y, test_x, test_y) from a directory of IDX files."""
    d = Path(directory)
    parts = []
    for stem in (TRAIN_IMAGES, TRAIN_LABELS, TEST_IMAGES, TEST_LABELS):
        p = _find_file(d, stem)
        if p is None:
            raise FileNotFoundError(f"{stem}[.gz] not found in {d}")
        parts.append(p)
    return (
        read_idx_images(parts[0]),
        read_idx_labels(parts[1]),
        read_idx_images(parts[2]),
        read_idx_labels(parts[3]),
    )


# ---------------------------------------------------------------------------
# synthetic corpus


def _ellipse(cx, cy, rx, ry, n=28, t0=0.0, t1=2 * np.pi):
    t = np.linspace(t0, t1, n)
    return np.stack([cx + rx * np.cos(t), cy + ry * np.sin(t)], axis=1)


def _digit_strokes(d: int) -> list[np.ndarray]:
    if d == 0:
        return [_ellipse(14, 14, 5.2, 7.4)]
    if d == 1:
        return [np.array([[11.0, 9.5], [14.5, 6.0], [14.5, 22.0]])]
    if d == 2:
        top = _ellipse(14, 10, 4.5, 3.8, n=12, t0=np.pi, t1=2 * np.pi)
        tail = np.array([[18.5, 10.0], [9.5, 21.5], [18.5, 21.5]])
        return [np.vstack([top, tail])]
    if d == 3:
        top = _ellipse(13.4, 9.6, 4.2, 3.4, n=12, t0=-0.8 * np.pi, t1=0.35 * np.pi)
        bot = _ellipse(13.4, 17.2, 4.6, 4.0, n=12, t0=-0.35 * np.pi, t1=0.8 * np.pi)
        return [np.vstack([top, bot])]
    if d == 4:
        return [
            np.array([[16.5, 6.0], [9.5, 16.5], [19.5, 16.5]]),
            np.array([[16.5, 11.0], [16.5, 22.0]]),
        ]
    if d == 5:
        # detached top bar: many handwritten fives break the stroke here
        bar = np.array([[11.0, 6.2], [18.0, 6.0]])
        bowl = _ellipse(13.4, 17.0, 4.8, 4.4, n=14, t0=-0.5 * np.pi, t1=0.75 * np.pi)
        body = np.vstack([np.array([[10.6, 9.4], [10.0, 12.8]]), bowl])
        return [bar, body]
    if d == 6:
        sweep = np.array([[16.8, 6.2], [12.6, 11.0], [10.4, 15.5]])
        loop = _ellipse(13.6, 17.0, 3.9, 4.2, n=20, t0=np.pi, t1=3 * np.pi)
        return [np.vstack([sweep, loop])]
    if d == 7:
        return [np.array([[9.5, 7.0], [18.5, 7.0], [12.5, 22.0]])]
    if d == 8:
        return [_ellipse(14, 10, 3.5, 3.4), _ellipse(14, 17.6, 4.2, 4.0)]
    if d == 9:
        loop = _ellipse(13.8, 10.4, 3.9, 3.9, n=20)
        tail = np.array([[17.7, 10.4], [16.8, 22.0]])
        return [loop, tail]
    raise ValueError(f"no template for digit {d}")


def _render_strokes(strokes: list[np.ndarray], width: float) -> np.ndarray:
    """Distance-field stroke rendering with a 1-pixel antialias ramp."""
    g = np.arange(28) + 0.5
    px, py = np.meshgrid(g, g)  # px = column coord, py = row coord
    centers = np.stack([px.ravel(), py.ravel()], axis=1)
    best = np.full(len(centers), np.inf)
    for poly in strokes:
        a = poly[:-1]
        b = poly[1:]
        ab = b - a
        ab2 = np.maximum((ab * ab).sum(axis=1), 1e-12)
        ap = centers[:, None, :] - a[None, :, :]
        t = np.clip((ap * ab[None, :, :]).sum(axis=2) / ab2[None, :], 0.0, 1.0)
        closest = a[None, :, :] + t[:, :, None] * ab[None, :, :]
        dist = np.hypot(*(centers[:, None, :] - closest).transpose(2, 0, 1))
        best = np.minimum(best, dist.min(axis=1))
    val = np.clip(width / 2 + 0.5 - best, 0.0, 1.0) * 255
    return np.rint(val).reshape(28, 28).astype(np.uint8)


def _jitter(strokes: list[np.ndarray], rng: np.random.Generator) -> list[np.ndarray]:
    theta = rng.uniform(-0.14, 0.14)
    sx = rng.uniform(0.86, 1.08)
    sy = rng.uniform(0.86, 1.08)
    shear = rng.uniform(-0.12, 0.12)
    shift = rng.uniform(-1.6, 1.6, size=2)
    c, s = np.cos(theta), np.sin(theta)
    m = np.array([[c * sx, -s * sy + shear], [s * sx, c * sy]])
    out = []
    for poly in strokes:
        p = (poly - 14.0) @ m.T + 14.0 + shift
        p = p + rng.normal(0.0, 0.35, size=p.shape)
        out.append(np.clip(p, 1.5, 26.5))
    return out


def synth_digit(label: int, rng: np.random.Generator) -> np.ndarray:
    """One jittered 28x28 uint8 rendering of the given digit."""
    width = rng.uniform(2.1, 3.3)
    return _render_strokes(_jitter(_digit_strokes(label), rng), width)


def synth_corpus(n_train: int = 5000, n_test: int = 1000, seed: int = 0
                 ) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Deterministic labeled corpus in MNIST layout (uint8 images, labels)."""
    rng = np.random.default_rng(seed)
    total = n_train + n_test
    labels = np.arange(total) % 10
    labels = rng.permutation(labels).astype(np.uint8)
    images = np.stack([synth_digit(int(y), rng) for y in labels])
    return images[:n_train], labels[:n_train], images[n_train:], labels[n_train:]


def write_synth_dataset(directory: str | Path, n_train: int = 5000, n_test: int = 1000,
                        seed: int = 0) -> Path:
    """Materialize a synthetic corpus as IDX files in MNIST naming."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    tr_x, tr_y, te_x, te_y = synth_corpus(n_train, n_test, seed)
    write_idx_images(d / TRAIN_IMAGES, tr_x)
    write_idx_labels(d / TRAIN_LABELS, tr_y)
    write_idx_images(d / TEST_IMAGES, te_x)
    write_idx_labels(d / TEST_LABELS, te_y)
    return d
