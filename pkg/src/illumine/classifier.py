"""Built-in trainable digit classifier: 784 -> 32 (ReLU) -> 10 (softmax).

Small enough to train in seconds, deterministic per seed, and exposes the
softmax confidences the classification fitness works on. Real networks are
tested through the external subprocess protocol instead.
"""
from __future__ import annotations

import base64
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

HIDDEN = 32
N_CLASSES = 10
INPUT = 784


def _softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


@dataclass
class ClassifierModel:
    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray
    meta: dict = field(default_factory=dict)

    def predict(self, images: np.ndarray) -> np.ndarray:
        """Softmax confidences for a batch of 28x28 images (or flat 784s)."""
        x = np.asarray(images, dtype=float).reshape(-1, INPUT) / 255.0
        h = np.maximum(x @ self.w1 + self.b1, 0.0)
        return _softmax(h @ self.w2 + self.b2)

    def predict_one(self, image: np.ndarray) -> np.ndarray:
        return self.predict(image[None] if image.ndim == 2 else image.reshape(1, -1))[0]

    def accuracy(self, images: np.ndarray, labels: np.ndarray) -> float:
        conf = self.predict(images)
        return float(np.mean(conf.argmax(axis=1) == np.asarray(labels)))

    def digest(self) -> str:
        h = hashlib.sha256()
        for a in (self.w1, self.b1, self.w2, self.b2):
            h.update(np.ascontiguousarray(a, dtype="<f8").tobytes())
        return h.hexdigest()


def init_model(rng: np.random.Generator) -> ClassifierModel:
    w1 = rng.normal(0.0, np.sqrt(2.0 / INPUT), size=(INPUT, HIDDEN))
    w2 = rng.normal(0.0, np.sqrt(2.0 / HIDDEN), size=(HIDDEN, N_CLASSES))
    return ClassifierModel(w1, np.zeros(HIDDEN), w2, np.zeros(N_CLASSES))


def loss_and_grads(model: ClassifierModel, x: np.ndarray, y: np.ndarray
                   ) -> tuple[float, dict[str, np.ndarray]]:
    """Mean cross-entropy over the batch and its gradients.

    x is (n, 784) already scaled to [0, 1]; y is (n,) integer labels.
    """
    n = len(x)
    z1 = x @ model.w1 + model.b1
    h = np.maximum(z1, 0.0)
    probs = _softmax(h @ model.w2 + model.b2)
    loss = float(-np.mean(np.log(probs[np.arange(n), y] + 1e-300)))
    dz2 = probs.copy()
    dz2[np.arange(n), y] -= 1.0
    dz2 /= n
    gw2 = h.T @ dz2
    gb2 = dz2.sum(axis=0)
    dh = dz2 @ model.w2.T
    dz1 = dh * (z1 > 0)
    gw1 = x.T @ dz1
    gb1 = dz1.sum(axis=0)
    return loss, {"w1": gw1, "b1": gb1, "w2": gw2, "b2": gb2}


def train_classifier(train_images: np.ndarray, train_labels: np.ndarray,
                     epochs: int = 5, lr: float = 0.1, rng_seed: int = 0,
                     batch_size: int = 128,
                     test_images: np.ndarray | None = None,
                     test_labels: np.ndarray | None = None) -> ClassifierModel:
    """Mini-batch SGD with cross-entropy; deterministic for a fixed seed."""
    x = np.asarray(train_images, dtype=float).reshape(-1, INPUT) / 255.0
    y = np.asarray(train_labels, dtype=int).ravel()
    if len(x) != len(y):
        raise ValueError(f"{len(x)} images vs {len(y)} labels")
    rng = np.random.default_rng(rng_seed)
    model = init_model(rng)
    for _ in range(epochs):
        order = rng.permutation(len(x))
        for lo in range(0, len(x), batch_size):
            idx = order[lo : lo + batch_size]
            _, g = loss_and_grads(model, x[idx], y[idx])
            model.w1 -= lr * g["w1"]
            model.b1 -= lr * g["b1"]
            model.w2 -= lr * g["w2"]
            model.b2 -= lr * g["b2"]
    model.meta = {"epochs": epochs, "lr": lr, "seed": rng_seed, "batch_size": batch_size}
    if test_images is not None and test_labels is not None:
        model.meta["test_accuracy"] = model.accuracy(test_images, test_labels)
    return model


def fitness_classification(confidences: np.ndarray, expected_label: int) -> float:
    """Confidence of the expected class minus the best other-class confidence.

    Negative means misclassified; the search minimizes this.
    """
    c = np.asarray(confidences, dtype=float)
    if c.shape != (N_CLASSES,):
        raise ValueError(f"expected {N_CLASSES} confidences, got shape {c.shape}")
    if not np.all(np.isfinite(c)) or abs(c.sum() - 1.0) > 1e-6:
        raise ValueError("confidences must be a probability distribution")
    others = np.delete(c, expected_label)
    return float(c[expected_label] - others.max())


# ---------------------------------------------------------------------------
# weights file: JSON header + base64 little-endian float32 arrays


def _encode(a: np.ndarray) -> str:
    return base64.b64encode(np.ascontiguousarray(a, dtype="<f4").tobytes()).decode("ascii")


def _decode(s: str, shape: tuple[int, ...]) -> np.ndarray:
    return np.frombuffer(base64.b64decode(s), dtype="<f4").reshape(shape).astype(float)


def save_model(model: ClassifierModel, path: str | Path) -> None:
    doc = {
        "format": "illumine-classifier-v1",
        "shapes": {"w1": list(model.w1.shape), "b1": list(model.b1.shape),
                   "w2": list(model.w2.shape), "b2": list(model.b2.shape)},
        "meta": model.meta,
        "arrays": {"w1": _encode(model.w1), "b1": _encode(model.b1),
                   "w2": _encode(model.w2), "b2": _encode(model.b2)},
    }
    Path(path).write_text(json.dumps(doc, sort_keys=True))


def load_model(path: str | Path) -> ClassifierModel:
    doc = json.loads(Path(path).read_text())
    if doc.get("format") != "illumine-classifier-v1":
        raise ValueError(f"unrecognized weights file {path}")
    sh = {k: tuple(v) for k, v in doc["shapes"].items()}
    arr = doc["arrays"]
    return ClassifierModel(
        _decode(arr["w1"], sh["w1"]), _decode(arr["b1"], sh["b1"]),
        _decode(arr["w2"], sh["w2"]), _decode(arr["b2"], sh["b2"]),
        meta=dict(doc.get("meta", {})),
    )
