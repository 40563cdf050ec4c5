"""Domain adapters: wire input models, feature metrics and SUTs together.

The search core only sees the DomainAdapter protocol; everything
domain-specific (seeding, mutation, concretization, metric evaluation)
lives here.
"""
from __future__ import annotations

import threading
from dataclasses import dataclass

import numpy as np

from . import digits, driver, roads, tracing
from .classifier import ClassifierModel, fitness_classification
from .errors import EvaluationError, IllumineError, ProtocolError
from .external import ExternalSUT
from .mapelites import Evaluation


@dataclass(frozen=True)
class FeatureSpec:
    name: str
    domain: str
    default_alpha: float
    description: str


FEATURES: dict[str, FeatureSpec] = {
    "Lum": FeatureSpec("Lum", "digit", 0.1, "light pixels (> 127)"),
    "Mov": FeatureSpec("Mov", "digit", 0.5, "sum of gaps between consecutive strokes"),
    "Or": FeatureSpec("Or", "digit", 10.0, "regression slope of the lit pixel cloud"),
    "MinRad": FeatureSpec("MinRad", "road", 0.25, "minimum turn radius (capped, meters)"),
    "TurCnt": FeatureSpec("TurCnt", "road", 1.0, "number of turns sharper than 5 degrees"),
    "DirCov": FeatureSpec("DirCov", "road", 1.0, "10-degree heading sectors covered"),
    "StdSA": FeatureSpec("StdSA", "road", 100.0, "standard deviation of steering angles"),
    "MLP": FeatureSpec("MLP", "road", 25.0, "mean distance from the lane center"),
}


def features_for_domain(domain: str) -> list[str]:
    return [f.name for f in FEATURES.values() if f.domain == domain]


def validate_feature_pair(domain: str, names: tuple[str, ...]) -> None:
    valid = features_for_domain(domain)
    unknown = [n for n in names if n not in valid]
    if unknown:
        raise IllumineError(
            f"unknown feature(s) {', '.join(repr(n) for n in unknown)} for domain "
            f"{domain!r}; valid: {', '.join(valid)}")


def default_alphas(names: tuple[str, ...]) -> tuple[float, ...]:
    return tuple(FEATURES[n].default_alpha for n in names)


# ---------------------------------------------------------------------------
# digit domain


class DigitDomain:
    """Digit classification testing: Bezier genomes against a classifier."""

    name = "digit"

    def __init__(self, feature_pair: tuple[str, ...], seed_images: np.ndarray,
                 seed_label: int, model: ClassifierModel | None = None,
                 external: ExternalSUT | None = None):
        validate_feature_pair("digit", feature_pair)
        if (model is None) == (external is None):
            raise ValueError("provide exactly one of model or external")
        self.feature_pair = feature_pair
        self.seed_images = seed_images
        self.seed_label = int(seed_label)
        self.model = model
        self.external = external
        self._sut_lock = threading.Lock()
        self._seed_queue: list[int] = []

    def sut_id(self) -> str:
        if self.model is not None:
            return f"builtin-classifier:{self.model.digest()[:16]}"
        return "external:" + " ".join(self.external.command)

    def random_seed_genome(self, rng: np.random.Generator):
        if not self._seed_queue:
            self._seed_queue = list(range(len(self.seed_images)))
        idx = self._seed_queue.pop(int(rng.integers(len(self._seed_queue))))
        return tracing.trace_bitmap(self.seed_images[idx], self.seed_label)

    def mutate(self, genome, lb: float, ub: float, rng: np.random.Generator):
        return digits.mutate_digit(genome, lb, ub, rng)

    def _feature_value(self, name: str, genome, raster) -> float:
        if name == "Lum":
            return float(digits.feat_luminosity(raster))
        if name == "Mov":
            return digits.feat_moves(genome)
        if name == "Or":
            return digits.feat_orientation(raster)
        raise IllumineError(f"unknown digit feature {name!r}")

    def evaluate(self, genome, eval_seed: int) -> Evaluation:
        raster = digits.rasterize(genome)
        if self.model is not None:
            conf = self.model.predict_one(raster)
        else:
            with self._sut_lock:
                try:
                    conf = self.external.classify(raster)
                except ProtocolError as e:
                    raise EvaluationError(str(e)) from e
        try:
            fitness = fitness_classification(conf, genome.expected_label)
        except ValueError as e:
            raise EvaluationError(f"invalid confidence distribution: {e}") from e
        feats = tuple(self._feature_value(n, genome, raster) for n in self.feature_pair)
        return Evaluation(features=feats, fitness=fitness,
                          input_digest=digits.raster_digest(raster),
                          input_bytes=digits.raster_bytes(raster))


def load_seed_images(images: np.ndarray, labels: np.ndarray, seed_label: int) -> np.ndarray:
    picked = images[np.asarray(labels) == seed_label]
    if len(picked) == 0:
        raise IllumineError(f"no images with label {seed_label}")
    return picked


# ---------------------------------------------------------------------------
# road domain


class RoadDomain:
    """Driving scenario testing: road genomes against a lane-keeping SUT."""

    name = "road"

    def __init__(self, feature_pair: tuple[str, ...],
                 params: driver.DriverParams = driver.DriverParams(),
                 external: ExternalSUT | None = None,
                 n_control_points: int = 10, seed_step: float = 25.0,
                 seed_cone_deg: float = 45.0, lane_width: float = roads.LANE_WIDTH):
        validate_feature_pair("road", feature_pair)
        self.feature_pair = feature_pair
        self.params = params
        self.external = external
        self.n_control_points = n_control_points
        self.seed_step = seed_step
        self.seed_cone_deg = seed_cone_deg
        self.lane_width = lane_width
        self._sut_lock = threading.Lock()

    def sut_id(self) -> str:
        if self.external is None:
            return "builtin-driver"
        return "external:" + " ".join(self.external.command)

    def random_seed_genome(self, rng: np.random.Generator):
        return roads.random_road(rng, self.n_control_points, self.seed_step,
                                 self.seed_cone_deg, lane_width=self.lane_width)

    def mutate(self, genome, lb: float, ub: float, rng: np.random.Generator):
        return roads.mutate_road(genome, lb, ub, rng)

    def _feature_value(self, name: str, geom, trace) -> float:
        if name == "MinRad":
            return roads.feat_min_radius(geom)
        if name == "TurCnt":
            return float(roads.feat_turn_count(geom))
        if name == "DirCov":
            return float(roads.feat_direction_coverage(geom))
        if name == "StdSA":
            return driver.feat_std_steering(trace)
        if name == "MLP":
            return driver.feat_mean_lateral_position(trace)
        raise IllumineError(f"unknown road feature {name!r}")

    def evaluate(self, genome, eval_seed: int) -> Evaluation:
        geom = roads.build_geometry(genome)
        if self.external is None:
            trace = driver.drive(geom, self.params, rng_seed=eval_seed)
        else:
            with self._sut_lock:
                try:
                    trace = self.external.drive(genome.to_json_dict())
                except ProtocolError as e:
                    raise EvaluationError(str(e)) from e
        fitness = driver.fitness_driving(trace, self.lane_width)
        feats = tuple(self._feature_value(n, geom, trace) for n in self.feature_pair)
        return Evaluation(features=feats, fitness=fitness,
                          input_digest=roads.road_digest(geom),
                          input_bytes=roads.road_input_bytes(geom))
