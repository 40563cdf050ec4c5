"""Illumination search over interpretable feature maps for testing learned
systems: evolve structurally diverse failure-inducing inputs and place them
on a map whose axes are human-meaningful metrics of the inputs or of the
system's behaviour.
"""

__version__ = "0.1.0"

from .analytics import (mann_whitney_u, pearson, probability_map, rescale,
                        sparseness, vargha_delaney_a12, wilson_interval)
from .archive import RunArchive, read_archive, write_archive
from .classifier import ClassifierModel, fitness_classification, train_classifier
from .digits import DigitGenome, feat_luminosity, feat_moves, feat_orientation, rasterize
from .domains import FEATURES, DigitDomain, RoadDomain
from .driver import DriverParams, SimulationTrace, drive, fitness_driving
from .mapelites import (Budget, FeatureMap, Individual, SearchConfig,
                        initialise_population, map_coordinates, random_selection,
                        run_search, update_map)
from .roads import RoadGenome, build_geometry, mutate_road, validate_road
from .tracing import trace_bitmap

__all__ = [
    "Budget", "ClassifierModel", "DigitDomain", "DigitGenome", "DriverParams",
    "FEATURES", "FeatureMap", "Individual", "RoadDomain", "RoadGenome",
    "RunArchive", "SearchConfig", "SimulationTrace", "build_geometry", "drive",
    "feat_luminosity", "feat_moves", "feat_orientation", "fitness_classification",
    "fitness_driving", "initialise_population", "mann_whitney_u", "map_coordinates",
    "mutate_road", "pearson", "probability_map", "random_selection", "rasterize",
    "read_archive", "rescale", "run_search", "sparseness", "trace_bitmap",
    "train_classifier", "update_map", "validate_road", "vargha_delaney_a12",
    "wilson_interval", "write_archive",
]
