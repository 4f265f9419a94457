"""Facial morphometry from frontal photographs.

Pre-processing, face detection, five-point alignment, 68-landmark
regression, geometric features and two-cohort statistics.
"""

from .imgcore import BoundingBox
from .shaperegress import LandmarkSet, ShapeModel, TrainConfig, predict_shape, train_shape_model
from .morphometrics import FeatureVector, LandmarkIndexMap, extract_features
from .cohortstats import Cohort, CohortReport, compare_cohorts, welch_t_test
from .pipeline import PipelineConfig, run_pipeline

__version__ = "0.1.0"

__all__ = [
    "BoundingBox", "LandmarkSet", "ShapeModel", "TrainConfig", "predict_shape", "train_shape_model",
    "FeatureVector", "LandmarkIndexMap", "extract_features", "Cohort", "CohortReport", "compare_cohorts",
    "welch_t_test", "PipelineConfig", "run_pipeline",
]
