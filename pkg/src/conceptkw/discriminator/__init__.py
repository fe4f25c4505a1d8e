"""Concept-augmented query-keyword synonymy discrimination."""

from .augment import AugmentationConfig, AugmentationReport, augment_dataset
from .classifier import (ClassifierModel, DegenerateDataError, TrainHyper, UnattainablePrecision,
                         calibrate_threshold, predict_score, threshold_at_precision, train_classifier)
from .data import LabeledPair, read_labeled_pairs, write_labeled_pairs
from .features import FeatureVector, extract_features, feature_matrix

__all__ = [
    "AugmentationConfig", "AugmentationReport", "augment_dataset", "ClassifierModel",
    "DegenerateDataError", "TrainHyper", "UnattainablePrecision", "calibrate_threshold",
    "predict_score", "threshold_at_precision", "train_classifier", "LabeledPair",
    "read_labeled_pairs", "write_labeled_pairs", "FeatureVector", "extract_features",
    "feature_matrix",
]
