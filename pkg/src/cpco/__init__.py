"""Consistency-preserving configuration operators for feature models."""

from .fad import FeatureDecision, build_fad, enumerate_toggle_graphs
from .fm import Configuration, FeatureModel, check_validity, load_feature_model, parse_feature_model
from .generate import generate_suite, generate_vb_rule
from .rules import flatten
from .sat import classify_features, to_cnf

__version__ = "0.1.0"

__all__ = [
    "Configuration", "FeatureDecision", "FeatureModel", "build_fad", "check_validity",
    "classify_features", "enumerate_toggle_graphs", "flatten", "generate_suite",
    "generate_vb_rule", "load_feature_model", "parse_feature_model", "to_cnf",
]
