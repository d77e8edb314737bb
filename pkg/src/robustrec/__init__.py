"""Robustness evaluation for recommender models.

Perturb a split dataset along one dimension (subpopulation, distribution
shift, feature transformation, rating attack, sparsity), refit or re-evaluate
a set of models, and report percent change against the clean baseline.
"""
from .data import Dataset, FeatureSchema, FeatureTable, RatingScale, Split, load_generic, load_movielens, split_ratio, user_activity
from .harness import EvalReport, RobustnessConfig, load_config, run_experiment
from .report import emit_chart, emit_report, load_report

__version__ = "0.1.0"

__all__ = [
    "Dataset", "FeatureSchema", "FeatureTable", "RatingScale", "Split",
    "load_movielens", "load_generic", "split_ratio", "user_activity",
    "RobustnessConfig", "EvalReport", "load_config", "run_experiment",
    "emit_report", "emit_chart", "load_report",
]
