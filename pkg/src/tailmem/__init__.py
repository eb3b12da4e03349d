"""Memorization and composition of long-tail features in sparse linear regression."""
from .datagen import (
    ForcedSet,
    GroundTruth,
    SampleSet,
    SparseRow,
    build_ground_truth,
    sample_dataset,
    sample_ood_point,
    select_singleton_features,
)
from .distribution import (
    FeatureDistribution,
    build_power_law,
    choose_threshold,
    explicit,
    tail_split,
)
from .evaluation import evaluate, in_dist_loss_closed, monte_carlo_loss, ood_loss_closed, recovery_report
from .solver import Estimate, SupportMap, min_norm_solve, residuals, restrict_support

__version__ = "0.1.0"
