"""
Losses, target composition and evaluation scores.
"""

from .losses import LossConfig, bce_loss, dice_loss, joint_loss
from .report import CaseMetrics, MetricsReport, aggregate, score_case
from .scores import EMPTY_DISTANCE, boundary_points, dice_score, hausdorff95, nearest_rank
from .targets import LABEL_VALUES, REGIONS, TargetMask, compose_targets, labels_from_masks

__all__ = [
    "CaseMetrics",
    "EMPTY_DISTANCE",
    "LABEL_VALUES",
    "LossConfig",
    "MetricsReport",
    "REGIONS",
    "TargetMask",
    "aggregate",
    "bce_loss",
    "boundary_points",
    "compose_targets",
    "dice_loss",
    "hausdorff95",
    "joint_loss",
    "labels_from_masks",
    "nearest_rank",
    "score_case",
]
