"""
Evaluation scores on binary masks: Dice and the percentile Hausdorff distance.
"""

import math
from typing import Optional, Sequence

import numpy as np
from scipy import ndimage
from scipy.spatial import cKDTree

from ..utils.errors import ShapeError

EMPTY_DISTANCE = float("nan")


def _binary_pair(pred, truth):
    pred = np.asarray(pred).astype(bool)
    truth = np.asarray(truth).astype(bool)
    if pred.shape != truth.shape:
        raise ShapeError(f"Masks differ in shape: {list(pred.shape)} vs {list(truth.shape)}")
    return pred, truth


def dice_score(pred, truth) -> float:
    """``2TP / (FP + 2TP + FN)``; two empty masks score 1.0."""
    pred, truth = _binary_pair(pred, truth)
    tp = int(np.count_nonzero(pred & truth))
    fp = int(np.count_nonzero(pred & ~truth))
    fn = int(np.count_nonzero(~pred & truth))
    denominator = fp + 2 * tp + fn
    if denominator == 0:
        return 1.0
    return 2.0 * tp / denominator


def boundary_points(mask: np.ndarray) -> np.ndarray:
    """Indices of foreground voxels with at least one face-adjacent background voxel.

    Voxels outside the array count as background.
    """
    mask = np.asarray(mask, dtype=bool)
    structure = ndimage.generate_binary_structure(mask.ndim, 1)
    interior = ndimage.binary_erosion(mask, structure=structure, border_value=0)
    return np.argwhere(mask & ~interior)


def nearest_rank(values: np.ndarray, percentile: float) -> float:
    """Nearest-rank percentile: the ``ceil(p/100 * n)``-th smallest value."""
    ordered = np.sort(np.asarray(values, dtype=np.float64))
    rank = max(1, math.ceil(percentile / 100.0 * ordered.size))
    return float(ordered[rank - 1])


def directed_distances(src: np.ndarray, dst: np.ndarray, spacing: np.ndarray) -> np.ndarray:
    """Distance from each point of ``src`` to the nearest point of ``dst``."""
    tree = cKDTree(dst * spacing)
    distances, _ = tree.query(src * spacing, k=1)
    return np.asarray(distances, dtype=np.float64)


def hausdorff95(pred, truth, spacing: Optional[Sequence[float]] = None, percentile: float = 95.0) -> float:
    """Symmetric percentile Hausdorff distance between mask boundaries.

    Returns ``EMPTY_DISTANCE`` (NaN) when either mask is empty. With
    ``percentile=100`` this is the classical Hausdorff distance.
    """
    pred, truth = _binary_pair(pred, truth)
    if not 0.0 < percentile <= 100.0:
        raise ValueError(f"percentile must be in (0, 100], got {percentile}")
    if not pred.any() or not truth.any():
        return EMPTY_DISTANCE
    spacing = np.ones(pred.ndim) if spacing is None else np.asarray(spacing, dtype=np.float64)
    if spacing.shape != (pred.ndim,):
        raise ShapeError(f"Spacing needs {pred.ndim} entries, got {spacing.tolist()}")
    a, b = boundary_points(pred), boundary_points(truth)
    forward = nearest_rank(directed_distances(a, b, spacing), percentile)
    backward = nearest_rank(directed_distances(b, a, spacing), percentile)
    return max(forward, backward)
