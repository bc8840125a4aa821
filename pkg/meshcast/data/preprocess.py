"""
Background cropping and foreground z-score normalization.
"""

import logging
from typing import Tuple

import numpy as np

from ..utils.errors import PreprocessingError
from .volume import MODALITIES, VolumeRecord

logger = logging.getLogger(__name__)

TARGET_SIZE = (160, 160)
MIN_STD = 1e-8


def crop_background(record: VolumeRecord, size: Tuple[int, int] = TARGET_SIZE) -> VolumeRecord:
    """Center-crop rows and columns to ``size``; labels are cropped identically."""
    height, width = record.shape[1:]
    target_h, target_w = size
    if height < target_h or width < target_w:
        raise PreprocessingError(f"{record.case_id}: {height}x{width} is smaller than crop target "
                                 f"{target_h}x{target_w}")
    top, left = (height - target_h) // 2, (width - target_w) // 2
    rows, cols = slice(top, top + target_h), slice(left, left + target_w)
    return record.with_arrays(
        modalities=np.ascontiguousarray(record.modalities[:, :, rows, cols]),
        labels=np.ascontiguousarray(record.labels[:, rows, cols]),
        cropped=True,
    )


def zscore_foreground(record: VolumeRecord) -> VolumeRecord:
    """Normalize each modality over its strictly positive voxels.

    Background stays 0. A modality whose foreground is empty or has standard
    deviation below 1e-8 is set to 0 and listed in ``degenerate``.
    """
    if record.normalized:
        raise PreprocessingError(f"{record.case_id}: already normalized")
    out = np.zeros_like(record.modalities, dtype=np.float32)
    degenerate = []
    for index, name in enumerate(MODALITIES):
        volume = record.modalities[index].astype(np.float64)
        foreground = volume > 0
        values = volume[foreground]
        std = values.std() if values.size else 0.0
        if std < MIN_STD:
            degenerate.append(name)
            logger.warning("%s: %s foreground has no variance; left at zero", record.case_id, name)
            continue
        out[index][foreground] = ((values - values.mean()) / std).astype(np.float32)
    return record.with_arrays(modalities=out, normalized=True, degenerate=tuple(degenerate))


def preprocess(record: VolumeRecord, size: Tuple[int, int] = TARGET_SIZE) -> VolumeRecord:
    """Crop (unless already cropped) and normalize (unless already normalized)."""
    if not record.cropped or record.shape[1:] != tuple(size):
        record = crop_background(record, size)
    if not record.normalized:
        record = zscore_foreground(record)
    return record
