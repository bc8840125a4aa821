"""
Single-case segmentation to a NIfTI label volume.
"""

import logging
from pathlib import Path
from typing import Union

import numpy as np

from ..data.nifti import nifti_read, nifti_write
from ..data.preprocess import crop_background, zscore_foreground
from ..data.volume import MODALITIES, VolumeRecord, find_volume
from ..metrics.targets import labels_from_masks
from ..model.mnet import ModelState
from ..utils.errors import GeometryError
from .evaluate import masks_from_probabilities, predict_volume

logger = logging.getLogger(__name__)


def read_inputs(case_dir: Union[str, Path]) -> VolumeRecord:
    """Read the four modality volumes of a case; labels are left empty."""
    case_dir = Path(case_dir)
    images = [nifti_read(find_volume(case_dir, case_dir.name, m)) for m in MODALITIES]
    reference = images[0]
    for name, image in zip(MODALITIES, images):
        if image.data.ndim != 3 or image.data.shape != reference.data.shape:
            raise GeometryError(f"{case_dir.name}: {name} has shape {list(image.data.shape)}, "
                                f"expected {list(reference.data.shape)}")
    return VolumeRecord(
        case_id=case_dir.name,
        modalities=np.stack([image.data.astype(np.float32) for image in images]),
        labels=np.zeros(reference.data.shape, dtype=np.uint8),
        spacing=tuple(float(s) for s in reference.spacing),
        header=reference.header,
    )


def segment_record(model: ModelState, record: VolumeRecord, threshold: float = 0.5) -> np.ndarray:
    """Label volume ``[D, H, W]`` in the record's original geometry."""
    size = tuple(model.config.image_size)
    height, width = record.shape[1:]
    if height < size[0] or width < size[1]:
        raise GeometryError(f"{record.case_id}: {height}x{width} is smaller than the model input {size[0]}x{size[1]}")
    prepared = zscore_foreground(crop_background(record, size))
    probs = predict_volume(model, prepared.modalities)
    cropped = labels_from_masks(masks_from_probabilities(probs, threshold))

    labels = np.zeros(record.shape, dtype=np.uint8)
    top, left = (height - size[0]) // 2, (width - size[1]) // 2
    labels[:, top:top + size[0], left:left + size[1]] = cropped
    return labels


def segment(model: ModelState, case_dir: Union[str, Path], out_path: Union[str, Path],
            threshold: float = 0.5) -> Path:
    """Segment one case directory and write the labels with the input's geometry."""
    record = read_inputs(case_dir)
    labels = segment_record(model, record, threshold)
    out_path = nifti_write(out_path, labels, spacing=record.spacing, template=record.header)
    logger.info("Segmented %s: %d tumor voxels written to %s", record.case_id, int((labels > 0).sum()), out_path)
    return Path(out_path)
