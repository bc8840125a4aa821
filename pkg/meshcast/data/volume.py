"""
Multi-modal MRI case records and their on-disk layout.

A case directory ``<case_id>/`` holds ``<case_id>_t1``, ``_t1ce``, ``_t2``,
``_flair`` and ``_seg`` as ``.nii`` or ``.nii.gz`` files.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from functools import partial
from pathlib import Path
from typing import Dict, List, Optional, Tuple, Union

import numpy as np

from ..metrics.targets import LABEL_VALUES
from ..utils.errors import DataError, GeometryError
from ..utils.settings import worker_count
from .nifti import NiftiImage, nifti_read, nifti_write

logger = logging.getLogger(__name__)

MODALITIES = ("t1", "t1ce", "t2", "flair")
SUFFIXES = (".nii.gz", ".nii")


@dataclass(frozen=True, eq=False)
class VolumeRecord:
    """One subject: four modalities ``[4, D, H, W]`` and labels ``[D, H, W]``.

    Attributes:
        spacing: Voxel size as (slice, row, column)
        cropped / normalized: Preprocessing already applied
        degenerate: Modalities whose foreground variance was too small to normalize
        header: NIfTI header of the source, reused when writing predictions
    """

    case_id: str
    modalities: np.ndarray
    labels: np.ndarray
    spacing: Tuple[float, float, float] = (1.0, 1.0, 1.0)
    cropped: bool = False
    normalized: bool = False
    degenerate: Tuple[str, ...] = ()
    header: Optional[np.ndarray] = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if self.modalities.ndim != 4 or self.modalities.shape[0] != len(MODALITIES):
            raise GeometryError(f"{self.case_id}: modalities must be [4, D, H, W], got {list(self.modalities.shape)}")
        if self.labels.shape != self.modalities.shape[1:]:
            raise GeometryError(f"{self.case_id}: labels {list(self.labels.shape)} do not match "
                                f"modalities {list(self.modalities.shape[1:])}")
        unexpected = np.setdiff1d(np.unique(self.labels), LABEL_VALUES)
        if unexpected.size:
            raise DataError(f"{self.case_id}: unexpected label values {unexpected.tolist()}")

    @property
    def shape(self) -> Tuple[int, int, int]:
        return tuple(self.labels.shape)

    @property
    def slices(self) -> int:
        return self.labels.shape[0]

    def with_arrays(self, **changes) -> "VolumeRecord":
        return replace(self, **changes)


def find_volume(case_dir: Path, case_id: str, name: str) -> Path:
    for suffix in SUFFIXES:
        candidate = case_dir / f"{case_id}_{name}{suffix}"
        if candidate.exists():
            return candidate
    raise DataError(f"{case_dir}: missing {case_id}_{name}.nii[.gz]")


def load_case(case_dir: Union[str, Path], label_remap: Optional[Dict[int, int]] = None) -> VolumeRecord:
    """Read one case directory.

    ``label_remap`` rewrites label values before validation (for example
    ``{3: 4}`` for datasets that code enhancing tumor as 3).
    """
    case_dir = Path(case_dir)
    case_id = case_dir.name
    images: List[NiftiImage] = [nifti_read(find_volume(case_dir, case_id, m)) for m in MODALITIES]
    seg = nifti_read(find_volume(case_dir, case_id, "seg"))

    reference = seg.data.shape
    for name, image in zip(MODALITIES, images):
        if image.data.shape != reference:
            raise GeometryError(f"{case_id}: {name} has shape {list(image.data.shape)}, seg has {list(reference)}")
    if len(reference) != 3:
        raise GeometryError(f"{case_id}: expected 3-D volumes, got {list(reference)}")

    labels = np.rint(seg.data).astype(np.int64)
    for src, dst in (label_remap or {}).items():
        labels[labels == src] = dst
    modalities = np.stack([image.data.astype(np.float32) for image in images])
    return VolumeRecord(
        case_id=case_id,
        modalities=modalities,
        labels=labels.astype(np.uint8),
        spacing=tuple(float(s) for s in seg.spacing),
        header=seg.header,
    )


def list_cases(data_dir: Union[str, Path]) -> List[Path]:
    data_dir = Path(data_dir)
    if not data_dir.is_dir():
        raise DataError(f"Data directory {data_dir} does not exist")
    return sorted(p for p in data_dir.iterdir() if p.is_dir())


def load_dataset(data_dir: Union[str, Path], workers: int = 0, label_remap: Optional[Dict[int, int]] = None,
                 cache_dir: Optional[Union[str, Path]] = None) -> List[VolumeRecord]:
    """Read every case under ``data_dir`` concurrently; results are ordered by case id.

    With ``cache_dir`` each case is read from its binary cache entry when
    one exists and written there after the first NIfTI read otherwise.
    """
    from .cache import load_case_cached

    case_dirs = list_cases(data_dir)
    if not case_dirs:
        raise DataError(f"No case directories under {data_dir}")
    if cache_dir is not None:
        read = partial(load_case_cached, cache_dir=cache_dir, label_remap=label_remap)
    else:
        read = partial(load_case, label_remap=label_remap)
    with ThreadPoolExecutor(max_workers=worker_count(workers)) as pool:
        records = list(pool.map(read, case_dirs))
    logger.info("Loaded %d cases from %s", len(records), data_dir)
    return records


def write_case(record: VolumeRecord, data_dir: Union[str, Path], compress: bool = True) -> Path:
    """Write a record in the case-directory layout ``load_case`` reads."""
    case_dir = Path(data_dir) / record.case_id
    suffix = ".nii.gz" if compress else ".nii"
    for name, volume in zip(MODALITIES, record.modalities):
        nifti_write(case_dir / f"{record.case_id}_{name}{suffix}", volume.astype(np.float32),
                    spacing=record.spacing, template=record.header)
    nifti_write(case_dir / f"{record.case_id}_seg{suffix}", record.labels.astype(np.uint8),
                spacing=record.spacing, template=record.header)
    return case_dir
