"""
Nested tumor regions derived from integer label maps.

Labels: 0 background, 1 necrotic/non-enhancing core, 2 edema, 4 enhancing.
Regions: WT = {1, 2, 4}, TC = {1, 4}, ET = {4}.
"""

from dataclasses import dataclass

import numpy as np

from ..utils.errors import DataError, ShapeError

LABEL_VALUES = (0, 1, 2, 4)
REGIONS = ("WT", "TC", "ET")


@dataclass(frozen=True)
class TargetMask:
    """Boolean WT/TC/ET maps of identical shape, with ``et <= tc <= wt``."""

    wt: np.ndarray
    tc: np.ndarray
    et: np.ndarray

    def __post_init__(self):
        if not (self.wt.shape == self.tc.shape == self.et.shape):
            raise ShapeError("Target masks must share one shape")

    @property
    def shape(self):
        return self.wt.shape

    def stacked(self, axis: int = -3) -> np.ndarray:
        """Channels ``[WT, TC, ET]`` stacked as float32 along ``axis``."""
        return np.stack([self.wt, self.tc, self.et], axis=axis).astype(np.float32)

    def region(self, name: str) -> np.ndarray:
        return {"WT": self.wt, "TC": self.tc, "ET": self.et}[name]

    @classmethod
    def from_channels(cls, channels: np.ndarray, axis: int = -3) -> "TargetMask":
        wt, tc, et = (np.take(channels, i, axis=axis).astype(bool) for i in range(3))
        return cls(wt, tc, et)


def compose_targets(labels: np.ndarray) -> TargetMask:
    """Derive the nested masks from a label map of any shape."""
    labels = np.asarray(labels)
    unexpected = np.setdiff1d(np.unique(labels), LABEL_VALUES)
    if unexpected.size:
        raise DataError(f"Unexpected label values {unexpected.tolist()}; allowed {list(LABEL_VALUES)}")
    return TargetMask(
        wt=np.isin(labels, (1, 2, 4)),
        tc=np.isin(labels, (1, 4)),
        et=labels == 4,
    )


def labels_from_masks(mask: TargetMask) -> np.ndarray:
    """Recompose labels: ET to 4, TC minus ET to 1, WT minus TC to 2, else 0.

    Masks that violate nesting are nested first (ET within TC within WT)."""
    et = mask.et
    tc = mask.tc | et
    wt = mask.wt | tc
    labels = np.zeros(mask.shape, dtype=np.uint8)
    labels[wt] = 2
    labels[tc] = 1
    labels[et] = 4
    return labels
