"""
Per-case and aggregate evaluation results.
"""

import math
from typing import Dict, List, Optional

import numpy as np
from pydantic import BaseModel, Field

from .scores import dice_score, hausdorff95
from .targets import REGIONS, TargetMask


class CaseMetrics(BaseModel):
    """Scores of one case. A ``None`` HD95 marks an empty prediction or truth."""

    case_id: str
    dice: Dict[str, float]
    hd95: Dict[str, Optional[float]]


class MetricsReport(BaseModel):
    cases: List[CaseMetrics] = Field(default_factory=list)
    mean_dice: Dict[str, float] = Field(default_factory=dict)
    mean_hd95: Dict[str, Optional[float]] = Field(default_factory=dict)
    empty_counts: Dict[str, int] = Field(default_factory=dict)
    threshold: float = 0.5
    missing_modalities: List[str] = Field(default_factory=list)
    inference_seconds: float = 0.0

    @property
    def mean_dice_overall(self) -> float:
        return float(np.mean([self.mean_dice[r] for r in REGIONS])) if self.mean_dice else 0.0


def score_case(case_id: str, pred: TargetMask, truth: TargetMask, spacing=None,
               granularity: str = "volume") -> CaseMetrics:
    """Dice and HD95 per region for one case.

    With ``granularity="volume"`` all frames are pooled before scoring Dice;
    ``"slice"`` averages per-frame Dice instead. HD95 is always volumetric.
    """
    if granularity not in ("volume", "slice"):
        raise ValueError(f"granularity must be 'volume' or 'slice', got {granularity}")
    dice: Dict[str, float] = {}
    hd95: Dict[str, Optional[float]] = {}
    for region in REGIONS:
        p, t = pred.region(region), truth.region(region)
        if granularity == "slice":
            dice[region] = float(np.mean([dice_score(p[i], t[i]) for i in range(p.shape[0])]))
        else:
            dice[region] = dice_score(p, t)
        distance = hausdorff95(p, t, spacing=spacing)
        hd95[region] = None if math.isnan(distance) else distance
    return CaseMetrics(case_id=case_id, dice=dice, hd95=hd95)


def aggregate(cases: List[CaseMetrics], **extra) -> MetricsReport:
    """Means over cases; HD95 means skip empty-mask cases, which are counted instead."""
    mean_dice: Dict[str, float] = {}
    mean_hd95: Dict[str, Optional[float]] = {}
    empty_counts: Dict[str, int] = {}
    for region in REGIONS:
        mean_dice[region] = float(np.mean([c.dice[region] for c in cases])) if cases else 0.0
        distances = [c.hd95[region] for c in cases if c.hd95[region] is not None]
        mean_hd95[region] = float(np.mean(distances)) if distances else None
        empty_counts[region] = len(cases) - len(distances)
    return MetricsReport(cases=list(cases), mean_dice=mean_dice, mean_hd95=mean_hd95,
                         empty_counts=empty_counts, **extra)
