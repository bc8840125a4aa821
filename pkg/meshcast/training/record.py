"""
Per-epoch training history.
"""

import hashlib
from typing import Dict, List, Optional

from pydantic import BaseModel, Field

from ..utils import canonical_json


class EpochRecord(BaseModel):
    epoch: int
    phase: str
    train_loss: float
    val_dice: Dict[str, float]
    val_hd95: Dict[str, Optional[float]]
    val_mean_dice: float
    wall_seconds: float = 0.0


class PhaseRecord(BaseModel):
    """One schedule phase with parameter digests at its boundaries."""

    name: str
    view: str
    start_epoch: int
    end_epoch: int = -1
    start_digest: str = ""
    end_digest: str = ""


class RunRecord(BaseModel):
    epochs: List[EpochRecord] = Field(default_factory=list)
    phases: List[PhaseRecord] = Field(default_factory=list)
    best_epoch: int = -1
    best_val_dice: float = -1.0
    best_checkpoint: Optional[str] = None
    stopped_early: bool = False

    def append(self, entry: EpochRecord) -> None:
        if self.epochs and entry.epoch <= self.epochs[-1].epoch:
            raise ValueError(f"Epoch {entry.epoch} recorded after epoch {self.epochs[-1].epoch}")
        self.epochs.append(entry)

    def phase_switches(self) -> int:
        """Number of times the phase marker changes between consecutive epochs."""
        return sum(1 for a, b in zip(self.epochs, self.epochs[1:]) if a.phase != b.phase)

    def fingerprint(self) -> str:
        """Digest of the record without wall-clock fields or file locations."""
        data = self.model_dump(mode="json", exclude={"best_checkpoint": True,
                                                     "epochs": {"__all__": {"wall_seconds"}}})
        return hashlib.sha256(canonical_json(data).encode("utf-8")).hexdigest()
