"""
Training and ablation configuration.
"""

from pathlib import Path
from typing import List, Literal, Tuple, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from ..metrics.losses import LossConfig
from ..model.mnet import MNetConfig
from ..sequence.base import SeqTag
from ..utils.errors import ConfigError

Schedule = Literal["tps", "ordered", "shuffled", "reverse"]
InputMode = Literal["slices", "ordered", "tps"]
MeshMode = Literal["temporal", "temporal+channel"]


class TrainConfig(BaseModel):
    """Everything a training run needs besides the data.

    Attributes:
        phase1_epochs: Epochs of the first phase (frame-shuffled under ``tps``)
        phase2_epochs: Epochs of the second phase (ordered under ``tps``)
        max_epochs: Upper bound on phase1_epochs + phase2_epochs
        early_stop_patience: Epochs without a better validation mean Dice
            before the current phase stops
        schedule: ``tps`` (shuffled then ordered), ``ordered``, ``shuffled``
            or ``reverse`` (ordered then shuffled)
        batch_size: Sequences per optimizer step
        threshold: Binarization threshold on sigmoid outputs
        eval_granularity: ``volume`` pools frames per case for Dice; ``slice`` averages per frame
    """

    model_config = ConfigDict(frozen=True)

    phase1_epochs: int = Field(default=150, ge=0)
    phase2_epochs: int = Field(default=150, ge=0)
    max_epochs: int = Field(default=300, ge=1)
    early_stop_patience: int = Field(default=30, ge=1)
    optimizer: Literal["adam"] = "adam"
    learning_rate: float = Field(default=1e-4, gt=0.0)
    batch_size: int = Field(default=1, ge=1)
    seed: int = 0
    schedule: Schedule = "tps"
    threshold: float = Field(default=0.5, gt=0.0, lt=1.0)
    eval_granularity: Literal["volume", "slice"] = "volume"
    loss: LossConfig = Field(default_factory=LossConfig)
    model: MNetConfig = Field(default_factory=MNetConfig)

    @model_validator(mode="after")
    def _check_budget(self) -> "TrainConfig":
        if self.phase1_epochs + self.phase2_epochs > self.max_epochs:
            raise ValueError(f"phase1_epochs + phase2_epochs = {self.phase1_epochs + self.phase2_epochs} "
                             f"exceeds max_epochs = {self.max_epochs}")
        if self.phase1_epochs + self.phase2_epochs == 0:
            raise ValueError("At least one training epoch is required")
        return self

    @property
    def frames(self) -> int:
        return self.model.frames_T


class AblationGrid(BaseModel):
    """Cells {seq_kind} x {input mode} x {Mesh-Cast axes}, plus an optional backbone row.

    Every cell of one seed trains on the same synthetic cases and split.
    """

    model_config = ConfigDict(frozen=True)

    seq_kinds: List[SeqTag] = Field(default_factory=lambda: ["lstm", "convlstm", "xlstm", "transformer", "mamba"])
    modes: List[InputMode] = Field(default_factory=lambda: ["slices", "tps"])
    axes: List[MeshMode] = Field(default_factory=lambda: ["temporal", "temporal+channel"])
    include_backbone: bool = True
    seeds: List[int] = Field(default_factory=lambda: [0])
    n_cases: int = Field(default=30, ge=5)
    shape: Tuple[int, int, int] = (30, 32, 32)
    base: TrainConfig = Field(default_factory=lambda: TrainConfig(
        phase1_epochs=10, phase2_epochs=10, max_epochs=20, early_stop_patience=10,
        learning_rate=1e-3, model=MNetConfig(depth=2, base_channels=8, image_size=(32, 32)),
    ))

    @model_validator(mode="after")
    def _check_nonempty(self) -> "AblationGrid":
        if not self.seq_kinds or not self.modes or not self.axes or not self.seeds:
            raise ValueError("Every ablation axis needs at least one value")
        if tuple(self.shape[1:]) != tuple(self.base.model.image_size):
            raise ValueError(f"Synthetic slice size {self.shape[1:]} must equal the model image size "
                             f"{self.base.model.image_size}")
        return self


def load_train_config(path: Union[str, Path]) -> TrainConfig:
    """Parse a JSON ``TrainConfig``; invalid content raises ``ConfigError``."""
    path = Path(path)
    try:
        return TrainConfig.model_validate_json(path.read_text())
    except OSError as e:
        raise ConfigError(f"Cannot read config {path}: {e}") from e
    except ValidationError as e:
        raise ConfigError(f"Invalid config {path}: {e}") from e


def load_ablation_grid(path: Union[str, Path]) -> AblationGrid:
    path = Path(path)
    try:
        return AblationGrid.model_validate_json(path.read_text())
    except OSError as e:
        raise ConfigError(f"Cannot read ablation grid {path}: {e}") from e
    except ValidationError as e:
        raise ConfigError(f"Invalid ablation grid {path}: {e}") from e
