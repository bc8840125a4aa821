"""
Training, evaluation, segmentation and ablation drivers.
"""

from .ablation import (
    AblationCell,
    AblationRow,
    AblationTable,
    cell_config,
    format_ablation,
    grid_cells,
    run_ablation,
    trend_holds,
)
from .config import AblationGrid, TrainConfig, load_ablation_grid, load_train_config
from .evaluate import drop_modalities, evaluate, masks_from_probabilities, predict_volume, window_starts
from .record import EpochRecord, PhaseRecord, RunRecord
from .segment import read_inputs, segment, segment_record
from .trainer import PreparedData, prepare_data, schedule_phases, train_tps

__all__ = [
    "AblationCell",
    "AblationGrid",
    "AblationRow",
    "AblationTable",
    "EpochRecord",
    "PhaseRecord",
    "PreparedData",
    "RunRecord",
    "TrainConfig",
    "cell_config",
    "drop_modalities",
    "evaluate",
    "format_ablation",
    "grid_cells",
    "load_ablation_grid",
    "load_train_config",
    "masks_from_probabilities",
    "predict_volume",
    "prepare_data",
    "read_inputs",
    "run_ablation",
    "schedule_phases",
    "segment",
    "segment_record",
    "train_tps",
    "trend_holds",
    "window_starts",
]
