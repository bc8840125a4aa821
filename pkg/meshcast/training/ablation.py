"""
Desk-scale ablation over sequential-module kinds, input modes and Mesh-Cast axes.

Every cell of one seed trains on the same synthetic cases with the same case
split, so rows differ only in the configuration under test. Rows report the
median over seeds of the held-out mean Dice and HD95 per region.
"""

import logging
from typing import Dict, List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, Field

from ..data.synth import synth_generate
from ..metrics.report import MetricsReport
from ..metrics.targets import REGIONS
from ..model.mnet import MeshAxes, MNetConfig
from ..sequence.base import SeqModuleKind, SeqTag
from ..utils import format_table
from ..utils.errors import ConfigError
from .config import AblationGrid, InputMode, TrainConfig
from .evaluate import evaluate
from .trainer import PreparedData, prepare_data, train_tps

logger = logging.getLogger(__name__)

AXES_LABELS = {"temporal+channel": "T+C", "temporal": "T", "none": "-"}
MODE_LABELS = {"slices": "Slices", "ordered": "Ordered", "tps": "TPS"}


class AblationCell(BaseModel):
    """One configuration under test; ``seq_kind`` is None for the backbone row."""

    seq_kind: Optional[SeqTag]
    mode: InputMode
    axes: MeshAxes

    @property
    def label(self) -> str:
        if self.axes == "none":
            return f"Backbone ({MODE_LABELS[self.mode]})"
        return f"M-Net[{self.seq_kind}] ({AXES_LABELS[self.axes]}, {MODE_LABELS[self.mode]})"


class AblationRow(BaseModel):
    cell: AblationCell
    dice: Dict[str, float]
    hd95: Dict[str, Optional[float]]
    per_seed_dice: List[Dict[str, float]] = Field(default_factory=list)
    test_cases: List[List[str]] = Field(default_factory=list)

    @property
    def label(self) -> str:
        return self.cell.label


class AblationTable(BaseModel):
    rows: List[AblationRow] = Field(default_factory=list)
    seeds: List[int] = Field(default_factory=list)

    def find(self, label: str) -> AblationRow:
        for row in self.rows:
            if row.label == label:
                return row
        raise KeyError(label)


def grid_cells(grid: AblationGrid) -> List[AblationCell]:
    """Cells in row order: every (kind, mode, axes) combination, then the backbone."""
    cells = [AblationCell(seq_kind=kind, mode=mode, axes=axes)
             for kind in grid.seq_kinds for axes in grid.axes for mode in grid.modes]
    if grid.include_backbone:
        cells.append(AblationCell(seq_kind=None, mode="ordered", axes="none"))
    return cells


def cell_config(grid: AblationGrid, cell: AblationCell, seed: int) -> TrainConfig:
    """The base configuration with the cell's kind, axes and input mode applied.

    ``slices`` trains single-frame sequences in slice order; ``ordered`` and
    ``tps`` keep the base T.
    """
    base = grid.base
    model = base.model.model_dump()
    if cell.seq_kind is not None:
        model["seq_kind"] = SeqModuleKind.model_validate({**base.model.seq_kind.model_dump(),
                                                          "tag": cell.seq_kind}).model_dump()
    model["mesh_axes"] = cell.axes
    if cell.mode == "slices":
        model["frames_T"] = 1
    train = base.model_dump()
    train.update(model=MNetConfig.model_validate(model), seed=seed,
                 schedule="tps" if cell.mode == "tps" else "ordered")
    return TrainConfig.model_validate(train)


def _median_hd95(reports: List[MetricsReport], region: str) -> Optional[float]:
    values = [r.mean_hd95[region] for r in reports if r.mean_hd95.get(region) is not None]
    return float(np.median(values)) if values else None


def run_ablation(grid: AblationGrid) -> AblationTable:
    """Train and evaluate every cell for every seed."""
    cells = grid_cells(grid)
    reports: Dict[int, List[MetricsReport]] = {i: [] for i in range(len(cells))}
    tests: Dict[int, List[List[str]]] = {i: [] for i in range(len(cells))}
    for seed in grid.seeds:
        records = synth_generate(grid.n_cases, tuple(grid.shape), seed)
        prepared: Dict[int, PreparedData] = {}
        for index, cell in enumerate(cells):
            cfg = cell_config(grid, cell, seed)
            if cfg.frames not in prepared:
                prepared[cfg.frames] = prepare_data(records, cfg.frames, seed, tuple(cfg.model.image_size))
            data = prepared[cfg.frames]
            logger.info("Ablation seed %d: %s", seed, cell.label)
            model, _ = train_tps(cfg, data)
            report = evaluate(model, data.test, threshold=cfg.threshold, frames=cfg.frames,
                              granularity=cfg.eval_granularity)
            reports[index].append(report)
            tests[index].append(list(data.split.test))

    rows = []
    for index, cell in enumerate(cells):
        per_seed = [dict(r.mean_dice) for r in reports[index]]
        rows.append(AblationRow(
            cell=cell,
            dice={region: float(np.median([d[region] for d in per_seed])) for region in REGIONS},
            hd95={region: _median_hd95(reports[index], region) for region in REGIONS},
            per_seed_dice=per_seed,
            test_cases=tests[index],
        ))
    return AblationTable(rows=rows, seeds=list(grid.seeds))


def format_ablation(table: AblationTable) -> str:
    headers = ["Model"] + [f"Dice {r}" for r in REGIONS] + [f"HD95 {r}" for r in REGIONS]
    body = []
    for row in table.rows:
        cells = [row.label] + [f"{100 * row.dice[r]:.2f}" for r in REGIONS]
        cells += ["n/a" if row.hd95[r] is None else f"{row.hd95[r]:.2f}" for r in REGIONS]
        body.append(cells)
    return format_table(f"Ablation over seeds {table.seeds}", headers, body)


def trend_rows(seq_kind: SeqTag = "mamba") -> Tuple[str, str, str]:
    return (
        AblationCell(seq_kind=seq_kind, mode="tps", axes="temporal+channel").label,
        AblationCell(seq_kind=seq_kind, mode="ordered", axes="temporal+channel").label,
        AblationCell(seq_kind=None, mode="ordered", axes="none").label,
    )


def trend_holds(table: AblationTable, seq_kind: SeqTag = "mamba", region: str = "WT",
                tolerance: float = 0.005) -> bool:
    """M-Net(T+C, TPS) >= M-Net(T+C, Ordered) >= Backbone(Ordered) on median Dice.

    Each comparison may be inverted by at most ``tolerance`` (Dice in [0, 1]).
    """
    try:
        tps, ordered, backbone = (table.find(label).dice[region] for label in trend_rows(seq_kind))
    except KeyError as e:
        raise ConfigError(f"Ablation table has no row {e}; the grid needs the ordered and tps modes, "
                          f"the temporal+channel axes and the backbone") from e
    holds = tps >= ordered - tolerance and ordered >= backbone - tolerance
    logger.info("Trend %s: TPS %.4f, Ordered %.4f, Backbone %.4f", "holds" if holds else "fails",
                tps, ordered, backbone)
    return holds
