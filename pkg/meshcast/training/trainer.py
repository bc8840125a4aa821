"""
Two-phase (TPS) training loop.

Phase 1 iterates the frame-shuffled view, phase 2 the ordered view, and
phase 2 continues from the phase-1 parameters. Validation runs after every
epoch; the best validation mean Dice is tracked across both phases while
early-stopping patience is counted within the current phase.
"""

import logging
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from .. import tensor as tt
from ..data.preprocess import preprocess
from ..data.sequences import DatasetView, SequenceSample, make_sequences, tps_views
from ..data.splits import CaseSplit, split_cases
from ..data.volume import VolumeRecord
from ..metrics.losses import joint_loss
from ..model.checkpoint import save_checkpoint, state_from_arrays
from ..model.mnet import ModelState, build_model
from ..tensor import Adam, Tensor
from ..utils import array_digest
from ..utils.errors import DataError, NumericalDivergenceError
from .config import TrainConfig
from .evaluate import evaluate
from .record import EpochRecord, PhaseRecord, RunRecord

logger = logging.getLogger(__name__)

BEST_CHECKPOINT = "best.mckp"
DIVERGED_CHECKPOINT = "last_finite.mckp"


@dataclass
class PreparedData:
    """Preprocessed cases of one split plus the ordered training sequences."""

    split: CaseSplit
    train: List[VolumeRecord]
    val: List[VolumeRecord]
    test: List[VolumeRecord]
    samples: List[SequenceSample]


def prepare_data(records: Sequence[VolumeRecord], frames: int, seed: int,
                 size: Tuple[int, int]) -> PreparedData:
    """Preprocess every case, split by case id and cut training sequences."""
    prepared = {r.case_id: preprocess(r, size) for r in records}
    split = split_cases(list(prepared), seed)
    samples = [s for case_id in split.train for s in make_sequences(prepared[case_id], frames)]
    if not samples:
        raise DataError("No training sequences; every training case is shorter than T")
    logger.info("Prepared %d/%d/%d train/val/test cases and %d sequences of T=%d",
                len(split.train), len(split.val), len(split.test), len(samples), frames)
    return PreparedData(
        split=split,
        train=[prepared[c] for c in split.train],
        val=[prepared[c] for c in split.val],
        test=[prepared[c] for c in split.test],
        samples=samples,
    )


def schedule_phases(cfg: TrainConfig, samples: Sequence[SequenceSample]) -> List[Tuple[str, DatasetView, int]]:
    """(phase name, view, epochs) for each phase with a nonzero budget."""
    shuffled, ordered = tps_views(samples, cfg.seed)
    views = {
        "tps": (shuffled, ordered),
        "ordered": (ordered, ordered),
        "shuffled": (shuffled, shuffled),
        "reverse": (ordered, shuffled),
    }[cfg.schedule]
    budgets = (cfg.phase1_epochs, cfg.phase2_epochs)
    return [(f"phase{i + 1}", view, epochs)
            for i, (view, epochs) in enumerate(zip(views, budgets)) if epochs > 0]


def batch_loss(state: ModelState, batch: Sequence[SequenceSample], cfg: TrainConfig) -> Tensor:
    """Mean joint loss over the sequences of one batch."""
    total = None
    for sample in batch:
        logits = state.network(Tensor(sample.frames))
        loss = joint_loss(logits, sample.targets, cfg.loss)
        total = loss if total is None else total + loss
    return total / float(len(batch))


def _diverged(state: ModelState, last_finite: Dict[str, np.ndarray], epoch: int,
              out_dir: Optional[Path]) -> NumericalDivergenceError:
    path = None
    if out_dir is not None:
        path = str(save_checkpoint(state_from_arrays(state.config, last_finite, state.step),
                                   out_dir / DIVERGED_CHECKPOINT))
    logger.warning("Non-finite loss at epoch %d step %d; aborting", epoch, state.step)
    return NumericalDivergenceError(f"Non-finite loss at epoch {epoch}, step {state.step}",
                                    last_finite_state=last_finite, checkpoint_path=path)


def train_tps(cfg: TrainConfig, data: PreparedData,
              out_dir: Optional[Union[str, Path]] = None) -> Tuple[ModelState, RunRecord]:
    """Train an M-Net and return the best-validation model with its run record.

    Raises:
        NumericalDivergenceError: a step produced a non-finite loss; the
            error carries the parameters of the last finite step
    """
    out_dir = Path(out_dir) if out_dir is not None else None
    state = build_model(cfg.model, cfg.seed)
    optimizer = Adam(state.network.parameters(), lr=cfg.learning_rate)
    record = RunRecord()
    best_state = state.parameters()
    best_step = state.step
    last_finite: Dict[str, np.ndarray] = state.parameters()
    epoch = 0

    for name, view, budget in schedule_phases(cfg, data.samples):
        phase = PhaseRecord(name=name, view=view.mode, start_epoch=epoch,
                            start_digest=array_digest(state.parameters()))
        since_best = 0
        logger.info("Starting %s on %s view for up to %d epochs", name, view.mode, budget)
        for _ in range(budget):
            started = time.perf_counter()
            losses = []
            for batch in view.batches(cfg.batch_size, epoch):
                tt.reset_tape()
                optimizer.zero_grad()
                loss = batch_loss(state, batch, cfg)
                if not np.isfinite(loss.item()):
                    raise _diverged(state, last_finite, epoch, out_dir)
                last_finite = state.parameters()
                tt.backward(loss)
                optimizer.step()
                state.step += 1
                losses.append(loss.item())
            tt.reset_tape()

            report = evaluate(state, data.val, threshold=cfg.threshold, frames=cfg.frames,
                              granularity=cfg.eval_granularity)
            entry = EpochRecord(
                epoch=epoch,
                phase=name,
                train_loss=float(np.mean(losses)),
                val_dice=report.mean_dice,
                val_hd95=report.mean_hd95,
                val_mean_dice=report.mean_dice_overall,
                wall_seconds=time.perf_counter() - started,
            )
            record.append(entry)
            logger.info("epoch %d [%s] loss %.4f val Dice WT %.4f TC %.4f ET %.4f", epoch, name,
                        entry.train_loss, entry.val_dice["WT"], entry.val_dice["TC"], entry.val_dice["ET"])

            if entry.val_mean_dice > record.best_val_dice:
                record.best_epoch, record.best_val_dice = epoch, entry.val_mean_dice
                best_state, best_step = state.parameters(), state.step
                since_best = 0
                if out_dir is not None:
                    path = save_checkpoint(state_from_arrays(cfg.model, best_state, best_step),
                                           out_dir / BEST_CHECKPOINT)
                    record.best_checkpoint = str(path)
            else:
                since_best += 1
            epoch += 1
            if since_best >= cfg.early_stop_patience:
                record.stopped_early = True
                logger.warning("Early stop in %s at epoch %d: no better validation Dice for %d epochs",
                               name, epoch - 1, since_best)
                break

        phase.end_epoch = epoch - 1
        phase.end_digest = array_digest(state.parameters())
        record.phases.append(phase)

    best = state_from_arrays(cfg.model, best_state, best_step)
    logger.info("Best validation mean Dice %.4f at epoch %d", record.best_val_dice, record.best_epoch)
    return best, record
