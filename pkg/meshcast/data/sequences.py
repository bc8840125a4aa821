"""
T-frame training samples and the ordered / frame-shuffled dataset views.
"""

from dataclasses import dataclass
from typing import List, Literal, Sequence, Tuple

import numpy as np

from ..metrics.targets import TargetMask, compose_targets
from ..utils.errors import ConfigError, DataError
from .volume import VolumeRecord

OrderTag = Literal["ordered", "shuffled"]
ViewMode = Literal["phase1_shuffled", "phase2_ordered"]
FrameOrigin = Tuple[str, int]


@dataclass(frozen=True, eq=False)
class SequenceSample:
    """``frames[T, 4, H, W]`` with nested targets ``[T, H, W]``.

    ``origin`` is the (case, first slice) of an ordered sample; every frame's
    own (case, slice) is kept in ``frame_origins``.
    """

    frames: np.ndarray
    targets: TargetMask
    origin: FrameOrigin
    order_tag: OrderTag
    frame_origins: Tuple[FrameOrigin, ...]

    @property
    def length(self) -> int:
        return self.frames.shape[0]


def make_sequences(record: VolumeRecord, frames: int) -> List[SequenceSample]:
    """Consecutive, non-overlapping windows of ``frames`` slices; the short tail is dropped."""
    if frames < 1:
        raise ConfigError(f"Sequence length must be >= 1, got {frames}")
    if record.slices < frames:
        raise DataError(f"{record.case_id}: {record.slices} slices is fewer than T={frames}")
    targets = compose_targets(record.labels)
    samples = []
    for start in range(0, record.slices - frames + 1, frames):
        window = slice(start, start + frames)
        samples.append(SequenceSample(
            frames=np.ascontiguousarray(record.modalities[:, window].transpose(1, 0, 2, 3)),
            targets=TargetMask(targets.wt[window], targets.tc[window], targets.et[window]),
            origin=(record.case_id, start),
            order_tag="ordered",
            frame_origins=tuple((record.case_id, s) for s in range(start, start + frames)),
        ))
    return samples


@dataclass(frozen=True)
class DatasetView:
    samples: Tuple[SequenceSample, ...]
    mode: ViewMode
    seed: int

    def __len__(self) -> int:
        return len(self.samples)

    def __iter__(self):
        return iter(self.samples)

    def __getitem__(self, index: int) -> SequenceSample:
        return self.samples[index]

    def frame_origins(self) -> List[FrameOrigin]:
        """Every frame's (case, slice), sorted: the view's frame multiset."""
        return sorted(origin for sample in self.samples for origin in sample.frame_origins)

    def batches(self, size: int, epoch: int = 0) -> List[List[SequenceSample]]:
        """Sample batches; order is reshuffled per epoch from ``(seed, epoch)``."""
        order = np.random.default_rng([self.seed, epoch]).permutation(len(self.samples))
        picked = [self.samples[i] for i in order]
        return [picked[i:i + size] for i in range(0, len(picked), size)]


def shuffle_frames(samples: Sequence[SequenceSample], seed: int) -> List[SequenceSample]:
    """Pool every frame of ``samples``, permute globally and re-pack into T-frame pseudo-sequences."""
    lengths = {s.length for s in samples}
    if len(lengths) != 1:
        raise DataError(f"Samples disagree in length: {sorted(lengths)}")
    frames = lengths.pop()
    pool = [(i, t) for i, sample in enumerate(samples) for t in range(frames)]
    order = np.random.default_rng(seed).permutation(len(pool))
    packed = []
    for start in range(0, len(pool), frames):
        picks = [pool[k] for k in order[start:start + frames]]
        first = samples[picks[0][0]].frame_origins[picks[0][1]]
        packed.append(SequenceSample(
            frames=np.stack([samples[i].frames[t] for i, t in picks]),
            targets=TargetMask(
                wt=np.stack([samples[i].targets.wt[t] for i, t in picks]),
                tc=np.stack([samples[i].targets.tc[t] for i, t in picks]),
                et=np.stack([samples[i].targets.et[t] for i, t in picks]),
            ),
            origin=first,
            order_tag="shuffled",
            frame_origins=tuple(samples[i].frame_origins[t] for i, t in picks),
        ))
    return packed


def tps_views(samples: Sequence[SequenceSample], seed: int) -> Tuple[DatasetView, DatasetView]:
    """Phase-1 (globally frame-shuffled) and phase-2 (ordered) views of the same frames."""
    if not samples:
        raise DataError("tps_views needs at least one sample")
    phase2 = DatasetView(tuple(samples), "phase2_ordered", seed)
    phase1 = DatasetView(tuple(shuffle_frames(samples, seed)), "phase1_shuffled", seed)
    return phase1, phase2
