"""
Four-direction serialization of feature maps.

A ``[C, H, W]`` map is read as four ``[H*W, C]`` sequences: row-major (lr),
its reverse (rl), column-major (tb) and its reverse (bt). Merging undoes each
traversal and sums the four maps.
"""

from dataclasses import dataclass
from typing import Iterator, Tuple

from .. import tensor as tt
from ..tensor import Tensor
from ..utils.errors import ShapeError

DIRECTIONS = ("lr", "rl", "tb", "bt")


@dataclass(frozen=True)
class DirectionalScans:
    lr: Tensor
    rl: Tensor
    tb: Tensor
    bt: Tensor

    def __iter__(self) -> Iterator[Tensor]:
        return iter((self.lr, self.rl, self.tb, self.bt))

    def map(self, fn) -> "DirectionalScans":
        """Apply ``fn`` to every direction."""
        return DirectionalScans(*(fn(seq) for seq in self))


def cross_scan(feature_map: Tensor) -> DirectionalScans:
    """Serialize ``feature_map[C, H, W]`` in the four scan orders."""
    if feature_map.ndim != 3:
        raise ShapeError(f"cross_scan needs a [C, H, W] map, got {list(feature_map.shape)}")
    lr = tt.rearrange(feature_map, "c h w -> (h w) c")
    tb = tt.rearrange(feature_map, "c h w -> (w h) c")
    return DirectionalScans(lr, tt.flip(lr, 0), tb, tt.flip(tb, 0))


def cross_merge(scans: DirectionalScans, spatial_shape: Tuple[int, int]) -> Tensor:
    """Un-permute each direction back to ``[C, H, W]`` and sum the four maps."""
    height, width = spatial_shape
    for name, seq in zip(DIRECTIONS, scans):
        if seq.ndim != 2 or seq.shape[0] != height * width:
            raise ShapeError(f"Scan {name} has shape {list(seq.shape)}, expected [{height * width}, C]")
    rows = scans.lr + tt.flip(scans.rl, 0)
    cols = scans.tb + tt.flip(scans.bt, 0)
    return (tt.rearrange(rows, "(h w) c -> c h w", h=height, w=width)
            + tt.rearrange(cols, "(w h) c -> c h w", h=height, w=width))


def scan_frames(frames: Tensor) -> Tensor:
    """Serialize ``frames[T, C, H, W]`` into one batch ``[H*W, 4T, C]``.

    Lanes ``[k*T, (k+1)*T)`` hold direction k in ``DIRECTIONS`` order, so one
    sequential module processes every frame and direction at once.
    """
    if frames.ndim != 4:
        raise ShapeError(f"scan_frames needs [T, C, H, W], got {list(frames.shape)}")
    lr = tt.rearrange(frames, "t c h w -> (h w) t c")
    tb = tt.rearrange(frames, "t c h w -> (w h) t c")
    return tt.concat([lr, tt.flip(lr, 0), tb, tt.flip(tb, 0)], axis=1)


def merge_frames(seq: Tensor, spatial_shape: Tuple[int, int]) -> Tensor:
    """Inverse traversal of ``scan_frames`` followed by the four-way sum."""
    height, width = spatial_shape
    if seq.ndim != 3 or seq.shape[0] != height * width or seq.shape[1] % 4:
        raise ShapeError(f"merge_frames got {list(seq.shape)} for spatial shape {height}x{width}")
    frames = seq.shape[1] // 4
    lr, rl, tb, bt = (seq[:, k * frames:(k + 1) * frames] for k in range(4))
    rows = lr + tt.flip(rl, 0)
    cols = tb + tt.flip(bt, 0)
    return (tt.rearrange(rows, "(h w) t c -> t c h w", h=height, w=width)
            + tt.rearrange(cols, "(w h) t c -> t c h w", h=height, w=width))
