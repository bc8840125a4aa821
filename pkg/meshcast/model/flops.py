"""
Analytic operation counts for an M-Net configuration.

Only matrix products and convolutions are counted (a multiply-add is two
operations, so an ``[M, K] @ [K, N]`` product costs ``2*M*K*N``);
elementwise work is ignored.
"""

from collections import defaultdict
from typing import Dict, Optional, Tuple

from pydantic import BaseModel

from ..sequence import SeqModuleKind
from ..utils.errors import ShapeError
from .mnet import MNetConfig, check_geometry


class FlopReport(BaseModel):
    total: int
    by_module: Dict[str, int]
    by_kind: Dict[str, int]


def matmul_flops(m: int, k: int, n: int) -> int:
    return 2 * m * k * n


def conv_flops(batch: int, in_channels: int, out_channels: int, kernel: int,
               out_height: int, out_width: int) -> int:
    return 2 * batch * out_channels * out_height * out_width * in_channels * kernel * kernel


def sequence_flops(kind: SeqModuleKind, steps: int, lanes: int, dim: int,
                   spatial_shape: Tuple[int, int] = (1, 1)) -> int:
    """Operation count of one sequential module over ``[steps, lanes, dim]``."""
    rows = steps * lanes
    h = kind.hidden
    if kind.tag == "lstm":
        return matmul_flops(rows, dim, 4 * h) + matmul_flops(rows, h, 4 * h) + matmul_flops(rows, h, dim)
    if kind.tag == "convlstm":
        height, width = spatial_shape
        channels = dim // (height * width)
        ch, k = kind.conv_hidden, kind.kernel_size
        return (conv_flops(rows, channels, 4 * ch, k, height, width)
                + conv_flops(rows, ch, 4 * ch, k, height, width)
                + conv_flops(rows, ch, channels, 1, height, width))
    if kind.tag == "xlstm":
        total = 0
        for block in kind.xlstm_pattern:
            if block == "slstm":
                total += matmul_flops(rows, dim, 4 * h) + matmul_flops(rows, h, 4 * h)
            else:
                total += 4 * matmul_flops(rows, dim, h) + matmul_flops(rows, dim, 2)
                total += 2 * matmul_flops(rows, h, h)  # memory update and read
            total += matmul_flops(rows, h, dim)
        return total
    if kind.tag == "transformer":
        width, inner = h, h * kind.mlp_ratio
        attention = 2 * lanes * matmul_flops(steps, width, steps)
        return (matmul_flops(rows, dim, 3 * width) + attention + matmul_flops(rows, width, dim)
                + matmul_flops(rows, dim, inner) + matmul_flops(rows, inner, dim))
    if kind.tag == "mamba":
        n, r = kind.state_dim, kind.dt_rank
        projections = matmul_flops(rows, dim, r) + matmul_flops(rows, r, dim) + 2 * matmul_flops(rows, dim, n)
        scan = 2 * 2 * rows * dim * n  # state update and readout
        return projections + scan
    raise ShapeError(f"Unknown sequential module kind: {kind.tag}")


def flops_estimate(cfg: MNetConfig, input_shape: Optional[Tuple[int, int, int, int]] = None) -> FlopReport:
    """Count operations of one forward pass over ``input_shape = (T, 4, H, W)``.

    The spatial extents may differ from ``cfg.image_size`` (the count scales
    analytically); they must still be divisible by ``patch**depth``.
    """
    if input_shape is None:
        input_shape = (cfg.frames_T, cfg.input_modalities) + tuple(cfg.image_size)
    frames, _, height, width = input_shape
    sized = cfg.model_copy(update={"image_size": (height, width)})
    check_geometry(sized)

    by_module: Dict[str, int] = {}
    by_kind: Dict[str, int] = defaultdict(int)

    def add(name: str, kind: str, count: int) -> None:
        by_module[name] = by_module.get(name, 0) + count
        by_kind[kind] += count

    base = cfg.base_channels
    add("stem", "conv", conv_flops(frames, cfg.input_modalities, base, 3, height, width))

    def stage(prefix: str, channels: int, spatial: Tuple[int, int]) -> None:
        pixels = spatial[0] * spatial[1]
        add(f"{prefix}.vision", "sequence", sequence_flops(cfg.vision_kind, pixels, 4 * frames, channels))
        add(f"{prefix}.vision.proj", "conv", conv_flops(frames, channels, channels, 1, *spatial))
        if cfg.mesh_axes == "none":
            return
        for layer in range(cfg.mesh_layers):
            name = f"{prefix}.mesh.layers.{layer}"
            add(f"{name}.temporal", "sequence", sequence_flops(cfg.seq_kind, frames, channels, pixels, spatial))
            if cfg.mesh_axes == "temporal+channel":
                add(f"{name}.channel", "sequence", sequence_flops(cfg.seq_kind, channels, frames, pixels, spatial))

    for s in range(cfg.depth):
        channels, spatial = sized.stage_channels(s), sized.stage_spatial(s)
        low = sized.stage_spatial(s + 1)
        p2 = cfg.patch * cfg.patch
        stage(f"encoders.{s}", channels, spatial)
        add(f"downs.{s}", "conv", conv_flops(frames, channels * p2, 2 * channels, 1, *low))
        add(f"ups.{s}", "conv", conv_flops(frames, 2 * channels, channels * p2, 1, *low))
        add(f"skips.{s}", "conv", conv_flops(frames, 2 * channels, channels, 1, *spatial))
        stage(f"decoders.{s}", channels, spatial)
    stage("bottleneck", sized.stage_channels(cfg.depth), sized.stage_spatial(cfg.depth))
    add("head", "conv", conv_flops(frames, base, cfg.output_channels, 1, height, width))

    return FlopReport(total=sum(by_module.values()), by_module=by_module, by_kind=dict(by_kind))
