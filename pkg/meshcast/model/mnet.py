"""
M-Net encoder-decoder.

Every stage runs a Vision Sequential Module (cross-scan, one shared
sequential module for all four directions, merge) followed by a Mesh-Cast
stack. Encoder stages fold space into channels, decoder stages unfold and
concatenate the matching encoder output before projecting back.
"""

import logging
from dataclasses import dataclass
from typing import Dict, List, Literal, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from .. import tensor as tt
from ..sequence import SeqModuleKind, build_sequence_module, seq_module_forward
from ..tensor import Init, Module, ModuleList, Tensor
from ..utils.errors import ConfigError, ShapeError
from .cross_scan import merge_frames, scan_frames
from .mesh_cast import MeshCastStack

logger = logging.getLogger(__name__)

MeshAxes = Literal["temporal+channel", "temporal", "none"]


class MNetConfig(BaseModel):
    """Architecture of an M-Net.

    Attributes:
        depth: Encoder stages
        base_channels: Width of stage 0; each deeper stage doubles it
        patch: Spatial down/up factor per stage
        seq_kind: Sequential module inside the Mesh-Cast layers
        vision_kind: Sequential module of the Vision Sequential Module
        mesh_axes: Which Mesh-Cast passes run (``none`` is the backbone)
        mesh_layers: Mesh-Cast layers per stage
        beta: Auxiliary-layer coefficient of the layer attention
        frames_T: Frames per training sequence
        max_frames: Longest frame sequence the model accepts
        image_size: Input (H, W)
    """

    model_config = ConfigDict(frozen=True)

    depth: int = Field(default=4, ge=1)
    base_channels: int = Field(default=16, ge=1)
    patch: int = Field(default=2, ge=1)
    seq_kind: SeqModuleKind = Field(default_factory=SeqModuleKind)
    vision_kind: SeqModuleKind = Field(default_factory=SeqModuleKind)
    mesh_axes: MeshAxes = "temporal+channel"
    mesh_layers: int = Field(default=1, ge=1)
    beta: float = Field(default=0.5, gt=0.0, lt=1.0)
    input_modalities: Literal[4] = 4
    output_channels: Literal[3] = 3
    frames_T: int = Field(default=15, ge=1)
    max_frames: int = Field(default=64, ge=1)
    image_size: Tuple[int, int] = (160, 160)

    @model_validator(mode="after")
    def _check_geometry(self) -> "MNetConfig":
        check_geometry(self)
        if self.frames_T > self.max_frames:
            raise ValueError(f"frames_T={self.frames_T} exceeds max_frames={self.max_frames}")
        return self

    def stage_channels(self, stage: int) -> int:
        return self.base_channels * 2 ** stage

    def stage_spatial(self, stage: int) -> Tuple[int, int]:
        scale = self.patch ** stage
        return self.image_size[0] // scale, self.image_size[1] // scale


def check_geometry(cfg: MNetConfig) -> None:
    """Raise ``ConfigError`` unless H and W are divisible by patch**depth."""
    scale = cfg.patch ** cfg.depth
    height, width = cfg.image_size
    if height < 1 or width < 1 or height % scale or width % scale:
        raise ConfigError(f"Image size {height}x{width} is not divisible by patch**depth = {scale}")


def space_to_channel(x: Tensor, factor: int) -> Tensor:
    """Fold ``factor x factor`` cells into channels: ``[T, C, H, W] -> [T, C*f*f, H/f, W/f]``."""
    if x.shape[2] % factor or x.shape[3] % factor:
        raise ShapeError(f"Spatial shape {list(x.shape[2:])} is not divisible by {factor}")
    return tt.rearrange(x, "t c (h p1) (w p2) -> t (c p1 p2) h w", p1=factor, p2=factor)


def channel_to_space(x: Tensor, factor: int) -> Tensor:
    """Inverse of ``space_to_channel``."""
    if x.shape[1] % (factor * factor):
        raise ShapeError(f"Channel count {x.shape[1]} is not divisible by {factor * factor}")
    return tt.rearrange(x, "t (c p1 p2) h w -> t c (h p1) (w p2)", p1=factor, p2=factor)


def patch_downsample(x: Tensor, factor: int, weight: Tensor, bias: Optional[Tensor] = None) -> Tensor:
    """Fold space into channels, then project with a 1x1 convolution."""
    return tt.conv2d(space_to_channel(x, factor), weight, bias)


def patch_upsample(x: Tensor, factor: int, weight: Tensor, bias: Optional[Tensor] = None) -> Tensor:
    """Project with a 1x1 convolution, then unfold channels into space."""
    return channel_to_space(tt.conv2d(x, weight, bias), factor)


class Conv1x1(Module):
    def __init__(self, in_channels: int, out_channels: int):
        super().__init__()
        self.parameter("weight", (out_channels, in_channels, 1, 1), Init.uniform(in_channels))
        self.parameter("bias", (out_channels,), Init.constant(0.0))

    def forward(self, x: Tensor) -> Tensor:
        return tt.conv2d(x, self.weight, self.bias)


class PatchDownsample(Conv1x1):
    def __init__(self, in_channels: int, out_channels: int, factor: int):
        super().__init__(in_channels * factor * factor, out_channels)
        self.factor = factor

    def forward(self, x: Tensor) -> Tensor:
        return patch_downsample(x, self.factor, self.weight, self.bias)


class PatchUpsample(Conv1x1):
    def __init__(self, in_channels: int, out_channels: int, factor: int):
        super().__init__(in_channels, out_channels * factor * factor)
        self.factor = factor

    def forward(self, x: Tensor) -> Tensor:
        return patch_upsample(x, self.factor, self.weight, self.bias)


class VisionSequentialModule(Module):
    """Cross-scan, normalize, run one sequential module over all directions, merge.

    The merged map is projected per pixel and added to the input.
    """

    def __init__(self, kind: SeqModuleKind, channels: int, spatial_shape: Tuple[int, int]):
        super().__init__()
        self.spatial_shape = tuple(spatial_shape)
        self.parameter("ln_gain", (channels,), Init.constant(1.0))
        self.parameter("ln_bias", (channels,), Init.constant(0.0))
        length = self.spatial_shape[0] * self.spatial_shape[1]
        self.module = build_sequence_module(kind.with_max_len(length), channels)
        self.proj = Conv1x1(channels, channels)

    def forward(self, x: Tensor) -> Tensor:
        seq = tt.layer_norm(scan_frames(x), self.ln_gain, self.ln_bias)
        merged = merge_frames(seq_module_forward(self.module, seq), self.spatial_shape)
        return x + self.proj(merged)


class Stage(Module):
    def __init__(self, cfg: MNetConfig, channels: int, spatial_shape: Tuple[int, int]):
        super().__init__()
        self.vision = VisionSequentialModule(cfg.vision_kind, channels, spatial_shape)
        self.mesh = None
        if cfg.mesh_axes != "none":
            temporal = cfg.seq_kind.with_max_len(cfg.max_frames)
            channel = cfg.seq_kind.with_max_len(channels) if cfg.mesh_axes == "temporal+channel" else None
            self.mesh = MeshCastStack(temporal, channel, spatial_shape, channels, cfg.mesh_layers, cfg.beta)

    def forward(self, x: Tensor) -> Tensor:
        x = self.vision(x)
        return self.mesh(x) if self.mesh is not None else x


class MNet(Module):
    def __init__(self, cfg: MNetConfig):
        super().__init__()
        check_geometry(cfg)
        self.config = cfg
        base = cfg.base_channels
        self.parameter("stem_weight", (base, cfg.input_modalities, 3, 3), Init.uniform(cfg.input_modalities * 9))
        self.parameter("stem_bias", (base,), Init.constant(0.0))
        self.encoders = ModuleList()
        self.downs = ModuleList()
        self.ups = ModuleList()
        self.skips = ModuleList()
        self.decoders = ModuleList()
        for stage in range(cfg.depth):
            channels, spatial = cfg.stage_channels(stage), cfg.stage_spatial(stage)
            self.encoders.append(Stage(cfg, channels, spatial))
            self.downs.append(PatchDownsample(channels, 2 * channels, cfg.patch))
            self.ups.append(PatchUpsample(2 * channels, channels, cfg.patch))
            self.skips.append(Conv1x1(2 * channels, channels))
            self.decoders.append(Stage(cfg, channels, spatial))
        self.bottleneck = Stage(cfg, cfg.stage_channels(cfg.depth), cfg.stage_spatial(cfg.depth))
        self.head = Conv1x1(base, cfg.output_channels)

    def forward(self, x: Tensor) -> Tensor:
        cfg = self.config
        expected = (cfg.input_modalities,) + tuple(cfg.image_size)
        if x.ndim != 4 or tuple(x.shape[1:]) != expected or x.shape[0] > cfg.max_frames:
            raise ShapeError(f"M-Net expects [T<={cfg.max_frames}, {expected[0]}, {expected[1]}, {expected[2]}], "
                             f"got {list(x.shape)}")
        h = tt.relu(tt.conv2d(x, self.stem_weight, self.stem_bias, padding=1))
        skips: List[Tensor] = []
        for encoder, down in zip(self.encoders, self.downs):
            h = encoder(h)
            skips.append(h)
            h = down(h)
        h = self.bottleneck(h)
        for stage in reversed(range(cfg.depth)):
            h = self.ups[stage](h)
            h = self.skips[stage](tt.concat([h, skips[stage]], axis=1))
            h = self.decoders[stage](h)
        return self.head(h)


@dataclass
class ModelState:
    """Network parameters with the config that built them and the optimizer step."""

    config: MNetConfig
    network: MNet
    step: int = 0

    def parameters(self) -> Dict[str, np.ndarray]:
        return self.network.state_dict()

    @property
    def parameter_count(self) -> int:
        return self.network.parameter_count()


def build_model(cfg: MNetConfig, seed: int = 0) -> ModelState:
    """Construct and initialize an M-Net; identical (cfg, seed) give identical parameters."""
    network = MNet(cfg).initialize(seed)
    state = ModelState(config=cfg, network=network)
    logger.info("Built M-Net depth=%d base=%d mesh=%s/%s with %d parameters",
                cfg.depth, cfg.base_channels, cfg.mesh_axes, cfg.seq_kind.tag, state.parameter_count)
    return state


def mnet_forward(model: ModelState, x: Tensor) -> Tensor:
    """``x[T, 4, H, W]`` to per-pixel logits ``[T, 3, H, W]``."""
    return model.network(x)
