"""
Mesh-Cast: alternate a sequential module over frames and over channels.

A ``[T, C, H, W]`` block is flattened to ``[T, C, H*W]``. The temporal pass
treats frames as steps and channels as lanes; casting swaps the two leading
axes so the channel pass treats channels as steps and frames as lanes; a
second cast restores the layout.
"""

import logging
from typing import List, Optional, Sequence, Tuple

from .. import tensor as tt
from ..sequence import IdentitySequence, SeqModuleKind, build_sequence_module, seq_module_forward
from ..tensor import Init, Module, ModuleList, Tensor
from ..utils.errors import ConfigError, ShapeError

logger = logging.getLogger(__name__)


def flatten_temporal(x: Tensor) -> Tensor:
    """``[T, C, H, W]`` to ``[T, C, H*W]``."""
    if x.ndim != 4:
        raise ShapeError(f"Feature sequence must be [T, C, H, W], got {list(x.shape)}")
    return tt.rearrange(x, "t c h w -> t c (h w)")


def unflatten_temporal(seq: Tensor, spatial_shape: Tuple[int, int]) -> Tensor:
    height, width = spatial_shape
    if seq.ndim != 3 or seq.shape[2] != height * width:
        raise ShapeError(f"Cannot unflatten {list(seq.shape)} to spatial shape {height}x{width}")
    return tt.rearrange(seq, "t c (h w) -> t c h w", h=height, w=width)


def _cast(x: Tensor) -> Tensor:
    if x.ndim != 3:
        raise ShapeError(f"Mesh-Cast needs a rank-3 sequence batch, got {list(x.shape)}")
    return tt.transpose(x, 0, 1)


def mesh_cast_forward(x: Tensor) -> Tensor:
    """``[T, C, D]`` to ``[C, T, D]``: channels become the step axis."""
    return _cast(x)


def mesh_cast_backward(x: Tensor) -> Tensor:
    """``[C, T, D]`` to ``[T, C, D]``."""
    return _cast(x)


class MeshCastLayer(Module):
    """One temporal pass and one channel pass over D = H*W features.

    A ``None`` kind installs a pass-through for that axis.
    """

    def __init__(self, temporal_kind: Optional[SeqModuleKind], channel_kind: Optional[SeqModuleKind],
                 spatial_shape: Tuple[int, int]):
        super().__init__()
        self.spatial_shape = tuple(spatial_shape)
        dim = self.spatial_shape[0] * self.spatial_shape[1]
        self.temporal = (build_sequence_module(temporal_kind, dim, self.spatial_shape)
                         if temporal_kind is not None else IdentitySequence(dim))
        self.channel = (build_sequence_module(channel_kind, dim, self.spatial_shape)
                        if channel_kind is not None else IdentitySequence(dim))

    def forward(self, x: Tensor) -> Tensor:
        seq = seq_module_forward(self.temporal, flatten_temporal(x))
        seq = seq_module_forward(self.channel, mesh_cast_forward(seq))
        return unflatten_temporal(mesh_cast_backward(seq), self.spatial_shape)


def mesh_cast_layer_forward(layer: MeshCastLayer, x: Tensor) -> Tensor:
    """Apply ``layer`` to ``x[T, C, H, W]``; the output has the same shape."""
    return layer(x)


class LayerAttention(Module):
    """Squeeze-and-excitation weighting of stacked layer outputs.

    Each layer output is average-pooled to one value; a two-layer bottleneck
    and a sigmoid turn the pooled vector into gates, normalized to sum to 1.

    Args:
        layers: Number of stacked outputs n
        beta: Auxiliary-layer coefficients for layers 2..n, each in (0, 1)
    """

    def __init__(self, layers: int, beta: Sequence[float] = ()):
        super().__init__()
        if layers < 1:
            raise ConfigError("LayerAttention needs at least one layer")
        beta = tuple(beta) if beta else (0.5,) * (layers - 1)
        if len(beta) != layers - 1 or any(not 0.0 < b < 1.0 for b in beta):
            raise ConfigError(f"beta must hold {layers - 1} values in (0, 1), got {list(beta)}")
        self.layers = layers
        self.beta = beta
        reduced = max(1, layers // 2)
        self.parameter("w_squeeze", (layers, reduced), Init.uniform(layers))
        self.parameter("b_squeeze", (reduced,), Init.constant(0.0))
        self.parameter("w_excite", (reduced, layers), Init.uniform(reduced))
        self.parameter("b_excite", (layers,), Init.constant(0.0))

    def gates(self, outputs: Sequence[Tensor]) -> Tensor:
        """Normalized gates ``[n]`` computed from the pooled layer outputs."""
        pooled = tt.reshape(tt.stack([tt.mean(y) for y in outputs]), (1, len(outputs)))
        hidden = tt.relu(pooled @ self.w_squeeze + self.b_squeeze)
        alpha = tt.sigmoid(hidden @ self.w_excite + self.b_excite)
        alpha = tt.reshape(alpha, (len(outputs),))
        return alpha / tt.sum(alpha)

    def balance(self, outputs: Sequence[Tensor]) -> Tensor:
        alpha = self.gates(outputs)
        balanced = outputs[0] * alpha[0]
        for i in range(1, len(outputs)):
            balanced = balanced + outputs[i] * alpha[i]
        return balanced

    def forward(self, outputs: Sequence[Tensor], x_input: Tensor) -> Tensor:
        return layer_attention_aggregate(outputs, x_input, self)


def layer_attention_aggregate(outputs: Sequence[Tensor], x_input: Tensor, params: LayerAttention) -> Tensor:
    """``x_input * Y_balanced + sum_{i>=2} beta_i * Y_i``."""
    outputs = list(outputs)
    if not outputs:
        raise ConfigError("layer_attention_aggregate needs at least one layer output")
    if len(outputs) != params.layers:
        raise ConfigError(f"Expected {params.layers} layer outputs, got {len(outputs)}")
    shapes = {y.shape for y in outputs} | {x_input.shape}
    if len(shapes) != 1:
        raise ShapeError(f"Layer outputs and input disagree in shape: {sorted(list(s) for s in shapes)}")
    result = x_input * params.balance(outputs)
    for beta, y in zip(params.beta, outputs[1:]):
        result = result + y * beta
    return result


class MeshCastStack(Module):
    """``layers`` Mesh-Cast layers applied in sequence.

    The input is layer-normalized over channels at every pixel before the
    first layer. With two or more layers the outputs are combined by
    ``LayerAttention`` against that normalized input; a single layer's
    output is returned directly.
    """

    def __init__(self, temporal_kind: Optional[SeqModuleKind], channel_kind: Optional[SeqModuleKind],
                 spatial_shape: Tuple[int, int], channels: int, layers: int = 1, beta: float = 0.5):
        super().__init__()
        if layers < 1:
            raise ConfigError(f"mesh_layers must be >= 1, got {layers}")
        self.parameter("norm_gain", (channels,), Init.constant(1.0))
        self.parameter("norm_bias", (channels,), Init.constant(0.0))
        self.layers = ModuleList([MeshCastLayer(temporal_kind, channel_kind, spatial_shape)
                                  for _ in range(layers)])
        self.attention = LayerAttention(layers, (beta,) * (layers - 1)) if layers >= 2 else None
        logger.debug("Mesh-Cast stack with %d layer(s) over %s", layers, tuple(spatial_shape))

    def normalize(self, x: Tensor) -> Tensor:
        """Layer norm over ``C`` of ``x[T, C, H, W]``."""
        pixels = tt.rearrange(x, "t c h w -> t h w c")
        return tt.rearrange(tt.layer_norm(pixels, self.norm_gain, self.norm_bias), "t h w c -> t c h w")

    def forward(self, x: Tensor) -> Tensor:
        x = self.normalize(x)
        outputs: List[Tensor] = []
        y = x
        for layer in self.layers:
            y = layer(y)
            outputs.append(y)
        if self.attention is None:
            return outputs[0]
        return self.attention(outputs, x)
