"""
Convolutional LSTM: the LSTM recurrence with conv2d gates.

Each step's D features are read as a ``[Cf, H, W]`` map; the hidden state is
a ``[Ch, H, W]`` map and a 1x1 convolution maps it back to Cf channels.
"""

from typing import NamedTuple, Tuple

from .. import tensor as tt
from ..tensor import Init, Tensor
from ..utils.errors import ShapeError
from .base import SeqModuleKind, SequenceModule, check_sequence


class ConvLSTMParams(NamedTuple):
    w_x: Tensor  # [4Ch, Cf, k, k]
    w_h: Tensor  # [4Ch, Ch, k, k]
    bias: Tensor  # [4Ch]
    w_out: Tensor  # [Cf, Ch, 1, 1]
    b_out: Tensor  # [Cf]


def feature_channels(dim: int, spatial_shape: Tuple[int, int]) -> int:
    """Number of feature channels Cf with ``dim == Cf * H * W``."""
    height, width = spatial_shape
    if height < 1 or width < 1 or dim % (height * width):
        raise ShapeError(f"Feature width {dim} is not a multiple of spatial shape {height}x{width}")
    return dim // (height * width)


def conv_lstm_forward(seq: Tensor, spatial_shape: Tuple[int, int], params: ConvLSTMParams) -> Tensor:
    """Run a ConvLSTM over ``seq[L, B, Cf*H*W]`` and return the same extents."""
    steps, lanes, dim = check_sequence(seq)
    height, width = spatial_shape
    channels = feature_channels(dim, spatial_shape)
    hidden, kernel = params.w_h.shape[1], params.w_h.shape[2]
    if params.w_x.shape != (4 * hidden, channels, kernel, kernel):
        raise ShapeError(f"ConvLSTM input kernel {list(params.w_x.shape)} does not fit {channels} channels")
    pad = kernel // 2

    frames = tt.rearrange(seq, "l b (c h w) -> (l b) c h w", c=channels, h=height, w=width)
    gates_x = tt.conv2d(frames, params.w_x, params.bias, padding=pad)
    gates_x = tt.rearrange(gates_x, "(l b) g h w -> l b g h w", l=steps)

    h = tt.zeros((lanes, hidden, height, width), dtype=seq.dtype)
    c = tt.zeros((lanes, hidden, height, width), dtype=seq.dtype)
    outputs = []
    for t in range(steps):
        z = gates_x[t] + tt.conv2d(h, params.w_h, padding=pad)
        i = tt.sigmoid(z[:, :hidden])
        f = tt.sigmoid(z[:, hidden:2 * hidden])
        g = tt.tanh(z[:, 2 * hidden:3 * hidden])
        o = tt.sigmoid(z[:, 3 * hidden:])
        c = f * c + i * g
        h = o * tt.tanh(c)
        outputs.append(h)

    states = tt.rearrange(tt.stack(outputs, axis=0), "l b c h w -> (l b) c h w")
    out = tt.conv2d(states, params.w_out, params.b_out)
    return tt.rearrange(out, "(l b) c h w -> l b (c h w)", l=steps)


class ConvLSTM(SequenceModule):
    def __init__(self, kind: SeqModuleKind, dim: int, spatial_shape: Tuple[int, int] = (1, 1)):
        super().__init__(kind, dim)
        self.spatial_shape = tuple(spatial_shape)
        channels = feature_channels(dim, self.spatial_shape)
        hidden, k = kind.conv_hidden, kind.kernel_size
        self.parameter("w_x", (4 * hidden, channels, k, k), Init.uniform(channels * k * k))
        self.parameter("w_h", (4 * hidden, hidden, k, k), Init.uniform(hidden * k * k))
        self.parameter("bias", (4 * hidden,), Init.forget_bias(1.0))
        self.parameter("w_out", (channels, hidden, 1, 1), Init.uniform(hidden))
        self.parameter("b_out", (channels,), Init.constant(0.0))

    def params(self) -> ConvLSTMParams:
        return ConvLSTMParams(self.w_x, self.w_h, self.bias, self.w_out, self.b_out)

    def forward(self, seq: Tensor) -> Tensor:
        return conv_lstm_forward(seq, self.spatial_shape, self.params())
