"""
Pre-norm transformer encoder block with bidirectional attention.
"""

from typing import NamedTuple, Tuple, Union

import numpy as np

from .. import tensor as tt
from ..tensor import Init, Tensor
from ..utils.errors import ConfigError, ShapeError
from .base import SeqModuleKind, SequenceModule, check_sequence


class TransformerParams(NamedTuple):
    pos: Tensor  # [max_len, D]
    ln1_gain: Tensor
    ln1_bias: Tensor
    w_qkv: Tensor  # [D, 3h]
    b_qkv: Tensor  # [3h]
    w_proj: Tensor  # [h, D]
    b_proj: Tensor  # [D]
    ln2_gain: Tensor
    ln2_bias: Tensor
    w_mlp1: Tensor  # [D, r*h]
    b_mlp1: Tensor
    w_mlp2: Tensor  # [r*h, D]
    b_mlp2: Tensor


def transformer_block_forward(seq: Tensor, params: TransformerParams, heads: int,
                              return_attention: bool = False) -> Union[Tensor, Tuple[Tensor, np.ndarray]]:
    """``x + MHSA(LN(x))`` followed by ``x + MLP(LN(x))`` over ``seq[L, B, D]``.

    A learned positional table is added to the input first. Every step
    attends to every step. With ``return_attention`` the attention weights
    ``[B, heads, L, L]`` are returned alongside the output.
    """
    steps, lanes, dim = check_sequence(seq)
    width = params.w_proj.shape[0]
    if width % heads:
        raise ConfigError(f"Attention width {width} is not divisible by {heads} heads")
    if params.pos.shape[0] < steps:
        raise ShapeError(f"Sequence length {steps} exceeds the positional table ({params.pos.shape[0]})")

    pos = tt.reshape(params.pos[:steps], (steps, 1, dim))
    x = seq + tt.broadcast_to(pos, seq.shape)

    qkv = tt.layer_norm(x, params.ln1_gain, params.ln1_bias) @ params.w_qkv + params.b_qkv
    q = tt.rearrange(qkv[..., :width], "l b (n e) -> b n l e", n=heads)
    k = tt.rearrange(qkv[..., width:2 * width], "l b (n e) -> b n l e", n=heads)
    v = tt.rearrange(qkv[..., 2 * width:], "l b (n e) -> b n l e", n=heads)
    scores = (q @ tt.transpose(k, -1, -2)) * (1.0 / np.sqrt(width // heads))
    attention = tt.softmax(scores)
    context = tt.rearrange(attention @ v, "b n l e -> l b (n e)")
    x = x + (context @ params.w_proj + params.b_proj)

    hidden = tt.relu(tt.layer_norm(x, params.ln2_gain, params.ln2_bias) @ params.w_mlp1 + params.b_mlp1)
    out = x + (hidden @ params.w_mlp2 + params.b_mlp2)
    if return_attention:
        return out, attention.data
    return out


class TransformerBlock(SequenceModule):
    causal = False

    def __init__(self, kind: SeqModuleKind, dim: int):
        super().__init__(kind, dim)
        width, inner = kind.hidden, kind.hidden * kind.mlp_ratio
        if width % kind.heads:
            raise ConfigError(f"Attention width {width} is not divisible by {kind.heads} heads")
        if dim % kind.heads:
            raise ConfigError(f"Feature width {dim} is not divisible by {kind.heads} heads")
        self.heads = kind.heads
        self.parameter("pos", (kind.max_len, dim), Init.uniform(dim))
        self.parameter("ln1_gain", (dim,), Init.constant(1.0))
        self.parameter("ln1_bias", (dim,), Init.constant(0.0))
        self.parameter("w_qkv", (dim, 3 * width), Init.uniform(dim))
        self.parameter("b_qkv", (3 * width,), Init.constant(0.0))
        self.parameter("w_proj", (width, dim), Init.uniform(width))
        self.parameter("b_proj", (dim,), Init.constant(0.0))
        self.parameter("ln2_gain", (dim,), Init.constant(1.0))
        self.parameter("ln2_bias", (dim,), Init.constant(0.0))
        self.parameter("w_mlp1", (dim, inner), Init.uniform(dim))
        self.parameter("b_mlp1", (inner,), Init.constant(0.0))
        self.parameter("w_mlp2", (inner, dim), Init.uniform(inner))
        self.parameter("b_mlp2", (dim,), Init.constant(0.0))

    def params(self) -> TransformerParams:
        return TransformerParams(
            self.pos, self.ln1_gain, self.ln1_bias, self.w_qkv, self.b_qkv, self.w_proj, self.b_proj,
            self.ln2_gain, self.ln2_bias, self.w_mlp1, self.b_mlp1, self.w_mlp2, self.b_mlp2,
        )

    def forward(self, seq: Tensor, return_attention: bool = False):
        return transformer_block_forward(seq, self.params(), self.heads, return_attention)
