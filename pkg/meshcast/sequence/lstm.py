"""
Long short-term memory over the step axis of a sequence batch.
"""

from typing import NamedTuple

from .. import tensor as tt
from ..tensor import Init, Tensor
from ..utils.errors import ShapeError
from .base import SeqModuleKind, SequenceModule, check_sequence


class LSTMParams(NamedTuple):
    """Gate weights packed as [input, forget, cell, output] along the last axis."""

    w_x: Tensor  # [D, 4h]
    w_h: Tensor  # [h, 4h]
    bias: Tensor  # [4h]
    w_out: Tensor  # [h, D]
    b_out: Tensor  # [D]


def lstm_forward(seq: Tensor, params: LSTMParams) -> Tensor:
    """Run a zero-initialized LSTM cell over ``seq[L, B, D]``.

    Each step computes sigmoid input/forget/output gates and a tanh
    candidate; the hidden sequence is projected back to D features.
    """
    steps, lanes, dim = check_sequence(seq)
    hidden = params.w_h.shape[0]
    if params.w_x.shape != (dim, 4 * hidden) or params.w_h.shape != (hidden, 4 * hidden):
        raise ShapeError(f"LSTM weights {list(params.w_x.shape)}/{list(params.w_h.shape)} "
                         f"do not fit width {dim} with hidden {hidden}")
    if params.w_out.shape != (hidden, dim):
        raise ShapeError(f"LSTM output projection must be [{hidden}, {dim}]")

    gates_x = seq @ params.w_x + params.bias
    h = tt.zeros((lanes, hidden), dtype=seq.dtype)
    c = tt.zeros((lanes, hidden), dtype=seq.dtype)
    outputs = []
    for t in range(steps):
        z = gates_x[t] + h @ params.w_h
        i = tt.sigmoid(z[:, :hidden])
        f = tt.sigmoid(z[:, hidden:2 * hidden])
        g = tt.tanh(z[:, 2 * hidden:3 * hidden])
        o = tt.sigmoid(z[:, 3 * hidden:])
        c = f * c + i * g
        h = o * tt.tanh(c)
        outputs.append(h)
    return tt.stack(outputs, axis=0) @ params.w_out + params.b_out


class LSTM(SequenceModule):
    def __init__(self, kind: SeqModuleKind, dim: int):
        super().__init__(kind, dim)
        hidden = kind.hidden
        self.parameter("w_x", (dim, 4 * hidden), Init.uniform(dim))
        self.parameter("w_h", (hidden, 4 * hidden), Init.uniform(hidden))
        self.parameter("bias", (4 * hidden,), Init.forget_bias(1.0))
        self.parameter("w_out", (hidden, dim), Init.uniform(hidden))
        self.parameter("b_out", (dim,), Init.constant(0.0))

    def params(self) -> LSTMParams:
        return LSTMParams(self.w_x, self.w_h, self.bias, self.w_out, self.b_out)

    def forward(self, seq: Tensor) -> Tensor:
        return lstm_forward(seq, self.params())
