"""
xLSTM: a residual stack of sLSTM and mLSTM blocks.

sLSTM keeps a scalar memory per hidden unit with exponential input and
forget gates; a normalizer state ``n`` divides the cell and a stabilizer
``m`` keeps the exponentials in range. mLSTM keeps a matrix memory updated
by value-key outer products and reads it with a query.
"""

from typing import Dict, List, NamedTuple, Optional, Tuple, Union

import numpy as np

from .. import tensor as tt
from ..tensor import Init, Module, ModuleList, Tensor
from ..utils.errors import ConfigError, ShapeError
from .base import SeqModuleKind, SequenceModule, check_sequence


class SLSTMParams(NamedTuple):
    """Gates packed as [input, forget, cell, output] along the last axis."""

    w_x: Tensor  # [D, 4h]
    r_h: Tensor  # [h, 4h]
    bias: Tensor  # [4h]
    w_out: Tensor  # [h, D]
    b_out: Tensor  # [D]


class MLSTMParams(NamedTuple):
    w_q: Tensor  # [D, h]
    w_k: Tensor  # [D, h]
    w_v: Tensor  # [D, h]
    w_gates: Tensor  # [D, 2] input and forget pre-activations
    b_gates: Tensor  # [2]
    w_o: Tensor  # [D, h]
    b_o: Tensor  # [h]
    w_out: Tensor  # [h, D]
    b_out: Tensor  # [D]


def slstm_forward(seq: Tensor, params: SLSTMParams,
                  return_states: bool = False) -> Union[Tensor, Tuple[Tensor, Dict[str, np.ndarray]]]:
    """sLSTM cell over ``seq[L, B, D]`` (no residual, no normalization).

    With ``return_states`` the per-step normalized cell output ``c/n`` and
    the ``c``, ``n`` and ``m`` states are returned as arrays ``[L, B, h]``.
    """
    steps, lanes, dim = check_sequence(seq)
    hidden = params.r_h.shape[0]
    if params.w_x.shape != (dim, 4 * hidden) or params.w_out.shape != (hidden, dim):
        raise ShapeError(f"sLSTM weights do not fit width {dim} with hidden {hidden}")

    gates_x = seq @ params.w_x + params.bias
    h = tt.zeros((lanes, hidden), dtype=seq.dtype)
    c = tt.zeros((lanes, hidden), dtype=seq.dtype)
    n = tt.zeros((lanes, hidden), dtype=seq.dtype)
    m = tt.zeros((lanes, hidden), dtype=seq.dtype)
    outputs = []
    trace: Dict[str, List[np.ndarray]] = {"normalized": [], "c": [], "n": [], "m": []}
    for t in range(steps):
        z = gates_x[t] + h @ params.r_h
        i_pre = z[:, :hidden]
        f_pre = z[:, hidden:2 * hidden]
        cell = tt.tanh(z[:, 2 * hidden:3 * hidden])
        o = tt.sigmoid(z[:, 3 * hidden:])
        m_new = tt.maximum(f_pre + m, i_pre)
        i = tt.exp(i_pre - m_new)
        f = tt.exp(f_pre + m - m_new)
        c = f * c + i * cell
        n = f * n + i
        m = m_new
        normalized = c / n
        h = o * normalized
        outputs.append(h)
        if return_states:
            for key, value in (("normalized", normalized), ("c", c), ("n", n), ("m", m)):
                trace[key].append(value.data.copy())
    out = tt.stack(outputs, axis=0) @ params.w_out + params.b_out
    if return_states:
        return out, {key: np.stack(values) for key, values in trace.items()}
    return out


def mlstm_forward(seq: Tensor, params: MLSTMParams) -> Tensor:
    """mLSTM cell over ``seq[L, B, D]`` (no residual, no normalization)."""
    steps, lanes, dim = check_sequence(seq)
    hidden = params.w_q.shape[1]
    if params.w_q.shape != (dim, hidden) or params.w_out.shape != (hidden, dim):
        raise ShapeError(f"mLSTM weights do not fit width {dim} with hidden {hidden}")

    q_all = seq @ params.w_q
    k_all = (seq @ params.w_k) * (1.0 / np.sqrt(hidden))
    v_all = seq @ params.w_v
    gates = seq @ params.w_gates + params.b_gates
    o_all = tt.sigmoid(seq @ params.w_o + params.b_o)

    memory = tt.zeros((lanes, hidden, hidden), dtype=seq.dtype)
    n = tt.zeros((lanes, hidden), dtype=seq.dtype)
    m = tt.zeros((lanes, 1), dtype=seq.dtype)
    outputs = []
    for t in range(steps):
        i_pre = gates[t][:, 0:1]
        f_pre = gates[t][:, 1:2]
        m_new = tt.maximum(f_pre + m, i_pre)
        i = tt.exp(i_pre - m_new)
        f = tt.exp(f_pre + m - m_new)
        q, k, v = q_all[t], k_all[t], v_all[t]
        outer = tt.reshape(v, (lanes, hidden, 1)) @ tt.reshape(k, (lanes, 1, hidden))
        memory = (tt.broadcast_to(tt.reshape(f, (lanes, 1, 1)), memory.shape) * memory
                  + tt.broadcast_to(tt.reshape(i, (lanes, 1, 1)), outer.shape) * outer)
        n = tt.broadcast_to(f, n.shape) * n + tt.broadcast_to(i, k.shape) * k
        m = m_new
        read = tt.reshape(memory @ tt.reshape(q, (lanes, hidden, 1)), (lanes, hidden))
        scale = tt.absolute(tt.sum(n * q, axis=-1, keepdims=True))
        denominator = tt.maximum(scale, tt.exp(-m))
        outputs.append(o_all[t] * (read / tt.broadcast_to(denominator, read.shape)))
    return tt.stack(outputs, axis=0) @ params.w_out + params.b_out


class SLSTMBlock(Module):
    def __init__(self, dim: int, hidden: int):
        super().__init__()
        self.parameter("ln_gain", (dim,), Init.constant(1.0))
        self.parameter("ln_bias", (dim,), Init.constant(0.0))
        self.parameter("w_x", (dim, 4 * hidden), Init.uniform(dim))
        self.parameter("r_h", (hidden, 4 * hidden), Init.uniform(hidden))
        self.parameter("bias", (4 * hidden,), Init.forget_bias(1.0))
        self.parameter("w_out", (hidden, dim), Init.uniform(hidden))
        self.parameter("b_out", (dim,), Init.constant(0.0))

    def params(self) -> SLSTMParams:
        return SLSTMParams(self.w_x, self.r_h, self.bias, self.w_out, self.b_out)

    def forward(self, seq: Tensor) -> Tensor:
        return seq + slstm_forward(tt.layer_norm(seq, self.ln_gain, self.ln_bias), self.params())


class MLSTMBlock(Module):
    def __init__(self, dim: int, hidden: int):
        super().__init__()
        self.parameter("ln_gain", (dim,), Init.constant(1.0))
        self.parameter("ln_bias", (dim,), Init.constant(0.0))
        for name in ("w_q", "w_k", "w_v", "w_o"):
            self.parameter(name, (dim, hidden), Init.uniform(dim))
        self.parameter("w_gates", (dim, 2), Init.uniform(dim))
        self.parameter("b_gates", (2,), Init.constant(0.0))
        self.parameter("b_o", (hidden,), Init.constant(0.0))
        self.parameter("w_out", (hidden, dim), Init.uniform(hidden))
        self.parameter("b_out", (dim,), Init.constant(0.0))

    def params(self) -> MLSTMParams:
        return MLSTMParams(self.w_q, self.w_k, self.w_v, self.w_gates, self.b_gates,
                           self.w_o, self.b_o, self.w_out, self.b_out)

    def forward(self, seq: Tensor) -> Tensor:
        return seq + mlstm_forward(tt.layer_norm(seq, self.ln_gain, self.ln_bias), self.params())


def xlstm_forward(seq: Tensor, blocks: ModuleList) -> Tensor:
    """Apply the residual blocks in pattern order."""
    check_sequence(seq)
    if len(blocks) == 0:
        raise ConfigError("xLSTM needs at least one block")
    for block in blocks:
        seq = block(seq)
    return seq


class XLSTM(SequenceModule):
    """Residual sLSTM/mLSTM stack following ``kind.xlstm_pattern``."""

    def __init__(self, kind: SeqModuleKind, dim: int, pattern: Optional[List[str]] = None):
        super().__init__(kind, dim)
        pattern = list(pattern if pattern is not None else kind.xlstm_pattern)
        if not pattern or any(tag not in ("slstm", "mlstm") for tag in pattern):
            raise ConfigError(f"Invalid xLSTM block pattern: {pattern}")
        self.pattern = pattern
        block_types = {"slstm": SLSTMBlock, "mlstm": MLSTMBlock}
        self.blocks = ModuleList([block_types[tag](dim, kind.hidden) for tag in pattern])

    def params(self) -> ModuleList:
        return self.blocks

    def forward(self, seq: Tensor) -> Tensor:
        return xlstm_forward(seq, self.blocks)
