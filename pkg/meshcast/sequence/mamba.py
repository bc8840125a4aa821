"""
Selective state-space (S6) sequence module.

Per channel d, with input-dependent step ``delta_t`` and projections
``B_t``, ``C_t``::

    h_t = exp(delta_t * A) * h_{t-1} + delta_t * B_t * x_t
    y_t = C_t . h_t + D_skip * x_t

A is kept negative through ``A = -exp(a_log)``.
"""

from typing import NamedTuple

import numpy as np

from .. import tensor as tt
from ..tensor import Init, Tensor
from ..utils.errors import NumericalDivergenceError, ShapeError
from .base import SeqModuleKind, SequenceModule, check_sequence


class S6Params(NamedTuple):
    a: Tensor  # [D, N], negative
    w_b: Tensor  # [D, N]
    w_c: Tensor  # [D, N]
    d_skip: Tensor  # [D]
    w_dt_down: Tensor  # [D, r]
    w_dt_up: Tensor  # [r, D]
    dt_bias: Tensor  # [D]


def step_sizes(seq: Tensor, params: S6Params) -> Tensor:
    """Per-step, per-channel ``delta = softplus(x W_down W_up + dt_bias)``.

    softplus underflows to 0 for large negative inputs, so delta is floored
    at the smallest normal float of its dtype and always stays positive.
    """
    delta = tt.softplus(seq @ params.w_dt_down @ params.w_dt_up + params.dt_bias)
    if not np.isfinite(delta.data).all():
        raise NumericalDivergenceError("Selective scan step size is not finite")
    return tt.maximum(delta, np.finfo(delta.dtype).tiny)


def s6_selective_scan(seq: Tensor, params: S6Params) -> Tensor:
    """Run the selective scan over ``seq[L, B, D]``; h_0 = 0."""
    _, _, dim = check_sequence(seq)
    if params.a.ndim != 2 or params.a.shape[0] != dim:
        raise ShapeError(f"S6 transition must be [{dim}, N], got {list(params.a.shape)}")
    delta = step_sizes(seq, params)
    b = seq @ params.w_b
    c = seq @ params.w_c
    return tt.selective_scan(seq, delta, params.a, b, c, params.d_skip)


class MambaS6(SequenceModule):
    def __init__(self, kind: SeqModuleKind, dim: int):
        super().__init__(kind, dim)
        state, rank = kind.state_dim, kind.dt_rank
        self.parameter("a_log", (dim, state), Init("a_log"))
        self.parameter("w_b", (dim, state), Init.uniform(dim))
        self.parameter("w_c", (dim, state), Init.uniform(dim))
        self.parameter("d_skip", (dim,), Init.constant(1.0))
        self.parameter("w_dt_down", (dim, rank), Init.uniform(dim))
        self.parameter("w_dt_up", (rank, dim), Init.uniform(rank))
        self.parameter("dt_bias", (dim,), Init("dt_bias"))

    def params(self) -> S6Params:
        a = -tt.exp(self.a_log)
        return S6Params(a, self.w_b, self.w_c, self.d_skip, self.w_dt_down, self.w_dt_up, self.dt_bias)

    def forward(self, seq: Tensor) -> Tensor:
        return s6_selective_scan(seq, self.params())
