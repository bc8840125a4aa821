"""
Dense tensors with reverse-mode automatic differentiation.
"""

from .core import (
    Node,
    Tape,
    Tensor,
    backward,
    default_dtype,
    get_default_dtype,
    get_tape,
    is_grad_enabled,
    no_grad,
    reset_tape,
    set_default_dtype,
)
from .module import Init, Module, ModuleList
from .ops import (
    absolute,
    activation,
    add,
    broadcast_shape,
    broadcast_to,
    clip,
    concat,
    conv2d,
    div,
    exp,
    flip,
    getitem,
    layer_norm,
    log,
    matmul,
    maximum,
    mean,
    mul,
    neg,
    power,
    rearrange,
    relu,
    reshape,
    selective_scan,
    sigmoid,
    softmax,
    softplus,
    stack,
    sub,
    sum,
    take,
    tanh,
    transpose,
    zeros,
)
from .optim import Adam

__all__ = [
    "Adam",
    "Init",
    "Module",
    "ModuleList",
    "Node",
    "Tape",
    "Tensor",
    "absolute",
    "activation",
    "add",
    "backward",
    "broadcast_shape",
    "broadcast_to",
    "clip",
    "concat",
    "conv2d",
    "default_dtype",
    "div",
    "exp",
    "flip",
    "get_default_dtype",
    "get_tape",
    "getitem",
    "is_grad_enabled",
    "layer_norm",
    "log",
    "matmul",
    "maximum",
    "mean",
    "mul",
    "neg",
    "no_grad",
    "power",
    "rearrange",
    "relu",
    "reset_tape",
    "reshape",
    "selective_scan",
    "set_default_dtype",
    "sigmoid",
    "softmax",
    "softplus",
    "stack",
    "sub",
    "sum",
    "take",
    "tanh",
    "transpose",
    "zeros",
]
