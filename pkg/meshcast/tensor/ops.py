"""
Differentiable primitive operations.

Binary operations broadcast by the trailing-axis rule only: the shapes must
be equal, or one shape must be a suffix of the other. Anything else needs an
explicit ``reshape``/``broadcast_to``.
"""

import builtins
from typing import Optional, Sequence, Tuple, Union

import numpy as np
from einops import rearrange as _einops_rearrange
from numpy.lib.stride_tricks import sliding_window_view

from ..utils.errors import ShapeError
from .core import Tensor, VJP, get_default_dtype, get_tape, is_grad_enabled

Operand = Union[Tensor, float, int, np.ndarray]

EXP_CLAMP = 60.0


def _as_tensor(value: Operand, like: Optional[Tensor] = None) -> Tensor:
    if isinstance(value, Tensor):
        return value
    dtype = like.dtype if like is not None else None
    return Tensor(np.asarray(value), dtype=dtype)


def _result(data: np.ndarray, parents: Tuple[Tensor, ...], op: str, vjp: VJP) -> Tensor:
    requires = is_grad_enabled() and builtins.any(p.requires_grad for p in parents)
    out = Tensor(data, requires_grad=requires)
    if requires:
        tape = get_tape()
        out.node_id = tape.record(op, out, parents, vjp)
        out.generation = tape.generation
    return out


def broadcast_shape(a: Tuple[int, ...], b: Tuple[int, ...]) -> Tuple[int, ...]:
    """Result shape under the trailing-axis rule."""
    if a == b:
        return a
    if len(a) >= len(b) and a[len(a) - len(b):] == b:
        return a
    if len(b) > len(a) and b[len(b) - len(a):] == a:
        return b
    raise ShapeError(f"Shapes {list(a)} and {list(b)} are not trailing-axis broadcastable")


def _unbroadcast(grad: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    return grad.reshape(shape)


# Elementwise arithmetic

def add(a: Operand, b: Operand) -> Tensor:
    a, b = _coerce_pair(a, b)
    broadcast_shape(a.shape, b.shape)
    return _result(a.data + b.data, (a, b), "add",
                   lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)))


def sub(a: Operand, b: Operand) -> Tensor:
    a, b = _coerce_pair(a, b)
    broadcast_shape(a.shape, b.shape)
    return _result(a.data - b.data, (a, b), "sub",
                   lambda g: (_unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)))


def mul(a: Operand, b: Operand) -> Tensor:
    a, b = _coerce_pair(a, b)
    broadcast_shape(a.shape, b.shape)
    return _result(a.data * b.data, (a, b), "mul",
                   lambda g: (_unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)))


def div(a: Operand, b: Operand) -> Tensor:
    a, b = _coerce_pair(a, b)
    broadcast_shape(a.shape, b.shape)
    out = a.data / b.data

    def vjp(g):
        return (_unbroadcast(g / b.data, a.shape),
                _unbroadcast(-g * out / b.data, b.shape))

    return _result(out, (a, b), "div", vjp)


def _coerce_pair(a: Operand, b: Operand) -> Tuple[Tensor, Tensor]:
    if isinstance(a, Tensor):
        return a, _as_tensor(b, like=a)
    b = _as_tensor(b)
    return _as_tensor(a, like=b), b


def neg(x: Tensor) -> Tensor:
    return _result(-x.data, (x,), "neg", lambda g: (-g,))


def power(x: Tensor, exponent: float) -> Tensor:
    out = x.data ** exponent
    return _result(out, (x,), "pow", lambda g: (g * exponent * x.data ** (exponent - 1),))


def absolute(x: Tensor) -> Tensor:
    return _result(np.abs(x.data), (x,), "abs", lambda g: (g * np.sign(x.data),))


def maximum(a: Operand, b: Operand) -> Tensor:
    """Elementwise maximum; ties send the gradient to ``a``."""
    a, b = _coerce_pair(a, b)
    broadcast_shape(a.shape, b.shape)
    pick_a = a.data >= b.data

    def vjp(g):
        return (_unbroadcast(np.where(pick_a, g, 0), a.shape),
                _unbroadcast(np.where(pick_a, 0, g), b.shape))

    return _result(np.maximum(a.data, b.data), (a, b), "maximum", vjp)


def clip(x: Tensor, low: float, high: float) -> Tensor:
    """Clamp values; the gradient is zero wherever the clamp is active."""
    inside = (x.data >= low) & (x.data <= high)
    return _result(np.clip(x.data, low, high), (x,), "clip", lambda g: (g * inside,))


# Linear algebra and shape manipulation

def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Matrix product over the last two axes.

    ``a`` is ``[..., M, K]``; ``b`` is either ``[K, N]`` (shared across the
    leading axes of ``a``) or ``[..., K, N]`` with the same leading axes.
    """
    if a.ndim < 2 or b.ndim < 2:
        raise ShapeError(f"matmul needs rank >= 2 operands, got {list(a.shape)} and {list(b.shape)}")
    if a.shape[-1] != b.shape[-2]:
        raise ShapeError(f"matmul inner extents differ: {list(a.shape)} @ {list(b.shape)}")
    if b.ndim > 2 and b.shape[:-2] != a.shape[:-2]:
        raise ShapeError(f"matmul leading extents differ: {list(a.shape)} @ {list(b.shape)}")

    def vjp(g):
        ga = np.matmul(g, np.swapaxes(b.data, -1, -2))
        gb = np.matmul(np.swapaxes(a.data, -1, -2), g)
        return ga, _unbroadcast(gb, b.shape)

    return _result(np.matmul(a.data, b.data), (a, b), "matmul", vjp)


def transpose(x: Tensor, axis_a: int, axis_b: int) -> Tensor:
    """Swap two axes; applying it twice restores the input exactly."""
    for axis in (axis_a, axis_b):
        if not -x.ndim <= axis < x.ndim:
            raise ShapeError(f"Axis {axis} out of range for shape {list(x.shape)}")
    out = np.ascontiguousarray(np.swapaxes(x.data, axis_a, axis_b))
    return _result(out, (x,), "transpose", lambda g: (np.swapaxes(g, axis_a, axis_b),))


def reshape(x: Tensor, shape: Sequence[int]) -> Tensor:
    try:
        out = x.data.reshape(tuple(shape))
    except ValueError as e:
        raise ShapeError(f"Cannot reshape {list(x.shape)} to {list(shape)}") from e
    return _result(out, (x,), "reshape", lambda g: (g.reshape(x.shape),))


def rearrange(x: Tensor, pattern: str, **axes_lengths: int) -> Tensor:
    """einops-style axis rearrangement with the inverse pattern as its VJP."""
    left, right = (side.strip() for side in pattern.split("->"))
    lengths = dict(axes_lengths)
    tokens = left.replace("(", " ( ").replace(")", " ) ").split()
    depth = 0
    position = 0
    for token in tokens:
        if token == "(":
            depth += 1
        elif token == ")":
            depth -= 1
            position += 1
        else:
            if depth == 0:
                lengths.setdefault(token, x.shape[position])
                position += 1
    out = np.ascontiguousarray(_einops_rearrange(x.data, pattern, **axes_lengths))
    inverse = f"{right} -> {left}"
    return _result(out, (x,), "rearrange",
                   lambda g: (_einops_rearrange(g, inverse, **lengths),))


def broadcast_to(x: Tensor, shape: Sequence[int]) -> Tensor:
    """Explicit broadcast (numpy rules); the VJP sums over expanded axes."""
    shape = tuple(shape)
    try:
        out = np.ascontiguousarray(np.broadcast_to(x.data, shape))
    except ValueError as e:
        raise ShapeError(f"Cannot broadcast {list(x.shape)} to {list(shape)}") from e

    def vjp(g):
        extra = g.ndim - x.ndim
        g = g.sum(axis=tuple(range(extra))) if extra else g
        axes = tuple(i for i, n in enumerate(x.shape) if n == 1 and g.shape[i] != 1)
        return (g.sum(axis=axes, keepdims=True) if axes else g,)

    return _result(out, (x,), "broadcast_to", vjp)


def sum(x: Tensor, axis=None, keepdims: bool = False) -> Tensor:  # noqa: A001
    out = np.sum(x.data, axis=axis, keepdims=keepdims)

    def vjp(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, x.shape),)

    return _result(np.asarray(out), (x,), "sum", vjp)


def mean(x: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    if axis is None:
        count = x.size
    else:
        axes = axis if isinstance(axis, tuple) else (axis,)
        count = int(np.prod([x.shape[a] for a in axes]))
    return sum(x, axis=axis, keepdims=keepdims) * (1.0 / count)


def _is_basic_index(index) -> bool:
    parts = index if isinstance(index, tuple) else (index,)
    return builtins.all(isinstance(p, (int, slice, type(None), type(Ellipsis))) for p in parts)


def getitem(x: Tensor, index) -> Tensor:
    out = np.array(x.data[index])
    basic = _is_basic_index(index)

    def vjp(g):
        full = np.zeros_like(x.data)
        if basic:
            full[index] = g
        else:
            np.add.at(full, index, g)
        return (full,)

    return _result(out, (x,), "getitem", vjp)


def take(x: Tensor, indices: np.ndarray, axis: int = 0) -> Tensor:
    """Gather along one axis; duplicates accumulate in the VJP."""
    indices = np.asarray(indices, dtype=np.intp)
    axis = axis % x.ndim

    def vjp(g):
        full = np.zeros_like(x.data)
        moved = np.moveaxis(full, axis, 0)
        np.add.at(moved, indices, np.moveaxis(g, axis, 0))
        return (full,)

    return _result(np.take(x.data, indices, axis=axis), (x,), "take", vjp)


def flip(x: Tensor, axis: int = 0) -> Tensor:
    return take(x, np.arange(x.shape[axis])[::-1], axis=axis)


def concat(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    tensors = tuple(tensors)
    axis = axis % tensors[0].ndim
    try:
        out = np.concatenate([t.data for t in tensors], axis=axis)
    except ValueError as e:
        shapes = [list(t.shape) for t in tensors]
        raise ShapeError(f"Cannot concatenate shapes {shapes} on axis {axis}") from e
    bounds = np.cumsum([t.shape[axis] for t in tensors])[:-1]
    return _result(out, tensors, "concat", lambda g: tuple(np.split(g, bounds, axis=axis)))


def stack(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    tensors = tuple(tensors)
    try:
        out = np.stack([t.data for t in tensors], axis=axis)
    except ValueError as e:
        shapes = [list(t.shape) for t in tensors]
        raise ShapeError(f"Cannot stack shapes {shapes}") from e

    def vjp(g):
        return tuple(np.take(g, i, axis=axis) for i in range(len(tensors)))

    return _result(out, tensors, "stack", vjp)


# Activations

def sigmoid(x: Tensor) -> Tensor:
    out = 0.5 * (np.tanh(0.5 * x.data) + 1.0)
    return _result(out, (x,), "sigmoid", lambda g: (g * out * (1.0 - out),))


def tanh(x: Tensor) -> Tensor:
    out = np.tanh(x.data)
    return _result(out, (x,), "tanh", lambda g: (g * (1.0 - out * out),))


def relu(x: Tensor) -> Tensor:
    return _result(np.maximum(x.data, 0), (x,), "relu", lambda g: (g * (x.data > 0),))


def exp(x: Tensor) -> Tensor:
    """Exponential of the input clamped to [-60, 60]."""
    clamped = np.clip(x.data, -EXP_CLAMP, EXP_CLAMP)
    out = np.exp(clamped)
    inside = clamped == x.data
    return _result(out, (x,), "exp", lambda g: (g * out * inside,))


def log(x: Tensor) -> Tensor:
    return _result(np.log(x.data), (x,), "log", lambda g: (g / x.data,))


def softplus(x: Tensor) -> Tensor:
    out = np.logaddexp(0, x.data)
    slope = 0.5 * (np.tanh(0.5 * x.data) + 1.0)
    return _result(out, (x,), "softplus", lambda g: (g * slope,))


def softmax(x: Tensor) -> Tensor:
    """Softmax over the last axis."""
    if x.ndim == 0 or x.shape[-1] == 0:
        raise ShapeError("softmax needs a non-empty last axis")
    shifted = x.data - x.data.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    out = e / e.sum(axis=-1, keepdims=True)

    def vjp(g):
        return (out * (g - (g * out).sum(axis=-1, keepdims=True)),)

    return _result(out, (x,), "softmax", vjp)


def activation(x: Tensor, kind: str) -> Tensor:
    """Dispatch by name: sigmoid, tanh, relu, exp or softmax_lastaxis."""
    table = {
        "sigmoid": sigmoid,
        "tanh": tanh,
        "relu": relu,
        "exp": exp,
        "softmax_lastaxis": softmax,
    }
    if kind not in table:
        raise ValueError(f"Unknown activation: {kind}")
    return table[kind](x)


def layer_norm(x: Tensor, gain: Tensor, bias: Tensor, eps: float = 1e-5) -> Tensor:
    """Normalize over the last axis, then scale by ``gain`` and shift by ``bias``."""
    if gain.shape != x.shape[-1:] or bias.shape != x.shape[-1:]:
        raise ShapeError(f"layer_norm parameters must have shape [{x.shape[-1]}]")
    mu = x.data.mean(axis=-1, keepdims=True)
    centered = x.data - mu
    inv_std = 1.0 / np.sqrt((centered * centered).mean(axis=-1, keepdims=True) + eps)
    normed = centered * inv_std
    out = normed * gain.data + bias.data

    def vjp(g):
        gn = g * gain.data
        gx = inv_std * (gn - gn.mean(axis=-1, keepdims=True)
                        - normed * (gn * normed).mean(axis=-1, keepdims=True))
        ggain = _unbroadcast(g * normed, gain.shape)
        gbias = _unbroadcast(g, bias.shape)
        return gx, ggain, gbias

    return _result(out, (x, gain, bias), "layer_norm", vjp)


# Convolution

def conv2d(x: Tensor, w: Tensor, bias: Optional[Tensor] = None,
           stride: int = 1, padding: int = 0) -> Tensor:
    """Cross-correlation of ``x[B, Cin, H, W]`` with ``w[Cout, Cin, k, k]``.

    Output extent per spatial axis is ``floor((H + 2p - k) / stride) + 1``.
    """
    if x.ndim != 4 or w.ndim != 4:
        raise ShapeError(f"conv2d needs [B,C,H,W] and [O,C,k,k], got {list(x.shape)} and {list(w.shape)}")
    batch, cin, height, width = x.shape
    cout, wcin, k, k2 = w.shape
    if wcin != cin or k != k2:
        raise ShapeError(f"conv2d kernel {list(w.shape)} does not match input {list(x.shape)}")
    if stride < 1:
        raise ShapeError(f"conv2d stride must be >= 1, got {stride}")
    if k > height + 2 * padding or k > width + 2 * padding:
        raise ShapeError(f"Kernel {k} larger than padded input {height}x{width} (padding {padding})")

    xp = np.pad(x.data, ((0, 0), (0, 0), (padding, padding), (padding, padding))) if padding else x.data
    windows = sliding_window_view(xp, (k, k), axis=(2, 3))[:, :, ::stride, ::stride]
    out_h, out_w = windows.shape[2], windows.shape[3]
    out = np.tensordot(windows, w.data, axes=([1, 4, 5], [1, 2, 3])).transpose(0, 3, 1, 2)
    if bias is not None:
        out = out + bias.data.reshape(1, cout, 1, 1)
    out = np.ascontiguousarray(out)

    def vjp(g):
        gw = np.tensordot(g, windows, axes=([0, 2, 3], [0, 2, 3]))
        cols = np.tensordot(g, w.data, axes=([1], [0]))  # [B, Ho, Wo, Cin, k, k]
        gxp = np.zeros_like(xp)
        for i in range(k):
            for j in range(k):
                gxp[:, :, i:i + stride * out_h:stride, j:j + stride * out_w:stride] += \
                    cols[:, :, :, :, i, j].transpose(0, 3, 1, 2)
        gx = gxp[:, :, padding:padding + height, padding:padding + width] if padding else gxp
        grads = [gx, gw]
        if bias is not None:
            grads.append(g.sum(axis=(0, 2, 3)))
        return tuple(grads)

    parents = (x, w) if bias is None else (x, w, bias)
    return _result(out, parents, "conv2d", vjp)


# Selective scan

def selective_scan(u: Tensor, delta: Tensor, a: Tensor, b: Tensor, c: Tensor, d_skip: Tensor) -> Tensor:
    """Input-dependent diagonal state-space recurrence, evaluated step by step.

    Shapes: ``u, delta: [L, B, D]``; ``a: [D, N]``; ``b, c: [L, B, N]``;
    ``d_skip: [D]``. With ``dA_t = exp(delta_t * a)`` and
    ``dBu_t = delta_t * b_t * u_t``:

        h_t = dA_t * h_{t-1} + dBu_t,   h_{-1} = 0
        y_t = sum_n h_t * c_t + d_skip * u_t
    """
    steps, lanes, dim = u.shape
    state = a.shape[1]
    if delta.shape != u.shape or a.shape[0] != dim or d_skip.shape != (dim,):
        raise ShapeError(f"selective_scan parameter shapes do not match input {list(u.shape)}")
    if b.shape != (steps, lanes, state) or c.shape != (steps, lanes, state):
        raise ShapeError(f"selective_scan B/C must be [{steps},{lanes},{state}]")

    def discretize(t):
        exponent = delta.data[t][..., None] * a.data
        clamped = np.clip(exponent, -EXP_CLAMP, EXP_CLAMP)
        return np.exp(clamped), clamped == exponent

    hs = np.empty((steps, lanes, dim, state), dtype=u.dtype)
    h = np.zeros((lanes, dim, state), dtype=u.dtype)
    for t in range(steps):
        d_a, _ = discretize(t)
        h = d_a * h + delta.data[t][..., None] * b.data[t][:, None, :] * u.data[t][..., None]
        hs[t] = h
    y = np.einsum("lbdn,lbn->lbd", hs, c.data) + u.data * d_skip.data

    def vjp(g):
        gu = g * d_skip.data
        gd_skip = (g * u.data).sum(axis=(0, 1))
        gc = np.einsum("lbd,lbdn->lbn", g, hs)
        gdelta = np.zeros_like(delta.data)
        ga = np.zeros_like(a.data)
        gb = np.zeros_like(b.data)
        dh = np.zeros((lanes, dim, state), dtype=u.dtype)
        for t in range(steps - 1, -1, -1):
            dh = dh + g[t][..., None] * c.data[t][:, None, :]
            h_prev = hs[t - 1] if t > 0 else np.zeros_like(dh)
            d_a, inside = discretize(t)
            g_exponent = dh * h_prev * d_a * inside
            gdelta[t] += (g_exponent * a.data).sum(axis=-1)
            ga += (g_exponent * delta.data[t][..., None]).sum(axis=0)
            bt = b.data[t][:, None, :]
            ut = u.data[t][..., None]
            dt = delta.data[t][..., None]
            gdelta[t] += (dh * bt * ut).sum(axis=-1)
            gb[t] += (dh * dt * ut).sum(axis=1)
            gu[t] += (dh * dt * bt).sum(axis=-1)
            dh = dh * d_a
        return gu, gdelta, ga, gb, gc, gd_skip

    return _result(np.ascontiguousarray(y), (u, delta, a, b, c, d_skip), "selective_scan", vjp)


def zeros(shape: Sequence[int], dtype=None) -> Tensor:
    """Constant zero tensor (never on the tape)."""
    return Tensor(np.zeros(tuple(shape), dtype=dtype or get_default_dtype()))
