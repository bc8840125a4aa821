"""
Tensor and tape primitives for reverse-mode differentiation.

Every differentiable operation appends a node to the calling thread's tape.
Nodes are recorded in creation order, so the tape is already topologically
sorted and ``backward`` only has to walk it once in reverse.
"""

import threading
from contextlib import contextmanager
from dataclasses import dataclass
from typing import Callable, Dict, Iterator, List, Optional, Sequence, Tuple

import numpy as np

from ..utils.errors import TapeError

VJP = Callable[[np.ndarray], Sequence[Optional[np.ndarray]]]

_default_dtype = np.dtype(np.float32)
_local = threading.local()


def get_default_dtype() -> np.dtype:
    """Floating dtype used for new tensors and parameters."""
    return _default_dtype


def set_default_dtype(dtype) -> None:
    """Switch the floating dtype (float32 for training, float64 for gradchecks)."""
    global _default_dtype
    dtype = np.dtype(dtype)
    if dtype not in (np.dtype(np.float32), np.dtype(np.float64)):
        raise ValueError(f"Unsupported tensor dtype: {dtype}")
    _default_dtype = dtype


@contextmanager
def default_dtype(dtype) -> Iterator[None]:
    """Temporarily switch the default dtype."""
    previous = _default_dtype
    set_default_dtype(dtype)
    try:
        yield
    finally:
        set_default_dtype(previous)


@dataclass(eq=False)
class Node:
    """One recorded primitive: its output, inputs and vector-Jacobian product."""

    index: int
    op: str
    output: "Tensor"
    parents: Tuple["Tensor", ...]
    vjp: VJP


class Tape:
    """Append-only record of primitive operations for one training step."""

    def __init__(self):
        self.nodes: List[Node] = []
        self.generation = 0
        self.consumed = False

    def record(self, op: str, output: "Tensor", parents: Tuple["Tensor", ...], vjp: VJP) -> int:
        if self.consumed:
            raise TapeError("Tape already differentiated; call reset() before recording again")
        index = len(self.nodes)
        self.nodes.append(Node(index, op, output, parents, vjp))
        return index

    def reset(self) -> None:
        """Drop all nodes; tensors recorded earlier become detached."""
        self.nodes = []
        self.generation += 1
        self.consumed = False

    def __len__(self) -> int:
        return len(self.nodes)


def get_tape() -> Tape:
    """The calling thread's active tape."""
    tape = getattr(_local, "tape", None)
    if tape is None:
        tape = _local.tape = Tape()
    return tape


def reset_tape() -> None:
    get_tape().reset()


def is_grad_enabled() -> bool:
    return getattr(_local, "grad_enabled", True)


@contextmanager
def no_grad() -> Iterator[None]:
    """Disable tape recording on this thread (evaluation and inference)."""
    previous = is_grad_enabled()
    _local.grad_enabled = False
    try:
        yield
    finally:
        _local.grad_enabled = previous


class Tensor:
    """Dense array with optional participation in the differentiation tape.

    Args:
        data: Array-like values; floating arrays keep their dtype, anything
            else is converted to the default dtype
        requires_grad: Whether gradients flow to this tensor
        dtype: Explicit dtype override
    """

    __slots__ = ("data", "requires_grad", "grad", "node_id", "generation", "name")
    __array_priority__ = 100

    def __init__(self, data, requires_grad: bool = False, dtype=None, name: Optional[str] = None):
        if dtype is None:
            if isinstance(data, np.ndarray) and np.issubdtype(data.dtype, np.floating):
                dtype = data.dtype
            else:
                dtype = _default_dtype
        self.data = np.require(np.asarray(data, dtype=dtype), requirements="C")
        self.requires_grad = requires_grad
        self.grad: Optional[np.ndarray] = None
        self.node_id: Optional[int] = None
        self.generation = -1
        self.name = name

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return int(self.data.size)

    @property
    def dtype(self) -> np.dtype:
        return self.data.dtype

    @property
    def is_leaf(self) -> bool:
        return self.node_id is None

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        return float(self.data.reshape(-1)[0]) if self.data.size == 1 else float(self.data)

    def detach(self) -> "Tensor":
        return Tensor(self.data, requires_grad=False)

    def zero_grad(self) -> None:
        self.grad = None

    def backward(self) -> Dict["Tensor", np.ndarray]:
        return backward(self)

    def __repr__(self) -> str:
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={list(self.shape)}, dtype={self.dtype}{flag})"

    def __len__(self) -> int:
        return self.shape[0]

    # Arithmetic delegates to the primitive ops module.
    def __add__(self, other):
        return _ops.add(self, other)

    def __radd__(self, other):
        return _ops.add(other, self)

    def __sub__(self, other):
        return _ops.sub(self, other)

    def __rsub__(self, other):
        return _ops.sub(other, self)

    def __mul__(self, other):
        return _ops.mul(self, other)

    def __rmul__(self, other):
        return _ops.mul(other, self)

    def __truediv__(self, other):
        return _ops.div(self, other)

    def __rtruediv__(self, other):
        return _ops.div(other, self)

    def __neg__(self):
        return _ops.neg(self)

    def __pow__(self, exponent: float):
        return _ops.power(self, exponent)

    def __matmul__(self, other):
        return _ops.matmul(self, other)

    def __getitem__(self, index):
        return _ops.getitem(self, index)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return _ops.reshape(self, shape)

    def transpose(self, axis_a: int, axis_b: int):
        return _ops.transpose(self, axis_a, axis_b)

    def sum(self, axis=None, keepdims: bool = False):
        return _ops.sum(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims: bool = False):
        return _ops.mean(self, axis=axis, keepdims=keepdims)

    def sigmoid(self):
        return _ops.sigmoid(self)

    def tanh(self):
        return _ops.tanh(self)

    def relu(self):
        return _ops.relu(self)

    def exp(self):
        return _ops.exp(self)

    def log(self):
        return _ops.log(self)


def backward(loss: Tensor) -> Dict[Tensor, np.ndarray]:
    """Accumulate d(loss)/d(leaf) into every requires-grad leaf on the tape.

    Args:
        loss: Scalar tensor recorded on the current tape

    Returns:
        Mapping from each reached leaf tensor to the gradient of this call
    """
    tape = get_tape()
    if loss.size != 1:
        raise TapeError(f"backward() needs a scalar loss, got shape {list(loss.shape)}")
    if not loss.requires_grad or loss.node_id is None or loss.generation != tape.generation:
        raise TapeError("Loss is not recorded on the active tape")
    if tape.consumed:
        raise TapeError("backward() already ran on this tape; reset it first")

    grads: Dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
    leaves: Dict[int, Tensor] = {}
    for node in reversed(tape.nodes[: loss.node_id + 1]):
        g = grads.pop(id(node.output), None)
        if g is None:
            continue
        for parent, parent_grad in zip(node.parents, node.vjp(g)):
            if parent_grad is None or not parent.requires_grad:
                continue
            key = id(parent)
            grads[key] = parent_grad if key not in grads else grads[key] + parent_grad
            if parent.node_id is None:
                leaves[key] = parent
    tape.consumed = True

    result: Dict[Tensor, np.ndarray] = {}
    for key, leaf in leaves.items():
        g = grads[key].astype(leaf.dtype, copy=False)
        leaf.grad = g if leaf.grad is None else leaf.grad + g
        result[leaf] = g
    return result


from . import ops as _ops  # noqa: E402
