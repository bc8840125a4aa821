"""
Shared fixtures: seeded generators, tape hygiene and a finite-difference gradient check.
"""

from typing import Callable, List, Sequence

import numpy as np
import pytest

from meshcast import tensor as tt
from meshcast.model.mnet import MNetConfig
from meshcast.sequence import SeqModuleKind
from meshcast.tensor import Tensor


@pytest.fixture(autouse=True)
def fresh_tape():
    tt.reset_tape()
    yield
    tt.reset_tape()


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)


def small_kind(tag: str = "mamba") -> SeqModuleKind:
    return SeqModuleKind(tag=tag, hidden=4, heads=2, mlp_ratio=2, state_dim=4, dt_rank=2, conv_hidden=2)


def tiny_config(tag: str = "mamba", **overrides) -> MNetConfig:
    """Depth-2 M-Net on 8x8 inputs with base width 4."""
    values = dict(depth=2, base_channels=4, image_size=(8, 8), frames_T=2, max_frames=8,
                  seq_kind=small_kind(tag), vision_kind=small_kind("mamba"))
    values.update(overrides)
    return MNetConfig(**values)


def numeric_gradient(fn: Callable[[List[np.ndarray]], float], arrays: List[np.ndarray], which: int,
                     index: tuple, eps: float = 1e-6) -> float:
    """Central difference of ``fn`` with respect to ``arrays[which][index]``."""
    plus = [a.copy() for a in arrays]
    minus = [a.copy() for a in arrays]
    plus[which][index] += eps
    minus[which][index] -= eps
    return (fn(plus) - fn(minus)) / (2 * eps)


def assert_gradients(fn: Callable[..., Tensor], arrays: Sequence[np.ndarray], samples: int = 6,
                     rtol: float = 1e-3, seed: int = 0) -> None:
    """Compare tape gradients of ``sum(fn(*inputs) * w)`` with central differences, in float64.

    ``samples`` entries per input are checked, chosen by a seeded generator.
    """
    picker = np.random.default_rng(seed)
    with tt.default_dtype(np.float64):
        arrays = [np.asarray(a, dtype=np.float64) for a in arrays]
        with tt.no_grad():
            reference = fn(*[Tensor(a) for a in arrays])
        weights = picker.normal(size=reference.shape)

        def scalar(values: List[np.ndarray]) -> float:
            with tt.no_grad():
                out = fn(*[Tensor(v) for v in values])
            return float(np.sum(out.data * weights))

        tt.reset_tape()
        inputs = [Tensor(a, requires_grad=True) for a in arrays]
        loss = tt.sum(fn(*inputs) * Tensor(weights))
        tt.backward(loss)

        for which, tensor in enumerate(inputs):
            analytic = tensor.grad if tensor.grad is not None else np.zeros_like(arrays[which])
            for flat in picker.choice(arrays[which].size, size=min(samples, arrays[which].size), replace=False):
                index = np.unravel_index(flat, arrays[which].shape)
                numeric = numeric_gradient(scalar, arrays, which, index)
                a = float(analytic[index])
                assert abs(a - numeric) <= rtol * max(abs(a), abs(numeric)) + 1e-7, \
                    f"input {which} at {index}: analytic {a} vs numeric {numeric}"
        tt.reset_tape()


def assert_module_gradients(module, forward: Callable[[], Tensor], samples: int = 3, rtol: float = 1e-3,
                            seed: int = 0) -> None:
    """Finite-difference check of every parameter of ``module`` (float64 parameters)."""
    picker = np.random.default_rng(seed)
    with tt.no_grad():
        reference = forward()
    weights = Tensor(picker.normal(size=reference.shape))

    def scalar() -> float:
        with tt.no_grad():
            return float(np.sum(forward().data * weights.data))

    tt.reset_tape()
    module.zero_grad()
    tt.backward(tt.sum(forward() * weights))
    for path, tensor in module.named_parameters():
        analytic = tensor.grad if tensor.grad is not None else np.zeros_like(tensor.data)
        for flat in picker.choice(tensor.size, size=min(samples, tensor.size), replace=False):
            index = np.unravel_index(flat, tensor.shape)
            original = tensor.data[index]
            tensor.data[index] = original + 1e-6
            up = scalar()
            tensor.data[index] = original - 1e-6
            down = scalar()
            tensor.data[index] = original
            numeric = (up - down) / 2e-6
            a = float(analytic[index])
            assert abs(a - numeric) <= rtol * max(abs(a), abs(numeric)) + 1e-7, \
                f"{path}{list(index)}: analytic {a} vs numeric {numeric}"
    tt.reset_tape()


@pytest.fixture
def gradcheck():
    return assert_gradients


@pytest.fixture
def module_gradcheck():
    return assert_module_gradients
