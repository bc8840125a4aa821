"""
Parameter containers.

Modules declare parameters together with an initialization rule. Values are
drawn once, at ``initialize(seed)``, from a generator seeded by the global
seed and the parameter's path, so two models that share a path share its
initial value regardless of what else they contain.
"""

import zlib
from dataclasses import dataclass
from typing import Dict, Iterator, List, Optional, Sequence, Tuple

import numpy as np

from ..utils.errors import ConfigError
from .core import Tensor, get_default_dtype


@dataclass(frozen=True)
class Init:
    """Initialization rule for one parameter.

    Attributes:
        kind: ``uniform`` (±1/sqrt(fan_in)), ``constant``, ``a_log``
            (log(1..N) per row), ``dt_bias`` (inverse softplus of a
            log-uniform step in [dt_min, dt_max]), ``identity``,
            ``forget_bias`` (zeros with ``value`` on the forget-gate quarter)
        fan_in: Fan-in for ``uniform``
        value: Fill value for ``constant``
    """

    kind: str
    fan_in: int = 1
    value: float = 0.0
    dt_min: float = 1e-3
    dt_max: float = 1e-1

    @classmethod
    def uniform(cls, fan_in: int) -> "Init":
        return cls("uniform", fan_in=max(1, fan_in))

    @classmethod
    def constant(cls, value: float) -> "Init":
        return cls("constant", value=value)

    @classmethod
    def forget_bias(cls, value: float = 1.0) -> "Init":
        return cls("forget_bias", value=value)

    def sample(self, shape: Tuple[int, ...], rng: np.random.Generator) -> np.ndarray:
        if self.kind == "uniform":
            bound = 1.0 / np.sqrt(self.fan_in)
            return rng.uniform(-bound, bound, size=shape)
        if self.kind == "constant":
            return np.full(shape, self.value)
        if self.kind == "identity":
            return np.eye(shape[0], shape[1])
        if self.kind == "a_log":
            return np.log(np.broadcast_to(np.arange(1, shape[-1] + 1, dtype=np.float64), shape)).copy()
        if self.kind == "dt_bias":
            dt = np.exp(rng.uniform(np.log(self.dt_min), np.log(self.dt_max), size=shape))
            return dt + np.log(-np.expm1(-dt))
        if self.kind == "forget_bias":
            # gates are packed [input, forget, cell, output] along the last axis
            out = np.zeros(shape)
            quarter = shape[-1] // 4
            out[..., quarter:2 * quarter] = self.value
            return out
        raise ConfigError(f"Unknown initialization rule: {self.kind}")


def path_seed(seed: int, path: str) -> List[int]:
    """Entropy for a parameter's generator: the run seed plus a path hash."""
    return [int(seed), zlib.crc32(path.encode("utf-8"))]


class Module:
    """Tree of named child modules and parameters.

    Attribute assignment registers ``Module`` values as children; parameters
    are declared with ``parameter``.
    """

    def __init__(self):
        object.__setattr__(self, "_parameters", {})
        object.__setattr__(self, "_inits", {})
        object.__setattr__(self, "_children", {})

    def __setattr__(self, name, value):
        children = self.__dict__.get("_children")
        if children is None:
            raise RuntimeError("Module.__init__() must run before assigning attributes")
        if isinstance(value, Module):
            children[name] = value
        elif name in children:
            del children[name]
        object.__setattr__(self, name, value)

    def parameter(self, name: str, shape: Sequence[int], init: Init) -> Tensor:
        """Declare a trainable parameter (zero-filled until ``initialize``)."""
        tensor = Tensor(np.zeros(tuple(shape), dtype=get_default_dtype()), requires_grad=True, name=name)
        self._parameters[name] = tensor
        self._inits[name] = init
        object.__setattr__(self, name, tensor)
        return tensor

    def named_parameters(self, prefix: str = "") -> Iterator[Tuple[str, Tensor]]:
        for name, tensor in self._parameters.items():
            yield prefix + name, tensor
        for name, child in self._children.items():
            yield from child.named_parameters(prefix + name + ".")

    def named_inits(self, prefix: str = "") -> Iterator[Tuple[str, Tensor, Init]]:
        for name, tensor in self._parameters.items():
            yield prefix + name, tensor, self._inits[name]
        for name, child in self._children.items():
            yield from child.named_inits(prefix + name + ".")

    def parameters(self) -> List[Tensor]:
        return [t for _, t in self.named_parameters()]

    def parameter_count(self) -> int:
        return int(sum(t.size for t in self.parameters()))

    def initialize(self, seed: int) -> "Module":
        """Fill every parameter from its rule, seeded by ``(seed, path)``."""
        for path, tensor, init in sorted(self.named_inits(), key=lambda item: item[0]):
            rng = np.random.default_rng(path_seed(seed, path))
            tensor.data[...] = init.sample(tensor.shape, rng).astype(tensor.dtype)
        return self

    def state_dict(self) -> Dict[str, np.ndarray]:
        return {path: tensor.data.copy() for path, tensor in self.named_parameters()}

    def load_state_dict(self, state: Dict[str, np.ndarray]) -> None:
        own = dict(self.named_parameters())
        missing = sorted(set(own) - set(state))
        unexpected = sorted(set(state) - set(own))
        if missing or unexpected:
            raise ConfigError(f"State mismatch: missing {missing[:5]}, unexpected {unexpected[:5]}")
        for path, tensor in own.items():
            value = np.asarray(state[path])
            if value.shape != tensor.shape:
                raise ConfigError(f"Parameter {path} has shape {list(value.shape)}, expected {list(tensor.shape)}")
            tensor.data[...] = value.astype(tensor.dtype)

    def zero_grad(self) -> None:
        for tensor in self.parameters():
            tensor.grad = None

    def forward(self, *args, **kwargs):
        raise NotImplementedError

    def __call__(self, *args, **kwargs):
        return self.forward(*args, **kwargs)


class ModuleList(Module):
    """Ordered children addressed by index (paths ``<name>.0``, ``<name>.1``...)."""

    def __init__(self, modules: Optional[Sequence[Module]] = None):
        super().__init__()
        object.__setattr__(self, "_items", [])
        for module in modules or ():
            self.append(module)

    def append(self, module: Module) -> None:
        self._children[str(len(self._items))] = module
        self._items.append(module)

    def __getitem__(self, index: int) -> Module:
        return self._items[index]

    def __setitem__(self, index: int, module: Module) -> None:
        self._items[index] = module
        self._children[str(index % len(self._items))] = module

    def __len__(self) -> int:
        return len(self._items)

    def __iter__(self):
        return iter(self._items)
