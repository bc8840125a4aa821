"""
Shared contract of the interchangeable sequential modules.

Every module maps a ``[L, B, D]`` sequence batch (L steps, B independent
lanes, D features) to a tensor of identical extents.
"""

from typing import List, Literal, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from ..tensor import Module, Tensor
from ..utils.errors import ShapeError

SeqTag = Literal["lstm", "convlstm", "xlstm", "transformer", "mamba"]
BlockTag = Literal["slstm", "mlstm"]


class SeqModuleKind(BaseModel):
    """Which sequential module to build and its hyperparameters.

    Attributes:
        tag: Module family
        hidden: Hidden width (LSTM and xLSTM cells, attention width)
        heads: Attention heads (TransformerBlock)
        mlp_ratio: MLP width as a multiple of ``hidden`` (TransformerBlock)
        state_dim: State dimension N (MambaS6)
        dt_rank: Rank of the step-size projection (MambaS6)
        kernel_size: Gate kernel size (ConvLSTM), odd
        conv_hidden: Hidden feature channels of the ConvLSTM state
        xlstm_pattern: Block sequence of the xLSTM stack
        max_len: Longest sequence the learned positional table covers
    """

    model_config = ConfigDict(frozen=True)

    tag: SeqTag = "mamba"
    hidden: int = Field(default=32, ge=1)
    heads: int = Field(default=2, ge=1)
    mlp_ratio: int = Field(default=2, ge=1)
    state_dim: int = Field(default=16, ge=1)
    dt_rank: int = Field(default=8, ge=1)
    kernel_size: int = Field(default=3, ge=1)
    conv_hidden: int = Field(default=4, ge=1)
    xlstm_pattern: List[BlockTag] = Field(default_factory=lambda: ["slstm", "mlstm"])
    max_len: int = Field(default=256, ge=1)

    @field_validator("kernel_size")
    @classmethod
    def _odd_kernel(cls, value: int) -> int:
        if value % 2 == 0:
            raise ValueError("kernel_size must be odd")
        return value

    @field_validator("xlstm_pattern")
    @classmethod
    def _nonempty_pattern(cls, value: List[str]) -> List[str]:
        if not value:
            raise ValueError("xlstm_pattern must name at least one block")
        return value

    @model_validator(mode="after")
    def _heads_divide_hidden(self) -> "SeqModuleKind":
        if self.tag == "transformer" and self.hidden % self.heads:
            raise ValueError(f"hidden={self.hidden} is not divisible by heads={self.heads}")
        return self

    def with_max_len(self, max_len: int) -> "SeqModuleKind":
        return self.model_copy(update={"max_len": max(max_len, 1)})


def check_sequence(seq: Tensor, dim: Optional[int] = None) -> Tuple[int, int, int]:
    """Validate a ``[L, B, D]`` sequence batch and return its extents."""
    if seq.ndim != 3 or min(seq.shape) < 1:
        raise ShapeError(f"Sequence batch must be [L, B, D] with positive extents, got {list(seq.shape)}")
    if dim is not None and seq.shape[2] != dim:
        raise ShapeError(f"Sequence feature width {seq.shape[2]} does not match module width {dim}")
    return seq.shape


class SequenceModule(Module):
    """Base class: subclasses implement ``forward(seq) -> seq``."""

    kind: SeqModuleKind
    causal = True

    def __init__(self, kind: SeqModuleKind, dim: int):
        super().__init__()
        self.kind = kind
        self.dim = dim

    def params(self):
        """Parameter bundle consumed by the module's functional form."""
        raise NotImplementedError


class IdentitySequence(SequenceModule):
    """Pass-through stand-in for a disabled Mesh-Cast axis."""

    def __init__(self, dim: Optional[int] = None):
        super().__init__(SeqModuleKind(), dim or 0)

    def forward(self, seq: Tensor) -> Tensor:
        check_sequence(seq)
        return seq
