"""
Construction and dispatch of sequential modules by kind tag.
"""

import logging
from typing import Callable, Dict, Optional, Tuple

from ..tensor import Tensor
from ..utils.errors import ConfigError
from .base import IdentitySequence, SeqModuleKind, SequenceModule
from .convlstm import ConvLSTM, conv_lstm_forward
from .lstm import LSTM, lstm_forward
from .mamba import MambaS6, s6_selective_scan
from .transformer import TransformerBlock, transformer_block_forward
from .xlstm import XLSTM, xlstm_forward

logger = logging.getLogger(__name__)

_FORWARDS: Dict[str, Callable[[SequenceModule, Tensor], Tensor]] = {
    "lstm": lambda module, seq: lstm_forward(seq, module.params()),
    "convlstm": lambda module, seq: conv_lstm_forward(seq, module.spatial_shape, module.params()),
    "xlstm": lambda module, seq: xlstm_forward(seq, module.params()),
    "transformer": lambda module, seq: transformer_block_forward(seq, module.params(), module.heads),
    "mamba": lambda module, seq: s6_selective_scan(seq, module.params()),
}


def build_sequence_module(kind: SeqModuleKind, dim: int,
                          spatial_shape: Optional[Tuple[int, int]] = None) -> SequenceModule:
    """Instantiate the module for ``kind`` operating on D = ``dim`` features.

    ``spatial_shape`` is only read by ConvLSTM, which interprets each step's
    features as ``[dim / (H*W), H, W]``; it defaults to ``(1, 1)``.
    """
    logger.debug("Building %s module for feature width %d", kind.tag, dim)
    if dim < 1:
        raise ConfigError(f"Sequence feature width must be positive, got {dim}")
    if kind.tag == "lstm":
        return LSTM(kind, dim)
    if kind.tag == "convlstm":
        return ConvLSTM(kind, dim, spatial_shape or (1, 1))
    if kind.tag == "xlstm":
        return XLSTM(kind, dim)
    if kind.tag == "transformer":
        return TransformerBlock(kind, dim)
    if kind.tag == "mamba":
        return MambaS6(kind, dim)
    raise ConfigError(f"Unknown sequential module kind: {kind.tag}")


def seq_module_forward(module: SequenceModule, seq: Tensor) -> Tensor:
    """Run ``seq[L, B, D]`` through ``module`` via its kind's functional form."""
    if isinstance(module, IdentitySequence):
        return module(seq)
    forward = _FORWARDS.get(module.kind.tag)
    if forward is None:
        raise ConfigError(f"No forward registered for kind {module.kind.tag}")
    return forward(module, seq)
