"""
Interchangeable sequential modules mapping ``[L, B, D]`` to ``[L, B, D]``.
"""

from .base import IdentitySequence, SeqModuleKind, SequenceModule, check_sequence
from .convlstm import ConvLSTM, ConvLSTMParams, conv_lstm_forward
from .dispatch import build_sequence_module, seq_module_forward
from .lstm import LSTM, LSTMParams, lstm_forward
from .mamba import MambaS6, S6Params, s6_selective_scan
from .transformer import TransformerBlock, TransformerParams, transformer_block_forward
from .xlstm import XLSTM, MLSTMParams, SLSTMParams, mlstm_forward, slstm_forward, xlstm_forward

__all__ = [
    "ConvLSTM",
    "ConvLSTMParams",
    "IdentitySequence",
    "LSTM",
    "LSTMParams",
    "MLSTMParams",
    "MambaS6",
    "S6Params",
    "SLSTMParams",
    "SeqModuleKind",
    "SequenceModule",
    "TransformerBlock",
    "TransformerParams",
    "XLSTM",
    "build_sequence_module",
    "check_sequence",
    "conv_lstm_forward",
    "lstm_forward",
    "mlstm_forward",
    "s6_selective_scan",
    "seq_module_forward",
    "slstm_forward",
    "transformer_block_forward",
    "xlstm_forward",
]
