"""
M-Net model: cross-scan, Mesh-Cast, the encoder-decoder, FLOP counts and checkpoints.
"""

from .checkpoint import decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint, state_from_arrays
from .cross_scan import DIRECTIONS, DirectionalScans, cross_merge, cross_scan, merge_frames, scan_frames
from .flops import FlopReport, conv_flops, flops_estimate, matmul_flops, sequence_flops
from .mesh_cast import (
    LayerAttention,
    MeshCastLayer,
    MeshCastStack,
    flatten_temporal,
    layer_attention_aggregate,
    mesh_cast_backward,
    mesh_cast_forward,
    mesh_cast_layer_forward,
    unflatten_temporal,
)
from .mnet import (
    MNet,
    MNetConfig,
    ModelState,
    PatchDownsample,
    PatchUpsample,
    Stage,
    VisionSequentialModule,
    build_model,
    channel_to_space,
    check_geometry,
    mnet_forward,
    patch_downsample,
    patch_upsample,
    space_to_channel,
)

__all__ = [
    "DIRECTIONS",
    "DirectionalScans",
    "FlopReport",
    "LayerAttention",
    "MNet",
    "MNetConfig",
    "MeshCastLayer",
    "MeshCastStack",
    "ModelState",
    "PatchDownsample",
    "PatchUpsample",
    "Stage",
    "VisionSequentialModule",
    "build_model",
    "channel_to_space",
    "check_geometry",
    "conv_flops",
    "cross_merge",
    "cross_scan",
    "decode_checkpoint",
    "encode_checkpoint",
    "flatten_temporal",
    "flops_estimate",
    "layer_attention_aggregate",
    "load_checkpoint",
    "matmul_flops",
    "merge_frames",
    "mesh_cast_backward",
    "mesh_cast_forward",
    "mesh_cast_layer_forward",
    "mnet_forward",
    "patch_downsample",
    "patch_upsample",
    "save_checkpoint",
    "scan_frames",
    "sequence_flops",
    "space_to_channel",
    "state_from_arrays",
    "unflatten_temporal",
]
