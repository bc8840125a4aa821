"""
Data pipeline: NIfTI input, preprocessing, sequence samples, TPS views, splits and synthetic cases.
"""

from .cache import decode_case, encode_case, load_case_cached, load_cached_case, save_case
from .nifti import NiftiImage, decode, encode, nifti_read, nifti_write, parse_header
from .preprocess import TARGET_SIZE, crop_background, preprocess, zscore_foreground
from .sequences import DatasetView, SequenceSample, make_sequences, shuffle_frames, tps_views
from .splits import CaseSplit, split_cases
from .synth import DEFAULT_SHAPE, synth_case, synth_generate
from .volume import MODALITIES, VolumeRecord, list_cases, load_case, load_dataset, write_case

__all__ = [
    "CaseSplit",
    "DEFAULT_SHAPE",
    "DatasetView",
    "MODALITIES",
    "NiftiImage",
    "SequenceSample",
    "TARGET_SIZE",
    "VolumeRecord",
    "crop_background",
    "decode",
    "decode_case",
    "encode",
    "encode_case",
    "list_cases",
    "load_case",
    "load_case_cached",
    "load_cached_case",
    "load_dataset",
    "make_sequences",
    "nifti_read",
    "nifti_write",
    "parse_header",
    "preprocess",
    "save_case",
    "shuffle_frames",
    "split_cases",
    "synth_case",
    "synth_generate",
    "tps_views",
    "write_case",
    "zscore_foreground",
]
