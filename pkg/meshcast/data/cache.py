"""
Per-case binary cache of loaded volumes.

Layout: magic ``MCVC``, u16 version, u32 header length, canonical JSON
header, little-endian float32 modalities, uint8 labels, then the source
NIfTI header (348 bytes, little-endian) when the record carried one.
"""

import json
import logging
import struct
from pathlib import Path
from typing import Dict, List, Optional, Tuple, Union

import numpy as np

from ..utils import canonical_json
from ..utils.errors import DataError
from .nifti import HEADER_DTYPE, HEADER_SIZE
from .volume import MODALITIES, VolumeRecord, load_case

logger = logging.getLogger(__name__)

MAGIC = b"MCVC"
VERSION = 2
_PREFIX = struct.Struct("<4sHI")
_NIFTI_HEADER = HEADER_DTYPE.newbyteorder("<")


def remap_key(label_remap: Optional[Dict[int, int]]) -> List[List[int]]:
    return sorted([int(src), int(dst)] for src, dst in (label_remap or {}).items())


def encode_case(record: VolumeRecord, label_remap: Optional[Dict[int, int]] = None) -> bytes:
    header = canonical_json({
        "case_id": record.case_id,
        "shape": list(record.shape),
        "spacing": list(record.spacing),
        "cropped": record.cropped,
        "normalized": record.normalized,
        "degenerate": list(record.degenerate),
        "label_remap": remap_key(label_remap),
        "nifti_header": record.header is not None,
    }).encode("utf-8")
    modalities = np.ascontiguousarray(record.modalities, dtype="<f4").tobytes()
    labels = np.ascontiguousarray(record.labels, dtype=np.uint8).tobytes()
    nifti = np.asarray(record.header).astype(_NIFTI_HEADER).tobytes() if record.header is not None else b""
    return _PREFIX.pack(MAGIC, VERSION, len(header)) + header + modalities + labels + nifti


def read_header(blob: bytes) -> Tuple[dict, int]:
    """Decode the JSON header; returns it with the offset of the voxel payload."""
    if len(blob) < _PREFIX.size:
        raise DataError("Case cache is shorter than its header")
    magic, version, header_len = _PREFIX.unpack_from(blob)
    if magic != MAGIC or version != VERSION:
        raise DataError(f"Not a version-{VERSION} case cache")
    offset = _PREFIX.size + header_len
    try:
        header = json.loads(blob[_PREFIX.size:offset].decode("utf-8"))
        header["shape"] = tuple(int(n) for n in header["shape"])
    except (ValueError, KeyError) as e:
        raise DataError(f"Corrupt case cache header: {e}") from e
    return header, offset


def decode_case(blob: bytes) -> VolumeRecord:
    header, offset = read_header(blob)
    shape = header["shape"]
    voxels = int(np.prod(shape))
    labels_at = offset + voxels * 4 * len(MODALITIES)
    nifti_at = labels_at + voxels
    needed = nifti_at + (HEADER_SIZE if header.get("nifti_header") else 0)
    if len(blob) != needed:
        raise DataError(f"Case cache for {header.get('case_id')} has {len(blob)} bytes, expected {needed}")
    modalities = np.frombuffer(blob, dtype="<f4", count=voxels * len(MODALITIES), offset=offset)
    labels = np.frombuffer(blob, dtype=np.uint8, count=voxels, offset=labels_at)
    nifti = None
    if header.get("nifti_header"):
        nifti = np.frombuffer(blob, dtype=_NIFTI_HEADER, count=1, offset=nifti_at)[0].copy()
    return VolumeRecord(
        case_id=header["case_id"],
        modalities=modalities.reshape((len(MODALITIES),) + shape).astype(np.float32),
        labels=labels.reshape(shape).copy(),
        spacing=tuple(header["spacing"]),
        cropped=header["cropped"],
        normalized=header["normalized"],
        degenerate=tuple(header["degenerate"]),
        header=nifti,
    )


def cache_path(cache_dir: Union[str, Path], case_id: str) -> Path:
    return Path(cache_dir) / f"{case_id}.mcvc"


def save_case(record: VolumeRecord, cache_dir: Union[str, Path],
              label_remap: Optional[Dict[int, int]] = None) -> Path:
    path = cache_path(cache_dir, record.case_id)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(encode_case(record, label_remap))
    return path


def load_cached_case(cache_dir: Union[str, Path], case_id: str) -> VolumeRecord:
    path = cache_path(cache_dir, case_id)
    try:
        blob = path.read_bytes()
    except OSError as e:
        raise DataError(f"Cannot read case cache {path}: {e}") from e
    logger.debug("Loaded cached case %s", case_id)
    return decode_case(blob)


def load_case_cached(case_dir: Union[str, Path], cache_dir: Union[str, Path],
                     label_remap: Optional[Dict[int, int]] = None) -> VolumeRecord:
    """Serve a case from ``cache_dir`` when a matching entry exists, else load and cache it.

    An entry built under a different ``label_remap``, or one that fails to
    decode, is rebuilt from the case directory.
    """
    case_dir = Path(case_dir)
    path = cache_path(cache_dir, case_dir.name)
    if path.exists():
        try:
            blob = path.read_bytes()
            if read_header(blob)[0].get("label_remap") == remap_key(label_remap):
                logger.debug("Case %s served from %s", case_dir.name, path)
                return decode_case(blob)
            logger.info("Case cache %s was built with another label remap; rebuilding", path)
        except (OSError, DataError) as e:
            logger.warning("Ignoring unreadable case cache %s: %s", path, e)
    record = load_case(case_dir, label_remap)
    save_case(record, cache_dir, label_remap)
    return record
