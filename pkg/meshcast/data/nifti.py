"""
NIfTI-1 single-file (.nii / .nii.gz) reader and writer.

The 348-byte header is decoded with a numpy structured dtype. Byte order is
detected from ``sizeof_hdr``: a file whose first int32 reads 348 only after
byte-swapping is big-endian. Voxels are stored x-fastest, so a volume with
``dim = [3, X, Y, Z]`` is returned as an array indexed ``[z, y, x]``.
A non-identity ``scl_slope`` / ``scl_inter`` pair (slope 0 means unscaled)
turns stored values into float32 ``value * slope + inter``; written files
always carry slope 1 and intercept 0.
"""

import gzip
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Optional, Sequence, Tuple, Union

import numpy as np

from ..utils.errors import NiftiDatatypeError, NiftiMagicError, NiftiTruncatedError

logger = logging.getLogger(__name__)

HEADER_SIZE = 348
DEFAULT_VOX_OFFSET = 352

HEADER_FIELDS = [
    ("sizeof_hdr", "i4"),
    ("data_type", "S10"),
    ("db_name", "S18"),
    ("extents", "i4"),
    ("session_error", "i2"),
    ("regular", "S1"),
    ("dim_info", "u1"),
    ("dim", "i2", (8,)),
    ("intent_p1", "f4"),
    ("intent_p2", "f4"),
    ("intent_p3", "f4"),
    ("intent_code", "i2"),
    ("datatype", "i2"),
    ("bitpix", "i2"),
    ("slice_start", "i2"),
    ("pixdim", "f4", (8,)),
    ("vox_offset", "f4"),
    ("scl_slope", "f4"),
    ("scl_inter", "f4"),
    ("slice_end", "i2"),
    ("slice_code", "u1"),
    ("xyzt_units", "u1"),
    ("cal_max", "f4"),
    ("cal_min", "f4"),
    ("slice_duration", "f4"),
    ("toffset", "f4"),
    ("glmax", "i4"),
    ("glmin", "i4"),
    ("descrip", "S80"),
    ("aux_file", "S24"),
    ("qform_code", "i2"),
    ("sform_code", "i2"),
    ("quatern_b", "f4"),
    ("quatern_c", "f4"),
    ("quatern_d", "f4"),
    ("qoffset_x", "f4"),
    ("qoffset_y", "f4"),
    ("qoffset_z", "f4"),
    ("srow_x", "f4", (4,)),
    ("srow_y", "f4", (4,)),
    ("srow_z", "f4", (4,)),
    ("intent_name", "S16"),
    ("magic", "S4"),
]

HEADER_DTYPE = np.dtype(HEADER_FIELDS)
assert HEADER_DTYPE.itemsize == HEADER_SIZE

# datatype code -> (numpy type, bits per voxel)
DATATYPES: Dict[int, Tuple[str, int]] = {
    2: ("u1", 8),
    4: ("i2", 16),
    16: ("f4", 32),
}
CODES = {np.dtype(kind).str[1:]: code for code, (kind, _) in DATATYPES.items()}


@dataclass
class NiftiImage:
    """Decoded volume and the header fields meshcast uses.

    Attributes:
        data: Voxels indexed ``[z, y, x]`` (rank follows ``dim[0]``, reversed)
        spacing: Voxel size per data axis, in the same order as ``data``
        header: Full decoded header record, kept for rewriting geometry
        endian: ``"<"`` or ``">"`` as found on disk
    """

    data: np.ndarray
    spacing: Tuple[float, ...]
    header: np.ndarray
    endian: str = "<"

    @property
    def datatype(self) -> int:
        return int(self.header["datatype"])


def _open_bytes(path: Path) -> bytes:
    raw = path.read_bytes()
    if raw[:2] == b"\x1f\x8b":
        try:
            return gzip.decompress(raw)
        except (OSError, EOFError) as e:
            raise NiftiTruncatedError(f"{path}: damaged gzip stream: {e}") from e
    return raw


def parse_header(blob: bytes, source: str = "<bytes>") -> Tuple[np.ndarray, str]:
    """Decode the header and detect byte order; returns ``(header, endian)``."""
    if len(blob) < HEADER_SIZE:
        raise NiftiTruncatedError(f"{source}: {len(blob)} bytes is shorter than a NIfTI-1 header")
    for endian in ("<", ">"):
        header = np.frombuffer(blob[:HEADER_SIZE], dtype=HEADER_DTYPE.newbyteorder(endian))[0]
        if int(header["sizeof_hdr"]) == HEADER_SIZE:
            break
    else:
        raise NiftiMagicError(f"{source}: sizeof_hdr is not {HEADER_SIZE} in either byte order")
    if bytes(header["magic"]) not in (b"n+1", b"ni1"):
        raise NiftiMagicError(f"{source}: bad magic {bytes(header['magic'])!r}")
    return header, endian


def decode(blob: bytes, source: str = "<bytes>") -> NiftiImage:
    header, endian = parse_header(blob, source)
    code = int(header["datatype"])
    if code not in DATATYPES:
        raise NiftiDatatypeError(f"{source}: unsupported datatype code {code}")
    rank = int(header["dim"][0])
    if not 1 <= rank <= 7:
        raise NiftiMagicError(f"{source}: invalid dim[0] = {rank}")
    shape = tuple(int(n) for n in header["dim"][1:rank + 1])
    if any(n < 1 for n in shape):
        raise NiftiMagicError(f"{source}: non-positive extent in dim {list(shape)}")

    dtype = np.dtype(endian + DATATYPES[code][0])
    offset = int(header["vox_offset"]) or DEFAULT_VOX_OFFSET
    count = int(np.prod(shape, dtype=np.int64))
    end = offset + count * dtype.itemsize
    if end > len(blob):
        raise NiftiTruncatedError(f"{source}: payload needs {end} bytes, file has {len(blob)}")

    data = np.frombuffer(blob, dtype=dtype, count=count, offset=offset)
    data = data.reshape(shape[::-1]).astype(dtype.newbyteorder("="))
    spacing = tuple(float(s) for s in header["pixdim"][1:rank + 1])[::-1]
    slope, inter = float(header["scl_slope"]), float(header["scl_inter"])
    if slope != 0.0 and (slope, inter) != (1.0, 0.0):
        data = data.astype(np.float32) * np.float32(slope) + np.float32(inter)
    return NiftiImage(data=data, spacing=spacing, header=header.copy(), endian=endian)


def nifti_read(path: Union[str, Path]) -> NiftiImage:
    """Read a ``.nii`` or ``.nii.gz`` file.

    Raises:
        NiftiMagicError: Not a NIfTI-1 single file
        NiftiDatatypeError: Voxel type other than uint8, int16 or float32
        NiftiTruncatedError: Header or payload cut short
    """
    path = Path(path)
    return decode(_open_bytes(path), str(path))


def encode(data: np.ndarray, spacing: Optional[Sequence[float]] = None,
           template: Optional[np.ndarray] = None, endian: str = "<") -> bytes:
    """Serialize ``data`` (indexed ``[z, y, x]``) as a single-file NIfTI-1."""
    data = np.asarray(data)
    key = data.dtype.str[1:]
    if key not in CODES:
        raise NiftiDatatypeError(f"Cannot write voxel type {data.dtype}")
    if endian not in ("<", ">"):
        raise ValueError(f"endian must be '<' or '>', got {endian}")
    code = CODES[key]
    rank = data.ndim
    spacing = tuple(spacing) if spacing is not None else (1.0,) * rank

    header = np.zeros((), dtype=HEADER_DTYPE)
    if template is not None:
        header[()] = np.asarray(template).astype(HEADER_DTYPE)
    header["sizeof_hdr"] = HEADER_SIZE
    dim = np.ones(8, dtype=np.int16)
    dim[0] = rank
    dim[1:rank + 1] = data.shape[::-1]
    header["dim"] = dim
    header["datatype"] = code
    header["bitpix"] = DATATYPES[code][1]
    pixdim = np.array(header["pixdim"], dtype=np.float32)
    pixdim[0] = pixdim[0] if pixdim[0] in (-1.0, 1.0) else 1.0
    pixdim[1:rank + 1] = spacing[::-1]
    header["pixdim"] = pixdim
    header["vox_offset"] = DEFAULT_VOX_OFFSET
    header["scl_slope"] = 1.0
    header["scl_inter"] = 0.0
    header["magic"] = b"n+1"

    head = header.astype(HEADER_DTYPE.newbyteorder(endian)).tobytes()
    payload = data.astype(data.dtype.newbyteorder(endian)).tobytes()
    return head + b"\x00" * (DEFAULT_VOX_OFFSET - HEADER_SIZE) + payload


def nifti_write(path: Union[str, Path], data: np.ndarray, spacing: Optional[Sequence[float]] = None,
                template: Optional[np.ndarray] = None, endian: str = "<") -> Path:
    """Write ``data``; a ``.gz`` suffix selects gzip compression.

    ``template`` copies the geometry fields of an existing header (affines,
    units, description); dimensions, datatype and spacing come from the
    arguments.
    """
    path = Path(path)
    blob = encode(data, spacing, template, endian)
    if path.suffix == ".gz":
        blob = gzip.compress(blob, mtime=0)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(blob)
    logger.debug("Wrote %s %s", path, list(data.shape))
    return path
