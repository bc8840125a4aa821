"""
Checkpoint container.

Layout: magic ``MCKP``, little-endian u16 version, u32 header length, the
header as canonical JSON (config, step and the parameter table), then each
parameter's raw little-endian buffer in sorted path order.
"""

import json
import logging
import struct
from pathlib import Path
from typing import Dict, Tuple, Union

import numpy as np
from pydantic import ValidationError

from ..utils import canonical_json
from ..utils.errors import ConfigError, DataError
from .mnet import MNet, MNetConfig, ModelState

logger = logging.getLogger(__name__)

MAGIC = b"MCKP"
VERSION = 1
_PREFIX = struct.Struct("<4sHI")


def encode_checkpoint(state: ModelState) -> bytes:
    params = state.parameters()
    table = []
    buffers = []
    for path in sorted(params):
        arr = np.require(params[path], requirements="C")
        le = arr.astype(arr.dtype.newbyteorder("<"), copy=False)
        table.append({"path": path, "shape": list(arr.shape), "dtype": le.dtype.str})
        buffers.append(le.tobytes())
    header = canonical_json({
        "config": state.config.model_dump(mode="json"),
        "step": state.step,
        "params": table,
    }).encode("utf-8")
    return _PREFIX.pack(MAGIC, VERSION, len(header)) + header + b"".join(buffers)


def decode_checkpoint(blob: bytes) -> Tuple[MNetConfig, int, Dict[str, np.ndarray]]:
    if len(blob) < _PREFIX.size:
        raise DataError("Checkpoint is shorter than its header")
    magic, version, header_len = _PREFIX.unpack_from(blob)
    if magic != MAGIC:
        raise DataError("Not a meshcast checkpoint (bad magic)")
    if version != VERSION:
        raise DataError(f"Unsupported checkpoint version {version}")
    start = _PREFIX.size
    try:
        header = json.loads(blob[start:start + header_len].decode("utf-8"))
        config = MNetConfig.model_validate(header["config"])
    except (ValueError, KeyError, ValidationError) as e:
        raise DataError(f"Corrupt checkpoint header: {e}") from e

    offset = start + header_len
    params: Dict[str, np.ndarray] = {}
    for entry in header["params"]:
        dtype = np.dtype(entry["dtype"])
        count = int(np.prod(entry["shape"], dtype=np.int64))
        end = offset + count * dtype.itemsize
        if end > len(blob):
            raise DataError(f"Checkpoint truncated inside parameter {entry['path']}")
        params[entry["path"]] = np.frombuffer(blob, dtype=dtype, count=count, offset=offset).reshape(entry["shape"])
        offset = end
    return config, int(header["step"]), params


def save_checkpoint(state: ModelState, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(encode_checkpoint(state))
    logger.debug("Wrote checkpoint %s (step %d)", path, state.step)
    return path


def load_checkpoint(path: Union[str, Path]) -> ModelState:
    """Rebuild the network from a checkpoint file."""
    path = Path(path)
    try:
        blob = path.read_bytes()
    except OSError as e:
        raise DataError(f"Cannot read checkpoint {path}: {e}") from e
    config, step, params = decode_checkpoint(blob)
    network = MNet(config)
    try:
        network.load_state_dict(params)
    except ConfigError as e:
        raise DataError(f"Checkpoint {path} does not match its config: {e}") from e
    return ModelState(config=config, network=network, step=step)


def state_from_arrays(config: MNetConfig, params: Dict[str, np.ndarray], step: int = 0) -> ModelState:
    network = MNet(config)
    network.load_state_dict(params)
    return ModelState(config=config, network=network, step=step)
