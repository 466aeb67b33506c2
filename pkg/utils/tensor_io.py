"""
Binary containers for model weights and latent tables.

PQCK layout (little-endian):
    b"PQCK" | uint32 version | uint32 meta_len | meta JSON (utf-8)
    | uint32 tensor_count | per tensor:
        uint16 name_len | name (utf-8) | uint8 ndim | ndim x uint32 dims
        | prod(dims) x float32

PQLT layout (little-endian):
    b"PQLT" | uint32 count | uint32 dim | per row:
        uint16 id_len | id (utf-8) | dim x float32
"""

import io
import json
import struct
import hashlib
from pathlib import Path
from typing import Any, Dict, Mapping, Optional, Tuple

import numpy as np
import torch

from utils.exceptions import raise_dependency_error, raise_invalid_input
from utils.logging_config import get_logger

logger = get_logger(__name__)

CHECKPOINT_MAGIC = b"PQCK"
CHECKPOINT_VERSION = 1
LATENT_MAGIC = b"PQLT"


def _tensor_table(state_dict: Mapping[str, torch.Tensor]) -> Dict[str, np.ndarray]:
    return {
        name: tensor.detach().cpu().to(torch.float32).numpy()
        for name, tensor in state_dict.items()
    }


def save_checkpoint(
    path: Path,
    state_dict: Mapping[str, torch.Tensor],
    meta: Optional[Dict[str, Any]] = None,
) -> Path:
    """
    Write a state dict (every tensor stored as float32) plus JSON metadata.

    Integer buffers such as batch-norm counters round-trip through float32
    exactly for the magnitudes training produces.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    meta_bytes = json.dumps(meta or {}, sort_keys=True).encode("utf-8")
    table = _tensor_table(state_dict)

    buf = io.BytesIO()
    buf.write(CHECKPOINT_MAGIC)
    buf.write(struct.pack("<II", CHECKPOINT_VERSION, len(meta_bytes)))
    buf.write(meta_bytes)
    buf.write(struct.pack("<I", len(table)))
    for name, array in table.items():
        name_bytes = name.encode("utf-8")
        buf.write(struct.pack("<H", len(name_bytes)))
        buf.write(name_bytes)
        buf.write(struct.pack("<B", array.ndim))
        buf.write(struct.pack(f"<{array.ndim}I", *array.shape))
        buf.write(np.ascontiguousarray(array, dtype="<f4").tobytes())

    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_bytes(buf.getvalue())
    tmp.replace(path)
    logger.debug(f"Saved checkpoint {path} ({len(table)} tensors)")
    return path


def load_checkpoint(path: Path) -> Tuple[Dict[str, torch.Tensor], Dict[str, Any]]:
    """Read a PQCK file into (float32 state dict, metadata)."""
    path = Path(path)
    if not path.exists():
        raise_dependency_error(f"Checkpoint not found: {path}")
    data = path.read_bytes()
    if data[:4] != CHECKPOINT_MAGIC:
        raise_invalid_input(f"Not a checkpoint file: {path}")

    offset = 4
    version, meta_len = struct.unpack_from("<II", data, offset)
    offset += 8
    if version != CHECKPOINT_VERSION:
        raise_invalid_input(f"Unsupported checkpoint version {version} in {path}")
    meta = json.loads(data[offset : offset + meta_len].decode("utf-8"))
    offset += meta_len
    (count,) = struct.unpack_from("<I", data, offset)
    offset += 4

    state: Dict[str, torch.Tensor] = {}
    for _ in range(count):
        (name_len,) = struct.unpack_from("<H", data, offset)
        offset += 2
        name = data[offset : offset + name_len].decode("utf-8")
        offset += name_len
        (ndim,) = struct.unpack_from("<B", data, offset)
        offset += 1
        dims = struct.unpack_from(f"<{ndim}I", data, offset)
        offset += 4 * ndim
        n = int(np.prod(dims)) if ndim else 1
        array = np.frombuffer(data, dtype="<f4", count=n, offset=offset).reshape(dims)
        offset += 4 * n
        state[name] = torch.from_numpy(array.astype(np.float32))
    return state, meta


def load_into(module: torch.nn.Module, state: Dict[str, torch.Tensor]) -> torch.nn.Module:
    """Copy a float32 table into a module, casting to each target's dtype."""
    target = module.state_dict()
    missing = set(target) - set(state)
    if missing:
        raise_invalid_input(f"Checkpoint is missing tensors: {sorted(missing)[:5]}")
    cast = {name: state[name].to(target[name].dtype) for name in target}
    module.load_state_dict(cast)
    return module


def parameter_checksum(module: torch.nn.Module) -> str:
    """SHA-256 over every tensor of the module's state dict, in key order."""
    h = hashlib.sha256()
    for name, tensor in sorted(module.state_dict().items()):
        h.update(name.encode("utf-8"))
        h.update(tensor.detach().cpu().contiguous().numpy().tobytes())
    return h.hexdigest()


def save_latent_table(path: Path, latents: Mapping[str, np.ndarray]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    rows = [(k, np.asarray(v, dtype="<f4").reshape(-1)) for k, v in latents.items()]
    dim = len(rows[0][1]) if rows else 0
    buf = io.BytesIO()
    buf.write(LATENT_MAGIC)
    buf.write(struct.pack("<II", len(rows), dim))
    for shape_id, vector in rows:
        if len(vector) != dim:
            raise_invalid_input(f"Latent {shape_id} has length {len(vector)}, expected {dim}")
        id_bytes = shape_id.encode("utf-8")
        buf.write(struct.pack("<H", len(id_bytes)))
        buf.write(id_bytes)
        buf.write(vector.tobytes())
    path.write_bytes(buf.getvalue())
    return path


def load_latent_table(path: Path) -> Dict[str, np.ndarray]:
    path = Path(path)
    if not path.exists():
        raise_dependency_error(f"Latent table not found: {path}")
    data = path.read_bytes()
    if data[:4] != LATENT_MAGIC:
        raise_invalid_input(f"Not a latent table: {path}")
    count, dim = struct.unpack_from("<II", data, 4)
    offset = 12
    table: Dict[str, np.ndarray] = {}
    for _ in range(count):
        (id_len,) = struct.unpack_from("<H", data, offset)
        offset += 2
        shape_id = data[offset : offset + id_len].decode("utf-8")
        offset += id_len
        table[shape_id] = np.frombuffer(data, dtype="<f4", count=dim, offset=offset).copy()
        offset += 4 * dim
    return table
