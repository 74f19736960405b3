"""Binary checkpoint format.

Layout (little-endian)::

    b"STCK" | u32 version | 32-byte config digest | u32 len | config JSON
    u32 count | count x (u16 len | path | u8 ndim | ndim x u32 | f64 data)
    u64 checksum (blake2b-64 over everything before it)

Arrays are written in sorted-path order.
"""

from __future__ import annotations

import hashlib
import json
import struct
from pathlib import Path

import numpy as np

from .config import ModelConfig
from .params import param_shapes

MAGIC = b"STCK"
VERSION = 1


class CheckpointError(ValueError):
    pass


class ChecksumError(CheckpointError):
    pass


def _checksum(payload: bytes) -> bytes:
    return hashlib.blake2b(payload, digest_size=8).digest()


def dumps(params: dict[str, np.ndarray], config: ModelConfig) -> bytes:
    expected = param_shapes(config)
    if set(params) != set(expected):
        raise CheckpointError("parameter paths do not match the config")
    cfg_json = config.to_json().encode()
    parts = [MAGIC, struct.pack("<I", VERSION), config.digest(), struct.pack("<I", len(cfg_json)), cfg_json]
    parts.append(struct.pack("<I", len(params)))
    for path in sorted(params):
        arr = np.ascontiguousarray(params[path], dtype="<f8")
        if arr.shape != expected[path]:
            raise CheckpointError(f"{path}: shape {arr.shape} != {expected[path]}")
        key = path.encode()
        parts.append(struct.pack("<H", len(key)) + key)
        parts.append(struct.pack("<B", arr.ndim) + struct.pack(f"<{arr.ndim}I", *arr.shape))
        parts.append(arr.tobytes())
    payload = b"".join(parts)
    return payload + _checksum(payload)


def loads(blob: bytes, config: ModelConfig | None = None) -> tuple[dict[str, np.ndarray], ModelConfig]:
    if len(blob) < 8 + len(MAGIC):
        raise ChecksumError("checkpoint truncated")
    payload, tail = blob[:-8], blob[-8:]
    if blob[:4] != MAGIC:
        raise CheckpointError("not a checkpoint file (bad magic)")
    if _checksum(payload) != tail:
        raise ChecksumError("checkpoint checksum mismatch (corrupt or truncated file)")
    (version,) = struct.unpack_from("<I", payload, 4)
    if version != VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version}")
    digest = payload[8:40]
    (n,) = struct.unpack_from("<I", payload, 40)
    off = 44
    stored = ModelConfig.from_dict(json.loads(payload[off : off + n]))
    off += n
    if stored.digest() != digest:
        raise CheckpointError("config digest does not match embedded config")
    if config is not None and config.digest() != digest:
        raise CheckpointError("checkpoint was written for a different model config")
    (count,) = struct.unpack_from("<I", payload, off)
    off += 4
    params = {}
    for _ in range(count):
        (klen,) = struct.unpack_from("<H", payload, off)
        off += 2
        path = payload[off : off + klen].decode()
        off += klen
        (ndim,) = struct.unpack_from("<B", payload, off)
        off += 1
        shape = struct.unpack_from(f"<{ndim}I", payload, off)
        off += 4 * ndim
        size = int(np.prod(shape)) * 8
        params[path] = np.frombuffer(payload, dtype="<f8", count=size // 8, offset=off).reshape(shape).astype(np.float64)
        off += size
    if off != len(payload):
        raise CheckpointError("trailing bytes after parameter blobs")
    return params, stored


def save_checkpoint(params: dict[str, np.ndarray], config: ModelConfig, path: str | Path) -> None:
    Path(path).write_bytes(dumps(params, config))


def load_checkpoint(path: str | Path, config: ModelConfig | None = None) -> tuple[dict[str, np.ndarray], ModelConfig]:
    return loads(Path(path).read_bytes(), config)
