"""Versioned binary checkpoint for ``ModelParams``.

Layout: magic, u32 format version, u32 header length, UTF-8 JSON header
(config, seed, meta, tensor names and shapes), raw float64 little-endian
tensors in header order, u32 CRC-32 of every preceding byte.
"""

from __future__ import annotations

import json
import struct
import zlib
from pathlib import Path

import numpy as np
import torch

from .errors import CheckpointError
from .scorer import DTYPE, ModelConfig, ModelParams, param_shapes

MAGIC = b"BRMCKPT\x00"
FORMAT_VERSION = 1


def dumps_params(params: ModelParams) -> bytes:
    header = {
        "config": params.config.to_dict(),
        "seed": params.seed,
        "meta": params.meta,
        "tensors": [[name, list(t.shape)] for name, t in params.tensors.items()],
    }
    hbytes = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    parts = [MAGIC, struct.pack("<II", FORMAT_VERSION, len(hbytes)), hbytes]
    for t in params.tensors.values():
        parts.append(np.ascontiguousarray(t.detach().numpy(), dtype="<f8").tobytes())
    body = b"".join(parts)
    return body + struct.pack("<I", zlib.crc32(body) & 0xFFFFFFFF)


def loads_params(data: bytes) -> ModelParams:
    if len(data) < len(MAGIC) + 12 or not data.startswith(MAGIC):
        raise CheckpointError("not a model checkpoint")
    body, (crc,) = data[:-4], struct.unpack("<I", data[-4:])
    if zlib.crc32(body) & 0xFFFFFFFF != crc:
        raise CheckpointError("checksum mismatch")
    version, hlen = struct.unpack_from("<II", body, len(MAGIC))
    if version != FORMAT_VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version}")
    start = len(MAGIC) + 8
    try:
        header = json.loads(body[start:start + hlen].decode("utf-8"))
        config = ModelConfig(**header["config"])
    except (ValueError, TypeError, KeyError) as exc:
        raise CheckpointError(f"bad checkpoint header: {exc}") from None
    expected = param_shapes(config)
    listed = {name: tuple(shape) for name, shape in header["tensors"]}
    if listed != expected:
        raise CheckpointError("tensor table does not match the configuration")
    pos = start + hlen
    tensors = {}
    for name, shape in header["tensors"]:
        n = int(np.prod(shape)) if shape else 1
        chunk = body[pos:pos + 8 * n]
        if len(chunk) != 8 * n:
            raise CheckpointError("truncated checkpoint")
        arr = np.frombuffer(chunk, dtype="<f8").reshape(shape).astype(np.float64)
        tensors[name] = torch.tensor(arr, dtype=DTYPE)
        pos += 8 * n
    if pos != len(body):
        raise CheckpointError("trailing bytes in checkpoint")
    return ModelParams(config, tensors, int(header.get("seed", 0)), header.get("meta", {}))


def save_params(params: ModelParams, path: str | Path) -> None:
    Path(path).write_bytes(dumps_params(params))


def load_params(path: str | Path) -> ModelParams:
    try:
        data = Path(path).read_bytes()
    except OSError as exc:
        raise CheckpointError(f"cannot read {path}: {exc}") from None
    return loads_params(data)
