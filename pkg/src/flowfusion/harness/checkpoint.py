"""Versioned flat binary checkpoints.

Layout (little-endian)::

    b"FLSH"  u32 version
    u32 meta_len   meta_len bytes of UTF-8 JSON (config, optimizer step, RNG state)
    u32 count      then per tensor:
        u32 name_len, name (UTF-8), u32 rank, rank x u32 extents,
        prod(extents) x f64 values

Tensor names are ``param/<name>``, ``adam.m/<name>`` and ``adam.v/<name>``.
"""

from __future__ import annotations

import json
import os
import struct
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

MAGIC = b"FLSH"
FORMAT_VERSION = 1


class CheckpointError(ValueError):
    pass


@dataclass
class Checkpoint:
    params: dict[str, np.ndarray]
    adam_m: dict[str, np.ndarray] = field(default_factory=dict)
    adam_v: dict[str, np.ndarray] = field(default_factory=dict)
    adam_step: int = 0
    rng_state: dict | None = None
    config: dict = field(default_factory=dict)
    version: int = FORMAT_VERSION

    def tensors(self) -> dict[str, np.ndarray]:
        out = {f"param/{k}": v for k, v in self.params.items()}
        out.update({f"adam.m/{k}": v for k, v in self.adam_m.items()})
        out.update({f"adam.v/{k}": v for k, v in self.adam_v.items()})
        return out


def encode(ckpt: Checkpoint) -> bytes:
    meta = json.dumps({"adam_step": ckpt.adam_step, "rng_state": ckpt.rng_state,
                       "config": ckpt.config}, sort_keys=True).encode()
    tensors = ckpt.tensors()
    parts = [MAGIC, struct.pack("<II", ckpt.version, len(meta)), meta, struct.pack("<I", len(tensors))]
    for name, value in tensors.items():
        arr = np.asarray(value, dtype="<f8")  # keeps 0-d scalars 0-d
        raw = name.encode()
        parts.append(struct.pack("<I", len(raw)) + raw)
        parts.append(struct.pack(f"<I{arr.ndim}I", arr.ndim, *arr.shape))
        parts.append(arr.tobytes(order="C"))
    return b"".join(parts)


def decode(blob: bytes) -> Checkpoint:
    if blob[:4] != MAGIC:
        raise CheckpointError("not a checkpoint (bad magic bytes)")
    pos = 4

    def take(fmt: str):
        nonlocal pos
        size = struct.calcsize(fmt)
        if pos + size > len(blob):
            raise CheckpointError("truncated checkpoint")
        vals = struct.unpack_from(fmt, blob, pos)
        pos += size
        return vals

    version, meta_len = take("<II")
    if version != FORMAT_VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version}")
    meta = json.loads(blob[pos:pos + meta_len].decode())
    pos += meta_len
    (count,) = take("<I")
    groups: dict[str, dict[str, np.ndarray]] = {"param": {}, "adam.m": {}, "adam.v": {}}
    for _ in range(count):
        (name_len,) = take("<I")
        name = blob[pos:pos + name_len].decode()
        pos += name_len
        (rank,) = take("<I")
        shape = take(f"<{rank}I") if rank else ()
        n = int(np.prod(shape)) if rank else 1
        if pos + 8 * n > len(blob):
            raise CheckpointError("truncated checkpoint")
        arr = np.frombuffer(blob, dtype="<f8", count=n, offset=pos).reshape(shape).astype(np.float64)
        pos += 8 * n
        kind, _, key = name.partition("/")
        if kind not in groups:
            raise CheckpointError(f"unknown tensor kind in {name!r}")
        groups[kind][key] = arr
    return Checkpoint(groups["param"], groups["adam.m"], groups["adam.v"], meta["adam_step"],
                      meta["rng_state"], meta["config"], version)


def atomic_write(path, data: bytes | str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data.encode() if isinstance(data, str) else data)
        os.replace(tmp, path)
    except BaseException:
        os.unlink(tmp)
        raise


def save(path, ckpt: Checkpoint) -> None:
    atomic_write(path, encode(ckpt))


def load(path) -> Checkpoint:
    return decode(Path(path).read_bytes())
