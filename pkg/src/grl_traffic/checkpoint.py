"""Binary checkpoint container.

Layout (all integers little-endian)::

    b"GCAVCKPT"            magic
    u32                    format version
    str                    algorithm id
    str                    encoder id
    u32                    record count
    record*                name: str, ndim: u32, dims: u32*ndim, values: f64*prod(dims)

``str`` is a u32 byte length followed by UTF-8 bytes.  Values are row-major.
"""

from __future__ import annotations

import io
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

MAGIC = b"GCAVCKPT"
FORMAT_VERSION = 1


class CheckpointError(ValueError):
    pass


@dataclass
class Checkpoint:
    algorithm: str
    encoder: str
    params: dict[str, np.ndarray] = field(default_factory=dict)
    format_version: int = FORMAT_VERSION


def _write_str(buf: io.BytesIO, s: str) -> None:
    raw = s.encode("utf-8")
    buf.write(struct.pack("<I", len(raw)))
    buf.write(raw)


def _read_exact(buf: io.BytesIO, n: int) -> bytes:
    raw = buf.read(n)
    if len(raw) != n:
        raise CheckpointError("truncated checkpoint")
    return raw


def _read_u32(buf: io.BytesIO) -> int:
    return struct.unpack("<I", _read_exact(buf, 4))[0]


def _read_str(buf: io.BytesIO) -> str:
    return _read_exact(buf, _read_u32(buf)).decode("utf-8")


def dumps(ckpt: Checkpoint) -> bytes:
    buf = io.BytesIO()
    buf.write(MAGIC)
    buf.write(struct.pack("<I", ckpt.format_version))
    _write_str(buf, ckpt.algorithm)
    _write_str(buf, ckpt.encoder)
    buf.write(struct.pack("<I", len(ckpt.params)))
    for name in sorted(ckpt.params):
        arr = np.ascontiguousarray(ckpt.params[name], dtype="<f8")
        _write_str(buf, name)
        buf.write(struct.pack("<I", arr.ndim))
        buf.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
        buf.write(arr.tobytes(order="C"))
    return buf.getvalue()


def loads(raw: bytes) -> Checkpoint:
    buf = io.BytesIO(raw)
    if _read_exact(buf, len(MAGIC)) != MAGIC:
        raise CheckpointError("not a checkpoint file (bad magic)")
    version = _read_u32(buf)
    if version != FORMAT_VERSION:
        raise CheckpointError(f"unsupported checkpoint format version {version}")
    algorithm = _read_str(buf)
    encoder = _read_str(buf)
    params = {}
    for _ in range(_read_u32(buf)):
        name = _read_str(buf)
        ndim = _read_u32(buf)
        shape = struct.unpack(f"<{ndim}I", _read_exact(buf, 4 * ndim)) if ndim else ()
        count = int(np.prod(shape)) if ndim else 1
        values = np.frombuffer(_read_exact(buf, 8 * count), dtype="<f8")
        params[name] = values.reshape(shape).astype(np.float64)
    return Checkpoint(algorithm, encoder, params, version)


def save(path: str | Path, ckpt: Checkpoint) -> None:
    Path(path).write_bytes(dumps(ckpt))


def load(path: str | Path) -> Checkpoint:
    return loads(Path(path).read_bytes())
