"""Binary model file.

Layout (little-endian)::

    b"BGCN" | u32 version
    | u32 n_fields, then per field: u16 name_len, name, u8 tag ('i' int64 | 'f' float64), value
    | u32 n_tensors, then per tensor: u16 name_len, name, u8 rank, u32 dims[rank], float32 payload
    | u32 CRC32 of every preceding byte

Optimizer moments are not stored; a loaded model starts with fresh moments.
"""

import math
import struct
import zlib
from dataclasses import fields

import numpy as np

from .exceptions import (
    BadMagicError,
    ChecksumError,
    ModelFileError,
    TruncatedModelError,
    UnsupportedVersionError,
)
from .model import ModelConfig, ModelParams, expected_shapes
from .tensor import Tensor

MAGIC = b"BGCN"
VERSION = 1
MAX_RANK = 8


def dumps(params, config):
    out = bytearray(MAGIC)
    out += struct.pack("<I", VERSION)
    cfg = config.to_dict()
    out += struct.pack("<I", len(cfg))
    for name, value in cfg.items():
        key = name.encode("utf-8")
        out += struct.pack("<H", len(key)) + key
        if isinstance(value, (int, np.integer)) and not isinstance(value, bool):
            out += b"i" + struct.pack("<q", int(value))
        else:
            out += b"f" + struct.pack("<d", float(value))
    out += struct.pack("<I", len(params.tensors))
    for name, t in params:
        key = name.encode("utf-8")
        out += struct.pack("<H", len(key)) + key
        out += struct.pack("<B", t.ndim) + struct.pack(f"<{t.ndim}I", *t.shape)
        out += np.ascontiguousarray(t.data, dtype="<f4").tobytes()
    out += struct.pack("<I", zlib.crc32(out) & 0xFFFFFFFF)
    return bytes(out)


def save(params, config, path):
    with open(path, "wb") as fh:
        fh.write(dumps(params, config))


class _Reader:
    def __init__(self, buf, end):
        self.buf, self.pos, self.end = buf, 0, end

    def take(self, n):
        if self.pos + n > self.end:
            raise TruncatedModelError(f"model file ends early (needed {n} bytes at offset {self.pos})")
        chunk = self.buf[self.pos : self.pos + n]
        self.pos += n
        return chunk

    def unpack(self, fmt):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))


def loads(buf):
    buf = bytes(buf)
    if len(buf) < 8:
        raise TruncatedModelError("model file too short for a header")
    if buf[:4] != MAGIC:
        raise BadMagicError(f"not a model file (magic {buf[:4]!r})")
    (version,) = struct.unpack("<I", buf[4:8])
    if version != VERSION:
        raise UnsupportedVersionError(f"model file version {version}, expected {VERSION}")

    reader = _Reader(buf, len(buf) - 4)
    reader.pos = 8
    try:
        config_values = {}
        (n_fields,) = reader.unpack("<I")
        for _ in range(n_fields):
            (klen,) = reader.unpack("<H")
            key = reader.take(klen).decode("utf-8")
            tag = reader.take(1)
            if tag == b"i":
                (config_values[key],) = reader.unpack("<q")
            elif tag == b"f":
                (config_values[key],) = reader.unpack("<d")
            else:
                raise ChecksumError(f"unknown config tag {tag!r}")
        arrays = {}
        (n_tensors,) = reader.unpack("<I")
        for _ in range(n_tensors):
            (klen,) = reader.unpack("<H")
            key = reader.take(klen).decode("utf-8")
            (rank,) = reader.unpack("<B")
            if rank > MAX_RANK:
                raise ChecksumError(f"implausible tensor rank {rank}")
            dims = reader.unpack(f"<{rank}I")
            count = math.prod(dims)
            arrays[key] = np.frombuffer(reader.take(4 * count), dtype="<f4").reshape(dims)
    except UnicodeDecodeError as err:
        raise ChecksumError(f"corrupt name field: {err}") from None
    if reader.pos != reader.end:
        raise ChecksumError("unexpected bytes before checksum")

    (stored,) = struct.unpack("<I", buf[-4:])
    if zlib.crc32(buf[:-4]) & 0xFFFFFFFF != stored:
        raise ChecksumError("CRC32 mismatch: model file is corrupted")

    known = {f.name for f in fields(ModelConfig)}
    if set(config_values) != known:
        raise ModelFileError(f"config fields {sorted(config_values)} do not match {sorted(known)}")
    config = ModelConfig(**config_values).validate()
    shapes = expected_shapes(config)
    if {k: a.shape for k, a in arrays.items()} != shapes:
        raise ModelFileError("stored tensors do not match the stored configuration")
    tensors = {}
    for name in shapes:
        t = Tensor(arrays[name].astype(np.float32), requires_grad=True)
        t.name = name
        tensors[name] = t
    return ModelParams(tensors), config


def load(path):
    with open(path, "rb") as fh:
        return loads(fh.read())
