import struct
import zlib

import numpy as np
import pytest

from bigrucnn import model as M
from bigrucnn import serialization as S
from bigrucnn.exceptions import (
    BadMagicError,
    ChecksumError,
    ModelFileError,
    TruncatedModelError,
    UnsupportedVersionError,
)

from .helpers import TINY


def tiny_model(seed=5):
    cfg = M.ModelConfig(seed=seed, **TINY)
    return M.build(cfg), cfg


def structural_offsets(buf):
    """Walk the layout independently; return offsets of count/length/tag/dim bytes."""
    out = set(range(8, 12))
    pos = 12
    (n_fields,) = struct.unpack_from("<I", buf, 8)
    for _ in range(n_fields):
        (klen,) = struct.unpack_from("<H", buf, pos)
        out.update(range(pos, pos + 2))
        pos += 2 + klen
        out.add(pos)
        pos += 1 + 8
    (n_tensors,) = struct.unpack_from("<I", buf, pos)
    out.update(range(pos, pos + 4))
    pos += 4
    for _ in range(n_tensors):
        (klen,) = struct.unpack_from("<H", buf, pos)
        out.update(range(pos, pos + 2))
        pos += 2 + klen
        rank = buf[pos]
        dims = struct.unpack_from(f"<{rank}I", buf, pos + 1)
        out.update(range(pos, pos + 1 + 4 * rank))
        pos += 1 + 4 * rank + 4 * int(np.prod(dims))
    assert pos == len(buf) - 4
    return out


def test_layout_header_and_crc():
    params, cfg = tiny_model()
    buf = S.dumps(params, cfg)
    assert buf[:4] == b"BGCN"
    assert struct.unpack("<I", buf[4:8]) == (1,)
    assert struct.unpack("<I", buf[-4:])[0] == zlib.crc32(buf[:-4])
    n_floats = sum(t.size for _, t in params)
    assert len(buf) > 4 * n_floats


def test_round_trip_is_bit_exact(tmp_path):
    params, cfg = tiny_model()
    path = tmp_path / "m.bgcn"
    S.save(params, cfg, path)
    loaded, cfg2 = S.load(path)
    assert cfg2 == cfg
    for name, t in params:
        assert loaded[name].data.tobytes() == t.data.tobytes()
    S.save(loaded, cfg2, tmp_path / "again.bgcn")
    assert (tmp_path / "again.bgcn").read_bytes() == path.read_bytes()


def test_round_trip_preserves_predictions():
    params, cfg = tiny_model()
    loaded, cfg2 = S.loads(S.dumps(params, cfg))
    ids = np.random.default_rng(0).integers(0, 20, size=(100, 6))
    assert (M.predict_proba_ids(loaded, cfg2, ids) == M.predict_proba_ids(params, cfg, ids)).all()


def flip(buf, i):
    b = bytearray(buf)
    b[i] ^= 0xFF
    return bytes(b)


def test_header_errors_are_distinct():
    buf = S.dumps(*tiny_model())
    with pytest.raises(BadMagicError):
        S.loads(b"XXXX" + buf[4:])
    with pytest.raises(UnsupportedVersionError):
        S.loads(buf[:4] + struct.pack("<I", 2) + buf[8:])
    for cut in (0, 5, 40, len(buf) // 2, len(buf) - 5):
        with pytest.raises(TruncatedModelError):
            S.loads(buf[:cut])


def test_every_single_byte_corruption_is_detected():
    buf = S.dumps(*tiny_model())
    structural = structural_offsets(buf)
    for i in range(len(buf)):
        with pytest.raises(ModelFileError) as err:
            S.loads(flip(buf, i))
        if i < 4:
            assert err.type is BadMagicError
        elif i < 8:
            assert err.type is UnsupportedVersionError
        elif i not in structural:
            assert err.type is ChecksumError, f"offset {i}: {err.type.__name__}"


def test_mismatched_config_rejected():
    params, cfg = tiny_model()
    other = M.ModelConfig(**{**TINY, "vocab_size": 21})
    body = S.dumps(params, other)[:-4]
    with pytest.raises(ModelFileError):
        S.loads(body + struct.pack("<I", zlib.crc32(body)))
