import struct

import numpy as np
import pytest

from buqo.cnn import random_weights, zero_weights
from buqo.errors import FormatError
from buqo.gdnw import load_weights, save_weights


def test_round_trip_is_byte_identical(tmp_path):
    w = random_weights(width=8, seed=1)
    p1 = tmp_path / "a.gdnw"
    p2 = tmp_path / "b.gdnw"
    save_weights(w, p1)
    save_weights(load_weights(p1), p2)
    assert p1.read_bytes() == p2.read_bytes()


def test_loaded_weights_match(tmp_path):
    w = random_weights(width=8, seed=2)
    path = tmp_path / "w.gdnw"
    save_weights(w, path)
    loaded = load_weights(path)
    assert loaded.leaky_slope == pytest.approx(w.leaky_slope)
    for a, b in zip(w.layers, loaded.layers):
        assert np.array_equal(a.weight, b.weight)
        assert np.array_equal(a.bias, b.bias)
        assert a.gated == b.gated
        if a.gated:
            assert np.array_equal(a.gate_weight, b.gate_weight)


def test_bad_magic(tmp_path):
    path = tmp_path / "bad.gdnw"
    path.write_bytes(b"XXXX" + b"\x00" * 64)
    with pytest.raises(FormatError, match="magic"):
        load_weights(path)


def test_bad_version(tmp_path):
    path = tmp_path / "bad.gdnw"
    path.write_bytes(b"GDNW" + struct.pack("<I", 9) + b"\x00" * 64)
    with pytest.raises(FormatError, match="version"):
        load_weights(path)


def test_truncation_names_the_missing_layer(tmp_path):
    w = zero_weights(width=4)
    path = tmp_path / "w.gdnw"
    save_weights(w, path)
    data = path.read_bytes()
    cut = tmp_path / "cut.gdnw"
    cut.write_bytes(data[: len(data) // 2])
    with pytest.raises(FormatError, match=r"layer \d"):
        load_weights(cut)


def test_crc_detects_single_byte_corruption(tmp_path):
    w = zero_weights(width=4)
    path = tmp_path / "w.gdnw"
    save_weights(w, path)
    data = bytearray(path.read_bytes())
    rng = np.random.default_rng(0)
    # corrupt a sample of payload positions, one byte at a time
    for pos in rng.choice(len(data) - 4, size=50, replace=False):
        corrupted = bytearray(data)
        corrupted[pos] ^= 0x40
        bad = tmp_path / "bad.gdnw"
        bad.write_bytes(bytes(corrupted))
        with pytest.raises(FormatError):
            load_weights(bad)


def test_non_finite_weights_rejected(tmp_path):
    import zlib
    w = zero_weights(width=4)
    path = tmp_path / "w.gdnw"
    save_weights(w, path)
    data = bytearray(path.read_bytes())
    # find the first weight float (after header: 4 magic + 4 ver + 4 slope
    # + 4 count + 1 type + 12 dims) and write NaN there, then refresh CRC
    offset = 4 + 4 + 4 + 4 + 1 + 12
    data[offset:offset + 4] = struct.pack("<f", float("nan"))
    data[-4:] = struct.pack("<I", zlib.crc32(bytes(data[:-4])) & 0xFFFFFFFF)
    path.write_bytes(bytes(data))
    with pytest.raises(FormatError, match="invariant"):
        load_weights(path)


def test_trailing_garbage_rejected(tmp_path):
    w = zero_weights(width=4)
    path = tmp_path / "w.gdnw"
    save_weights(w, path)
    path.write_bytes(path.read_bytes() + b"\x00\x01")
    with pytest.raises(FormatError):
        load_weights(path)
