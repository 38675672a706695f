"""GDNW weight file format (little-endian, CRC-protected).

Layout: magic "GDNW", u32 version (=1), f32 leaky slope, u32 layer count,
then per layer: u8 type (0 = conv, 1 = gated), u32 in_ch, u32 out_ch,
u32 kernel (=5), feature weights f32[out][in][5][5], feature bias f32[out],
gate weights and bias with the same shapes for gated layers, folded-affine
scale f32[out] and shift f32[out]. A CRC32 of everything before it closes
the file.
"""

from __future__ import annotations

import struct
import zlib

import numpy as np

from .cnn import KERNEL, CnnWeights, ConvLayer
from .errors import ConfigurationError, FormatError

MAGIC = b"GDNW"
VERSION = 1


def save_weights(weights, path):
    """Serialize validated weights; returns the written byte count."""
    weights.validate()
    out = bytearray()
    out += MAGIC
    out += struct.pack("<I", VERSION)
    out += struct.pack("<f", weights.leaky_slope)
    out += struct.pack("<I", len(weights.layers))
    for layer in weights.layers:
        out += struct.pack("<B", 1 if layer.gated else 0)
        out += struct.pack("<III", layer.in_ch, layer.out_ch, KERNEL)
        out += np.ascontiguousarray(layer.weight, dtype="<f4").tobytes()
        out += np.ascontiguousarray(layer.bias, dtype="<f4").tobytes()
        if layer.gated:
            out += np.ascontiguousarray(layer.gate_weight, dtype="<f4").tobytes()
            out += np.ascontiguousarray(layer.gate_bias, dtype="<f4").tobytes()
        out += np.ascontiguousarray(layer.scale, dtype="<f4").tobytes()
        out += np.ascontiguousarray(layer.shift, dtype="<f4").tobytes()
    out += struct.pack("<I", zlib.crc32(bytes(out)) & 0xFFFFFFFF)
    with open(path, "wb") as fh:
        fh.write(bytes(out))
    return len(out)


class _Reader:
    def __init__(self, data):
        self.data = data
        self.pos = 0

    def take(self, count, what):
        if self.pos + count > len(self.data):
            raise FormatError(
                f"truncated weight file: needed {count} bytes for {what} "
                f"at offset {self.pos}, only {len(self.data) - self.pos} left")
        chunk = self.data[self.pos:self.pos + count]
        self.pos += count
        return chunk

    def u8(self, what):
        return self.take(1, what)[0]

    def u32(self, what):
        return struct.unpack("<I", self.take(4, what))[0]

    def f32(self, what):
        return struct.unpack("<f", self.take(4, what))[0]

    def f32_array(self, shape, what):
        count = int(np.prod(shape))
        raw = self.take(4 * count, what)
        return np.frombuffer(raw, dtype="<f4").reshape(shape).copy()


def load_weights(path):
    """Parse and validate a GDNW file."""
    with open(path, "rb") as fh:
        data = fh.read()
    if len(data) < 4:
        raise FormatError("file too short for the GDNW magic")
    rd = _Reader(data)
    if rd.take(4, "magic") != MAGIC:
        raise FormatError("bad magic: not a GDNW weight file (offset 0)")
    version = rd.u32("version")
    if version != VERSION:
        raise FormatError(f"unsupported GDNW version {version} (offset 4)")
    slope = rd.f32("leaky slope")
    count = rd.u32("layer count")
    if count > 1000:
        raise FormatError(f"implausible layer count {count} (offset 12)")
    layers = []
    for i in range(count):
        what = f"layer {i + 1}"
        gated = rd.u8(f"{what} type")
        if gated not in (0, 1):
            raise FormatError(f"{what}: unknown layer type {gated} "
                              f"(offset {rd.pos - 1})")
        in_ch = rd.u32(f"{what} in_ch")
        out_ch = rd.u32(f"{what} out_ch")
        kernel = rd.u32(f"{what} kernel")
        if kernel != KERNEL:
            raise FormatError(f"{what}: kernel {kernel} != {KERNEL} (offset {rd.pos - 4})")
        if not (1 <= in_ch <= 4096 and 1 <= out_ch <= 4096):
            raise FormatError(f"{what}: implausible channel counts "
                              f"({in_ch}, {out_ch}) (offset {rd.pos - 12})")
        wshape = (out_ch, in_ch, KERNEL, KERNEL)
        kw = dict(gated=bool(gated), in_ch=in_ch, out_ch=out_ch,
                  weight=rd.f32_array(wshape, f"{what} weights"),
                  bias=rd.f32_array((out_ch,), f"{what} bias"))
        if gated:
            kw["gate_weight"] = rd.f32_array(wshape, f"{what} gate weights")
            kw["gate_bias"] = rd.f32_array((out_ch,), f"{what} gate bias")
        kw["scale"] = rd.f32_array((out_ch,), f"{what} scale")
        kw["shift"] = rd.f32_array((out_ch,), f"{what} shift")
        layers.append(ConvLayer(**kw))
    payload_end = rd.pos
    stored_crc = rd.u32("trailing CRC32")
    actual_crc = zlib.crc32(data[:payload_end]) & 0xFFFFFFFF
    if stored_crc != actual_crc:
        raise FormatError(f"CRC mismatch: stored {stored_crc:#010x}, "
                          f"computed {actual_crc:#010x} (offset {payload_end})")
    if rd.pos != len(data):
        raise FormatError(f"{len(data) - rd.pos} trailing bytes after CRC "
                          f"(offset {rd.pos})")
    weights = CnnWeights(leaky_slope=slope, layers=tuple(layers))
    try:
        weights.validate()
    except ConfigurationError as exc:
        raise FormatError(f"weight file violates network invariants: {exc}") from exc
    return weights
