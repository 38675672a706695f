"""File formats and provenance helpers.

IMGF: magic "IMGF", u32 width, u32 height, little-endian f32 row-major.
CPLX: magic "CPLX", u32 length, interleaved (re, im) little-endian f32.
Masks: binary PGM (P5), 255 marks structure pixels.
All writes go through a temp-file-then-rename so readers never observe a
partial file.
"""

from __future__ import annotations

import hashlib
import json
import os
import struct
import tempfile

import numpy as np

from .errors import FormatError

IMGF_MAGIC = b"IMGF"
CPLX_MAGIC = b"CPLX"


def atomic_write_bytes(path, data):
    path = os.fspath(path)
    directory = os.path.dirname(path) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=".part")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_imgf(path, image):
    image = np.asarray(image, dtype=np.float64)
    if image.ndim != 2:
        raise FormatError("IMGF stores 2D images")
    if not np.isfinite(image).all():
        raise FormatError("refusing to write non-finite image values")
    height, width = image.shape
    payload = (IMGF_MAGIC + struct.pack("<II", width, height)
               + image.astype("<f4").tobytes())
    atomic_write_bytes(path, payload)


def read_imgf(path):
    with open(path, "rb") as fh:
        data = fh.read()
    if len(data) < 12 or data[:4] != IMGF_MAGIC:
        raise FormatError(f"{path}: not an IMGF file")
    width, height = struct.unpack("<II", data[4:12])
    expected = 12 + 4 * width * height
    if len(data) != expected:
        raise FormatError(f"{path}: IMGF payload length {len(data) - 12} "
                          f"!= {4 * width * height}")
    image = np.frombuffer(data[12:], dtype="<f4").reshape(height, width)
    if not np.isfinite(image).all():
        raise FormatError(f"{path}: non-finite pixel values")
    return image.astype(np.float64)


def write_cplx(path, vec):
    vec = np.asarray(vec, dtype=complex)
    if vec.ndim != 1:
        raise FormatError("CPLX stores 1D vectors")
    interleaved = np.empty(2 * vec.size, dtype="<f4")
    interleaved[0::2] = vec.real
    interleaved[1::2] = vec.imag
    payload = CPLX_MAGIC + struct.pack("<I", vec.size) + interleaved.tobytes()
    atomic_write_bytes(path, payload)


def read_cplx(path):
    with open(path, "rb") as fh:
        data = fh.read()
    if len(data) < 8 or data[:4] != CPLX_MAGIC:
        raise FormatError(f"{path}: not a CPLX file")
    (count,) = struct.unpack("<I", data[4:8])
    if len(data) != 8 + 8 * count:
        raise FormatError(f"{path}: CPLX payload length mismatch")
    interleaved = np.frombuffer(data[8:], dtype="<f4").astype(np.float64)
    return interleaved[0::2] + 1j * interleaved[1::2]


def write_pgm_mask(path, pixels):
    pixels = np.asarray(pixels)
    if not np.isin(pixels, (0, 1)).all():
        raise FormatError("mask pixels must be 0/1")
    height, width = pixels.shape
    header = f"P5\n{width} {height}\n255\n".encode()
    atomic_write_bytes(path, header + (pixels.astype(np.uint8) * 255).tobytes())


def read_pgm_mask(path):
    with open(path, "rb") as fh:
        data = fh.read()
    if not data.startswith(b"P5"):
        raise FormatError(f"{path}: not a binary PGM file")
    # header: magic, width, height, maxval, separated by whitespace/comments
    fields = []
    pos = 2
    while len(fields) < 3:
        while pos < len(data) and data[pos:pos + 1].isspace():
            pos += 1
        if pos < len(data) and data[pos:pos + 1] == b"#":
            while pos < len(data) and data[pos] != 0x0A:
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos:pos + 1].isspace():
            pos += 1
        if start == pos:
            raise FormatError(f"{path}: truncated PGM header")
        fields.append(int(data[start:pos]))
    pos += 1  # single whitespace after maxval
    width, height, maxval = fields
    if maxval != 255:
        raise FormatError(f"{path}: PGM maxval {maxval} != 255")
    raw = data[pos:pos + width * height]
    if len(raw) != width * height:
        raise FormatError(f"{path}: PGM payload length mismatch")
    arr = np.frombuffer(raw, dtype=np.uint8).reshape(height, width)
    return (arr >= 128).astype(np.uint8)


def write_log_diff_png(path, diff, floor=1e-6):
    """|difference| in log10 scale as an 8-bit grayscale PNG."""
    from PIL import Image

    mag = np.maximum(np.abs(np.asarray(diff, dtype=float)), floor)
    logmag = np.log10(mag)
    lo, hi = np.log10(floor), max(logmag.max(), np.log10(floor) + 1e-9)
    scaled = (255 * (logmag - lo) / (hi - lo)).astype(np.uint8)
    buf = Image.fromarray(scaled, mode="L")
    fd, tmp = tempfile.mkstemp(dir=os.path.dirname(os.fspath(path)) or ".",
                               prefix=".tmp-", suffix=".png")
    os.close(fd)
    try:
        buf.save(tmp, format="PNG")
        os.replace(tmp, os.fspath(path))
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def config_hash(config):
    blob = json.dumps(config, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def write_json(path, payload):
    atomic_write_bytes(path, json.dumps(payload, indent=2, sort_keys=True).encode()
                       + b"\n")


def read_json(path):
    with open(path) as fh:
        return json.load(fh)


def provenance(config):
    import numpy

    from . import __version__

    return {
        "config_hash": config_hash(config),
        "package_version": __version__,
        "numpy_version": numpy.__version__,
    }
