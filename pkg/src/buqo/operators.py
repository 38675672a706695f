"""Linear operators for the measurement and regularization models.

Provides the masked 2D Fourier measurement operator built from radial
sampling patterns, first-difference and Haar sparsifying operators,
pixel-mask restriction/embedding, generic dense/function-backed operators
for composites, and spectral-norm estimation by power iteration.

Conventions: images are real (n, n) float64 arrays; measurement vectors
are 1-D (complex for Fourier data). The 2D DFT is unitary (1/n scaling
both ways), so the masked Fourier operator has unit spectral norm.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError

# Radial line rasterization: a frequency bin is selected when the exact
# line passes within this fraction of a pixel of the bin center (measured
# along the minor axis), and the bin lies within LINE_EXTENT_FACTOR * n
# of the origin. Calibrated so the selected fraction M/N reproduces the
# published ratios for 128-grid masks at 150..350 angles within +/-0.02.
LINE_HALF_WIDTH = 0.27
LINE_EXTENT_FACTOR = 0.65


class LinearOperator:
    """Matrix-free linear map with a true adjoint.

    Subclasses implement ``apply`` and ``adjoint``; both must be pure
    functions, and handles are immutable after construction so they can
    be shared freely across threads.
    """

    kind = "composite"

    def __init__(self, in_shape, out_shape):
        self.in_shape = tuple(in_shape)
        self.out_shape = tuple(out_shape)

    def apply(self, x):
        raise NotImplementedError

    def adjoint(self, v):
        raise NotImplementedError

    def _check_in(self, x):
        if x.shape != self.in_shape:
            raise ConfigurationError(
                f"operator input shape {x.shape} != expected {self.in_shape}")

    def _check_out(self, v):
        if v.shape != self.out_shape:
            raise ConfigurationError(
                f"operator adjoint input shape {v.shape} != expected {self.out_shape}")


@dataclass(frozen=True)
class SamplingPattern:
    """Radial-line frequency selection on a centered n x n grid.

    ``mask`` uses the fftshift layout (DC bin at [n//2, n//2]) and is
    point-symmetric modulo n, so adjoint images are real to rounding.
    """

    n: int
    angles: int
    mask: np.ndarray
    m_count: int

    @property
    def ratio(self):
        return self.m_count / float(self.n * self.n)


def _point_mirror(mask):
    # centered index a maps to ((-a) mod n); in array position p -> (n - p) % n
    return np.roll(mask[::-1, ::-1], shift=(1, 1), axis=(0, 1))


def make_radial_pattern(n, angles):
    """Rasterize ``angles`` lines through the DC bin at angles k*pi/angles."""
    if n < 4 or (n & (n - 1)) != 0:
        raise ConfigurationError(f"image side {n} must be a power of two >= 4")
    if angles < 1:
        raise ConfigurationError("need at least one sampling line")
    half = n // 2
    extent_sq = (LINE_EXTENT_FACTOR * n) ** 2
    mask = np.zeros((n, n), dtype=np.uint8)
    major = np.arange(-half, half)
    for k in range(angles):
        phi = np.pi * k / angles
        c, s = np.cos(phi), np.sin(phi)
        # direction (cos, sin) in (col, row) axes; sweep the major axis and
        # round the minor coordinate, keeping it only when nearly exact
        if abs(c) >= abs(s):
            minor = major * (s / c)
            minor_i = np.round(minor)
            keep = np.abs(minor - minor_i) <= LINE_HALF_WIDTH + 1e-12
            keep &= (minor_i >= -half) & (minor_i <= half - 1)
            keep &= (minor_i ** 2 + major ** 2) <= extent_sq
            rows, cols = minor_i[keep].astype(int), major[keep]
        else:
            minor = major * (c / s)
            minor_i = np.round(minor)
            keep = np.abs(minor - minor_i) <= LINE_HALF_WIDTH + 1e-12
            keep &= (minor_i >= -half) & (minor_i <= half - 1)
            keep &= (minor_i ** 2 + major ** 2) <= extent_sq
            rows, cols = major[keep], minor_i[keep].astype(int)
        mask[rows + half, cols + half] = 1
    mask = np.maximum(mask, _point_mirror(mask))
    return SamplingPattern(n=n, angles=angles, mask=mask, m_count=int(mask.sum()))


def full_pattern(n):
    """All-ones selection (the complete unitary DFT), useful for oracles."""
    mask = np.ones((n, n), dtype=np.uint8)
    return SamplingPattern(n=n, angles=0, mask=mask, m_count=n * n)


class FourierMasked(LinearOperator):
    """Subsampled unitary 2D Fourier operator S o F."""

    kind = "fourier_masked"

    def __init__(self, pattern):
        super().__init__((pattern.n, pattern.n), (pattern.m_count,))
        self.pattern = pattern
        self._n = pattern.n
        self._sel = np.flatnonzero(np.fft.ifftshift(pattern.mask).ravel())

    def apply(self, x):
        self._check_in(x)
        spec = np.fft.fft2(x) / self._n
        return spec.ravel()[self._sel]

    def adjoint(self, v):
        self._check_out(v)
        buf = np.zeros(self._n * self._n, dtype=complex)
        buf[self._sel] = v
        return np.real(np.fft.ifft2(buf.reshape(self._n, self._n)) * self._n)


def make_radial_fourier(n, angles):
    """Radial-mask measurement operator plus its sampling pattern."""
    pattern = make_radial_pattern(n, angles)
    return FourierMasked(pattern), pattern


class GradientOp(LinearOperator):
    """Horizontal and vertical first differences with replicate boundary.

    Output stacks the two difference fields into shape (2, n, n); the
    adjoint is the matching negative divergence.
    """

    kind = "gradient"

    def __init__(self, n):
        if n < 2:
            raise ConfigurationError("gradient operator needs n >= 2")
        super().__init__((n, n), (2, n, n))
        self.n = n

    def apply(self, x):
        self._check_in(x)
        out = np.zeros((2, self.n, self.n))
        out[0, :, :-1] = x[:, 1:] - x[:, :-1]   # horizontal differences
        out[1, :-1, :] = x[1:, :] - x[:-1, :]   # vertical differences
        return out

    def adjoint(self, v):
        self._check_out(v)
        h, w = v[0], v[1]
        out = np.zeros((self.n, self.n))
        out[:, 1:] += h[:, :-1]
        out[:, :-1] -= h[:, :-1]
        out[1:, :] += w[:-1, :]
        out[:-1, :] -= w[:-1, :]
        return out


class HaarOp(LinearOperator):
    """Single-level orthonormal 2D Haar transform (alternative sparsifier)."""

    kind = "haar"

    def __init__(self, n):
        if n < 2 or n % 2 != 0:
            raise ConfigurationError("Haar transform needs even n >= 2")
        super().__init__((n, n), (n, n))
        self.n = n

    @staticmethod
    def _split(x, axis):
        a = np.take(x, np.arange(0, x.shape[axis], 2), axis=axis)
        b = np.take(x, np.arange(1, x.shape[axis], 2), axis=axis)
        s = (a + b) / np.sqrt(2.0)
        d = (a - b) / np.sqrt(2.0)
        return np.concatenate([s, d], axis=axis)

    @staticmethod
    def _merge(x, axis):
        half = x.shape[axis] // 2
        s = np.take(x, np.arange(half), axis=axis)
        d = np.take(x, np.arange(half, 2 * half), axis=axis)
        a = (s + d) / np.sqrt(2.0)
        b = (s - d) / np.sqrt(2.0)
        out = np.empty_like(x)
        sl_a = [slice(None)] * x.ndim
        sl_b = [slice(None)] * x.ndim
        sl_a[axis] = slice(0, None, 2)
        sl_b[axis] = slice(1, None, 2)
        out[tuple(sl_a)] = a
        out[tuple(sl_b)] = b
        return out

    def apply(self, x):
        self._check_in(x)
        return self._split(self._split(x, 0), 1)

    def adjoint(self, v):
        self._check_out(v)
        return self._merge(self._merge(v, 1), 0)


@dataclass(frozen=True)
class StructureMask:
    """Binary pixel mask with its sorted flat index set."""

    n: int
    pixels: np.ndarray
    index_set: np.ndarray = field(repr=False)
    comp_index_set: np.ndarray = field(repr=False)

    @classmethod
    def from_pixels(cls, pixels):
        pixels = np.asarray(pixels)
        if pixels.ndim != 2 or pixels.shape[0] != pixels.shape[1]:
            raise ConfigurationError("structure mask must be a square 2D array")
        if not np.isin(pixels, (0, 1)).all():
            raise ConfigurationError("structure mask entries must be 0/1")
        pixels = pixels.astype(np.uint8)
        flat = pixels.ravel()
        return cls(
            n=pixels.shape[0],
            pixels=pixels,
            index_set=np.flatnonzero(flat),
            comp_index_set=np.flatnonzero(1 - flat),
        )

    @property
    def n_m(self):
        return int(self.index_set.size)

    @property
    def float_pixels(self):
        return self.pixels.astype(float)


def restrict(mask, x):
    """M x: masked pixels in index order."""
    if x.shape != (mask.n, mask.n):
        raise ConfigurationError(f"image shape {x.shape} != mask grid {(mask.n, mask.n)}")
    return x.ravel()[mask.index_set]


def embed(mask, u):
    """M^T u: scatter masked values into a zero image."""
    if u.shape != (mask.n_m,):
        raise ConfigurationError(f"vector length {u.shape} != mask cardinality {mask.n_m}")
    out = np.zeros(mask.n * mask.n)
    out[mask.index_set] = u
    return out.reshape(mask.n, mask.n)


def restrict_comp(mask, x):
    """M^c x: complement pixels in index order."""
    if x.shape != (mask.n, mask.n):
        raise ConfigurationError(f"image shape {x.shape} != mask grid {(mask.n, mask.n)}")
    return x.ravel()[mask.comp_index_set]


def embed_comp(mask, u):
    """(M^c)^T u: scatter complement values into a zero image."""
    if u.shape != (mask.comp_index_set.size,):
        raise ConfigurationError("vector length does not match mask complement")
    out = np.zeros(mask.n * mask.n)
    out[mask.comp_index_set] = u
    return out.reshape(mask.n, mask.n)


class MaskingOp(LinearOperator):
    """Restriction to the structure pixels (or to the complement)."""

    kind = "masking"

    def __init__(self, mask, complement=False):
        self.mask = mask
        self.complement = complement
        size = mask.comp_index_set.size if complement else mask.n_m
        super().__init__((mask.n, mask.n), (size,))

    def apply(self, x):
        self._check_in(x)
        return restrict_comp(self.mask, x) if self.complement else restrict(self.mask, x)

    def adjoint(self, v):
        self._check_out(v)
        return embed_comp(self.mask, v) if self.complement else embed(self.mask, v)


class DenseOperator(LinearOperator):
    """Explicit-matrix operator acting on flattened inputs (test oracle)."""

    def __init__(self, matrix, in_shape=None, out_shape=None):
        matrix = np.asarray(matrix)
        in_shape = (matrix.shape[1],) if in_shape is None else tuple(in_shape)
        out_shape = (matrix.shape[0],) if out_shape is None else tuple(out_shape)
        super().__init__(in_shape, out_shape)
        self.matrix = matrix

    def apply(self, x):
        self._check_in(x)
        return (self.matrix @ x.ravel()).reshape(self.out_shape)

    def adjoint(self, v):
        self._check_out(v)
        out = self.matrix.conj().T @ v.ravel()
        if np.iscomplexobj(out):
            out = np.real(out)
        return out.reshape(self.in_shape)


class FunctionOperator(LinearOperator):
    """Operator defined by a pair of callables (used for composites)."""

    def __init__(self, in_shape, out_shape, apply_fn, adjoint_fn, kind="composite"):
        super().__init__(in_shape, out_shape)
        self._apply = apply_fn
        self._adjoint = adjoint_fn
        self.kind = kind

    def apply(self, x):
        self._check_in(x)
        return self._apply(x)

    def adjoint(self, v):
        self._check_out(v)
        return self._adjoint(v)


def dense_matrix(op):
    """Materialize an operator column by column (small sizes only)."""
    n_in = int(np.prod(op.in_shape))
    cols = []
    for j in range(n_in):
        e = np.zeros(n_in)
        e[j] = 1.0
        cols.append(op.apply(e.reshape(op.in_shape)).ravel())
    return np.stack(cols, axis=1)


def spectral_norm(op, tol=1e-6, max_iter=500, seed=0, rayleigh_trace=None):
    """Estimate ||A||_S by power iteration on A^T A from a seeded start.

    Stops once successive Rayleigh quotients agree to ``tol`` relative;
    the estimate approaches the true norm from below. When a list is
    passed as ``rayleigh_trace`` the per-iteration quotients are appended
    to it (they are non-decreasing up to rounding).
    """
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(op.in_shape)
    nx = np.linalg.norm(x)
    if nx == 0:
        return 0.0
    x = x / nx
    lam_prev = None
    lam = 0.0
    for _ in range(max_iter):
        z = op.adjoint(op.apply(x))
        lam = float(np.sum(x * z))
        if rayleigh_trace is not None:
            rayleigh_trace.append(lam)
        nz = np.linalg.norm(z)
        if nz == 0:
            return 0.0
        x = z / nz
        if lam_prev is not None and abs(lam - lam_prev) < tol * abs(lam):
            break
        lam_prev = lam
    return float(np.sqrt(max(lam, 0.0)))
