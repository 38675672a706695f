"""Synthetic ground truth and measurement simulation.

Phantoms are piecewise-smooth ellipse compositions with optional localized
bump structures whose masks are recorded, standing in for clinical data at
desk scale. Measurement noise is iid complex Gaussian at a prescribed
input SNR; the data-ball radius is set to an upper ~2-sigma quantile of
the noise norm so the ground truth stays feasible with high probability.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError
from .operators import StructureMask

BORDER_MARGIN = 2


@dataclass(frozen=True)
class StructureSpec:
    """Requested bump structures: how many, how large, how strong."""

    count: int = 1
    radius: float = 4.0
    amplitude: float = 0.35


@dataclass(frozen=True)
class Phantom:
    image: np.ndarray
    base: np.ndarray = field(repr=False)  # structure-free version of image
    structures: list = field(default_factory=list)  # (StructureMask, amplitude)
    seed: int = 0


@dataclass(frozen=True)
class SimulatedData:
    y: np.ndarray
    delta: float
    epsilon: float
    isnr: float
    pattern: object
    seed: int


def _smoothstep(t):
    t = np.clip(t, 0.0, 1.0)
    return t * t * (3.0 - 2.0 * t)


def _ellipse(ii, jj, center, axes, angle, value, edge):
    ci, cj = center
    ai, aj = axes
    ca, sa = math.cos(angle), math.sin(angle)
    di, dj = ii - ci, jj - cj
    ri = (ca * di + sa * dj) / ai
    rj = (-sa * di + ca * dj) / aj
    rho = np.sqrt(ri * ri + rj * rj)
    return value * _smoothstep((1.0 - rho) / edge)


def generate_phantom(n, spec=StructureSpec(), seed=0):
    """Deterministic piecewise-smooth phantom with recorded bump structures."""
    if n < 32:
        raise ConfigurationError("phantom generation needs n >= 32")
    rng = np.random.default_rng(seed)
    ii, jj = np.meshgrid(np.linspace(0, 1, n), np.linspace(0, 1, n), indexing="ij")

    base = np.full((n, n), 0.05)
    base += _ellipse(ii, jj, (0.5, 0.5), (0.40, 0.33), 0.25, 0.45, 0.12)
    base += _ellipse(ii, jj, (0.42, 0.40), (0.16, 0.11), -0.4, 0.22, 0.25)
    base += _ellipse(ii, jj, (0.62, 0.58), (0.13, 0.17), 0.9, -0.16, 0.25)
    # gentle diagonal illumination ramp confined to the head ellipse
    head = _ellipse(ii, jj, (0.5, 0.5), (0.40, 0.33), 0.25, 1.0, 0.12)
    base += 0.10 * head * (ii + jj - 1.0)
    base = np.clip(base, 0.0, 1.0)

    structures = []
    centers = []
    r = spec.radius
    margin = BORDER_MARGIN + int(math.ceil(r)) + 1
    if margin * 2 >= n and spec.count > 0:
        raise ConfigurationError("structure radius too large for the grid")
    gi, gj = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    image = base.copy()
    for _ in range(spec.count):
        placed = False
        for _attempt in range(200):
            ci = int(rng.integers(margin, n - margin))
            cj = int(rng.integers(margin, n - margin))
            if all((ci - pi) ** 2 + (cj - pj) ** 2 >= (2 * r + 4) ** 2 for pi, pj in centers):
                # keep bumps on the bright part of the phantom
                if base[ci, cj] > 0.2:
                    placed = True
                    break
        if not placed:
            raise ConfigurationError(
                f"could not place {spec.count} disjoint structures of radius {r}")
        centers.append((ci, cj))
        rho = np.sqrt((gi - ci) ** 2 + (gj - cj) ** 2)
        inside = rho <= r
        bump = np.zeros((n, n))
        bump[inside] = spec.amplitude * np.cos(0.5 * math.pi * rho[inside] / r) ** 2
        image = np.clip(image + bump, 0.0, 1.0)
        structures.append((StructureMask.from_pixels(inside.astype(np.uint8)),
                           spec.amplitude))

    return Phantom(image=image, base=base, structures=structures, seed=seed)


def simulate_measurements(x_bar, op, isnr, seed=0):
    """y = Phi x_bar + w with iid complex Gaussian w at the given iSNR.

    The per-entry complex standard deviation is
    delta = ||Phi x_bar||_2 / M * 10^(-iSNR/20) and the data-ball radius is
    epsilon = delta * sqrt(M + 2 sqrt(M)). isnr=inf disables the noise.
    """
    if not (0 <= isnr <= 60 or math.isinf(isnr)):
        raise ConfigurationError(f"iSNR {isnr} outside [0, 60]")
    clean = op.apply(x_bar)
    m = clean.size
    delta = float(np.linalg.norm(clean) / m * 10.0 ** (-isnr / 20.0))
    rng = np.random.default_rng(seed)
    if delta > 0:
        z = rng.standard_normal((2, m))
        w = (z[0] + 1j * z[1]) * (delta / math.sqrt(2.0))
    else:
        w = np.zeros(m, dtype=complex)
    epsilon = delta * math.sqrt(m + 2.0 * math.sqrt(m))
    return SimulatedData(y=clean + w, delta=delta, epsilon=epsilon, isnr=isnr,
                         pattern=getattr(op, "pattern", None), seed=seed)


def inject_artifact(x, mask, amplitude):
    """Add a checkerboard-modulated bump inside the mask, clamped to [0, 1]."""
    if x.shape != (mask.n, mask.n):
        raise ConfigurationError("image and mask shapes differ")
    gi, gj = np.meshgrid(np.arange(mask.n), np.arange(mask.n), indexing="ij")
    checker = np.where((gi + gj) % 2 == 0, 1.0, -1.0)
    out = x + amplitude * checker * mask.float_pixels
    np.clip(out, 0.0, 1.0, out=out)
    # clamping must not leak outside the mask
    out_flat, x_flat = out.ravel().copy(), x.ravel()
    out_flat[mask.comp_index_set] = x_flat[mask.comp_index_set]
    return out_flat.reshape(x.shape)
