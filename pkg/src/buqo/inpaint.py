"""Inpainting operators: pixels outside the mask pass through unchanged,
pixels inside are synthesized from the complement.

Every implementation satisfies the same contract: exact complement
preservation, (near-)idempotence, and a vector-Jacobian product that is
consistent with the forward map. ``forward`` returns the output together
with an opaque cache that ``vjp`` consumes; linear operators ignore the
cache.
"""

from __future__ import annotations

import numpy as np

from .errors import ConfigurationError, NonConvergenceError
from .operators import (LinearOperator, StructureMask, embed, embed_comp,
                        restrict, restrict_comp)

_NEIGHBORS8 = [(-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1)]
_NEIGHBORS4 = [(-1, 0), (1, 0), (0, -1), (0, 1)]


class InpaintingOperator:
    """Base contract: apply/forward/vjp over a fixed structure mask."""

    kind = "base"

    def __init__(self, mask):
        self.mask = mask

    def apply(self, x):
        y, _ = self.forward(x)
        return y

    def forward(self, x):
        raise NotImplementedError

    def vjp(self, cache, u):
        raise NotImplementedError


def _dilate8(m):
    out = m.copy()
    out[:-1, :] |= m[1:, :]
    out[1:, :] |= m[:-1, :]
    out[:, :-1] |= m[:, 1:]
    out[:, 1:] |= m[:, :-1]
    out[:-1, :-1] |= m[1:, 1:]
    out[:-1, 1:] |= m[1:, :-1]
    out[1:, :-1] |= m[:-1, 1:]
    out[1:, 1:] |= m[:-1, :-1]
    return out


def chebyshev_distance_to_complement(pixels):
    """Per-pixel Chebyshev distance to the nearest complement pixel.

    Complement pixels get 0; mask pixels unreachable through 8-connected
    growth keep a large sentinel value.
    """
    inside = pixels.astype(bool)
    sentinel = np.iinfo(np.int64).max
    dist = np.where(inside, sentinel, 0).astype(np.int64)
    frontier = ~inside
    d = 0
    while True:
        d += 1
        frontier = _dilate8(frontier)
        newly = frontier & inside & (dist == sentinel)
        if not newly.any():
            break
        dist[newly] = d
    return dist


class OnionInpainter(InpaintingOperator):
    """Greedy linear inpainting, peeling the mask from its edge inward.

    Mask pixels are ordered by increasing Chebyshev distance to the
    complement (ties by flat index); each takes the mean of its already
    resolved 8-neighbors. The whole schedule is a linear map, exposed both
    as an image-to-image operator and, through ``linear_map``, as the
    complement-to-mask operator with a true adjoint.
    """

    kind = "onion"

    def __init__(self, mask):
        super().__init__(mask)
        n = mask.n
        dist = chebyshev_distance_to_complement(mask.pixels)
        sentinel = np.iinfo(np.int64).max
        flat_dist = dist.ravel()
        if any(flat_dist[i] == sentinel for i in mask.index_set):
            raise ConfigurationError(
                "mask has a component with no 8-connected path to the complement")
        order = sorted(mask.index_set, key=lambda i: (flat_dist[i], i))
        rank = {int(i): k for k, i in enumerate(order)}
        inside = mask.pixels.astype(bool)
        targets = []
        for idx in order:
            r, c = divmod(int(idx), n)
            contributors = []
            for dr, dc in _NEIGHBORS8:
                rr, cc = r + dr, c + dc
                if not (0 <= rr < n and 0 <= cc < n):
                    continue
                nb = rr * n + cc
                # complement pixels and earlier targets are already resolved
                if not inside[rr, cc] or rank[nb] < rank[int(idx)]:
                    contributors.append(nb)
            targets.append((int(idx), np.array(contributors, dtype=np.int64)))
        self._schedule = targets

    def _replay(self, img_flat):
        for tgt, nbs in self._schedule:
            img_flat[tgt] = img_flat[nbs].mean()
        return img_flat

    def forward(self, x):
        if x.shape != (self.mask.n, self.mask.n):
            raise ConfigurationError("image and mask shapes differ")
        out = self._replay(x.copy().ravel()).reshape(x.shape)
        return out, None

    def _reverse(self, bar_flat):
        for tgt, nbs in reversed(self._schedule):
            v = bar_flat[tgt]
            if v != 0.0:
                bar_flat[tgt] = 0.0
                bar_flat[nbs] += v / nbs.size
        return bar_flat

    def vjp(self, cache, u):
        bar = np.zeros(u.size)
        bar[self.mask.index_set] = u.ravel()[self.mask.index_set]
        bar = self._reverse(bar)
        out = np.zeros(u.size)
        out[self.mask.comp_index_set] = (u.ravel()[self.mask.comp_index_set]
                                         + bar[self.mask.comp_index_set])
        return out.reshape(u.shape)

    def linear_map(self):
        """The complement-to-mask operator L with its adjoint."""
        mask = self.mask

        def apply_fn(u):
            img = embed_comp(mask, u)
            return self._replay(img.ravel())[mask.index_set]

        def adjoint_fn(w):
            bar = np.zeros(mask.n * mask.n)
            bar[mask.index_set] = w
            bar = self._reverse(bar)
            return bar[mask.comp_index_set]

        return _OnionLinearMap(mask, apply_fn, adjoint_fn)


class _OnionLinearMap(LinearOperator):
    kind = "composite"

    def __init__(self, mask, apply_fn, adjoint_fn):
        super().__init__((mask.comp_index_set.size,), (mask.n_m,))
        self._apply_fn = apply_fn
        self._adjoint_fn = adjoint_fn

    def apply(self, x):
        self._check_in(x)
        return self._apply_fn(x)

    def adjoint(self, v):
        self._check_out(v)
        return self._adjoint_fn(v)


class HarmonicInpainter(InpaintingOperator):
    """Discrete-harmonic fill: masked pixels solve the Laplace equation
    with Dirichlet data from the complement, by Jacobi iteration.

    The iteration returns the pre-sweep iterate once the sweep update
    falls below ``tol``, which makes re-application bitwise stable.
    """

    kind = "harmonic"

    def __init__(self, mask, tol=1e-10, max_sweeps=500_000):
        super().__init__(mask)
        self.tol = tol
        self.max_sweeps = max_sweeps
        n = mask.n
        inside = mask.pixels.astype(bool)
        ordinal = -np.ones(n * n, dtype=np.int64)
        ordinal[mask.index_set] = np.arange(mask.n_m)
        n_m = mask.n_m
        mask_nb = -np.ones((n_m, 4), dtype=np.int64)
        comp_nb = -np.ones((n_m, 4), dtype=np.int64)
        deg = np.zeros(n_m)
        for k, idx in enumerate(mask.index_set):
            r, c = divmod(int(idx), n)
            for d, (dr, dc) in enumerate(_NEIGHBORS4):
                rr, cc = r + dr, c + dc
                if not (0 <= rr < n and 0 <= cc < n):
                    continue
                nb = rr * n + cc
                deg[k] += 1
                if inside[rr, cc]:
                    mask_nb[k, d] = ordinal[nb]
                else:
                    comp_nb[k, d] = nb
        self._mask_nb = np.clip(mask_nb, 0, None)
        self._mask_nb_valid = (mask_nb >= 0).astype(float)
        self._comp_entries = np.flatnonzero(comp_nb.ravel() >= 0)
        self._comp_rows = self._comp_entries // 4
        self._comp_flat = comp_nb.ravel()[self._comp_entries]
        self._deg = deg

    def _boundary_term(self, x_flat):
        b = np.zeros(self.mask.n_m)
        np.add.at(b, self._comp_rows, x_flat[self._comp_flat])
        return b

    def _jacobi(self, b, z0):
        """Solve (deg*I - W) z = b, i.e. Jacobi fixed point z = (b + W z)/deg."""
        if self.mask.n_m == 0:
            return z0
        z = z0
        for _ in range(self.max_sweeps):
            contrib = (z[self._mask_nb] * self._mask_nb_valid).sum(axis=1)
            z_new = (b + contrib) / self._deg
            if np.max(np.abs(z_new - z)) < self.tol:
                return z
            z = z_new
        raise NonConvergenceError("harmonic fill did not reach the requested tolerance")

    def forward(self, x):
        if x.shape != (self.mask.n, self.mask.n):
            raise ConfigurationError("image and mask shapes differ")
        out_flat = x.copy().ravel()
        if self.mask.n_m:
            z = self._jacobi(self._boundary_term(out_flat),
                             out_flat[self.mask.index_set])
            out_flat[self.mask.index_set] = z
        return out_flat.reshape(x.shape), None

    def vjp(self, cache, u):
        u_flat = u.ravel()
        out = np.zeros(u_flat.size)
        out[self.mask.comp_index_set] = u_flat[self.mask.comp_index_set]
        if self.mask.n_m:
            # (deg*I - W) is symmetric, so the transpose solve reuses Jacobi
            s = self._jacobi(u_flat[self.mask.index_set],
                             np.zeros(self.mask.n_m))
            np.add.at(out, self._comp_flat, s[self._comp_rows])
        return out.reshape(u.shape)


def harmonic_inpaint(x, mask, tol=1e-10):
    """One-shot harmonic fill of the masked pixels."""
    return HarmonicInpainter(mask, tol=tol).apply(x)
