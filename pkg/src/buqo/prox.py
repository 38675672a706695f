"""Projection and proximity operators shared by the solvers.

All functions are pure and idempotent where applicable. Complex inputs to
the l2-ball projection are handled by treating them as real vectors of
doubled length, which is equivalent for the Euclidean norm.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError


@dataclass(frozen=True)
class Ball2:
    """l2-ball with arbitrary (possibly complex) center."""

    center: np.ndarray
    radius: float

    def __post_init__(self):
        if self.radius < 0:
            raise ConfigurationError("l2-ball radius must be non-negative")


@dataclass(frozen=True)
class Ball1:
    """l1-ball centered at the origin."""

    radius: float

    def __post_init__(self):
        if self.radius < 0:
            raise ConfigurationError("l1-ball radius must be non-negative")


def project_l2_ball(z, ball):
    """Radial projection onto ||z - c||_2 <= r."""
    diff = z - ball.center
    dist = np.linalg.norm(diff)
    if dist <= ball.radius:
        return z.copy()
    return ball.center + diff * (ball.radius / dist)


def project_l1_ball(z, radius):
    """Euclidean projection onto the l1-ball of given radius around 0.

    Sort-based threshold search: O(d log d), deterministic, with ties at
    the threshold resolved by the max(., 0) rule.
    """
    if radius < 0:
        raise ConfigurationError("l1-ball radius must be non-negative")
    a = np.abs(z)
    if a.sum() <= radius:
        return z.copy()
    if radius == 0:
        return np.zeros_like(z)
    flat = np.sort(a.ravel())[::-1]
    csum = np.cumsum(flat)
    k = np.arange(1, flat.size + 1)
    candidates = (csum - radius) / k
    valid = flat - candidates > 0
    k_star = int(np.max(np.flatnonzero(valid))) if valid.any() else 0
    theta = candidates[k_star]
    return np.sign(z) * np.maximum(a - theta, 0.0)


def project_box(z, lo, hi):
    """Componentwise clamp to [lo, hi]."""
    if lo > hi:
        raise ConfigurationError(f"box bounds reversed: [{lo}, {hi}]")
    return np.clip(z, lo, hi)


def soft_threshold(z, t):
    """prox of t*||.||_1: sign(z) * max(|z| - t, 0)."""
    if t < 0:
        raise ConfigurationError("soft threshold level must be non-negative")
    return np.sign(z) * np.maximum(np.abs(z) - t, 0.0)
