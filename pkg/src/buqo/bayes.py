"""Conservative credible region derived from the MAP objective level.

The region consists of all images in the dynamic-range box whose data
residual lies in the l2-ball of radius epsilon and whose analysis
coefficients lie in the l1-ball of radius eta_alpha/lambda, where
eta_alpha exceeds the MAP objective by an explicit dimension-dependent
margin. Membership is tested with a relative tolerance since iterative
solvers only reach the sets approximately.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError

DEFAULT_MEMBERSHIP_TOL = 1e-3


def eta_alpha(map_reg_value, n_pixels, alpha):
    """Objective threshold: reg(x_map) + N*(sqrt(16*ln(3/alpha)/N) + 1).

    Assumes the MAP is feasible so the data-fidelity and box indicator
    terms vanish at the MAP. alpha must lie in (4*exp(-N/3), 1).
    """
    lo = 4.0 * math.exp(-n_pixels / 3.0)
    if not (lo < alpha < 1.0):
        raise ConfigurationError(
            f"alpha={alpha} outside admissible interval ({lo:.3g}, 1)")
    n = float(n_pixels)
    return float(map_reg_value) + n * (math.sqrt(16.0 * math.log(3.0 / alpha) / n) + 1.0)


@dataclass(frozen=True)
class CredibleRegion:
    epsilon: float
    lam: float
    eta: float
    alpha: float
    box: tuple = (0.0, 1.0)

    def __post_init__(self):
        if self.lam <= 0:
            raise ConfigurationError("regularization weight must be positive")

    @property
    def l1_radius(self):
        return self.eta / self.lam


def region_from_map(x_map, psi, epsilon, lam, alpha):
    """Build the credible region using the MAP's regularizer value."""
    reg = lam * float(np.abs(psi.apply(x_map)).sum())
    n_pixels = int(np.prod(x_map.shape))
    return CredibleRegion(epsilon=float(epsilon), lam=float(lam),
                          eta=eta_alpha(reg, n_pixels, alpha), alpha=float(alpha))


@dataclass(frozen=True)
class MembershipDiagnostics:
    data_slack: float   # ||Phi x - y|| / epsilon
    l1_slack: float     # ||Psi x||_1 / (eta/lambda)
    box_violation: float

    @property
    def worst(self):
        return max(self.data_slack, self.l1_slack)


def in_credible_region(x, region, phi, psi, y, rel_tol=DEFAULT_MEMBERSHIP_TOL):
    """Tolerant membership test; returns (bool, diagnostics)."""
    data_dist = float(np.linalg.norm(phi.apply(x) - y))
    l1_val = float(np.abs(psi.apply(x)).sum())
    data_slack = data_dist / region.epsilon if region.epsilon > 0 else (
        0.0 if data_dist == 0 else math.inf)
    radius = region.l1_radius
    l1_slack = l1_val / radius if radius > 0 else (0.0 if l1_val == 0 else math.inf)
    lo, hi = region.box
    box_violation = float(max(np.max(lo - x, initial=0.0),
                              np.max(x - hi, initial=0.0), 0.0))
    ok = (data_slack <= 1.0 + rel_tol and l1_slack <= 1.0 + rel_tol
          and box_violation <= rel_tol)
    return ok, MembershipDiagnostics(data_slack, l1_slack, box_violation)
