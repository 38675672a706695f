"""Primal-dual solver for the constrained MAP problem.

Minimizes lambda*||Psi x||_1 subject to Phi x in B2(y, epsilon) and
x in [0,1]^N, via dual ascent on both linear branches (soft-thresholding
through the Moreau decomposition on the analysis branch, l2-ball
projection on the data branch), a projected primal step, and
extrapolation. The returned point is the projected iterate, so it is
always box-feasible.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, NumericalDivergenceError
from .operators import spectral_norm
from .prox import Ball2, project_box, project_l2_ball, soft_threshold

EPS_NORM = 1e-30


@dataclass(frozen=True)
class PdStepsizes:
    mu1: float
    mu2: float
    sigma: float
    norm_psi_sq: float
    norm_phi_sq: float

    def validate(self):
        bound = self.sigma * (self.mu1 * self.norm_psi_sq + self.mu2 * self.norm_phi_sq)
        if not bound < 1.0:
            raise ConfigurationError(
                f"stepsize condition violated: sigma*(mu1*|Psi|^2 + mu2*|Phi|^2) = {bound:.6f} >= 1")


def default_map_stepsizes(phi, psi, mu1=1.0, mu2=None, margin=0.99, seed=0,
                          y=None, epsilon=None):
    """Saturate the convergence condition with a 1% margin.

    The data-branch dual stepsize defaults to ~ ||y|| / (20 epsilon): the
    ball dual must grow to the scale of the regularizer's pull while its
    per-iteration increment is proportional to mu2 * epsilon, so tight
    data balls need proportionally larger mu2 to become feasible within
    the iteration budget.
    """
    norm_phi = spectral_norm(phi, seed=seed)
    norm_psi = spectral_norm(psi, seed=seed)
    if mu2 is None:
        if y is not None and epsilon is not None and epsilon > 0:
            mu2 = float(np.clip(0.05 * np.linalg.norm(y) / epsilon, 1.0, 1e4))
        else:
            mu2 = 1.0
    sigma = margin / (mu1 * norm_psi ** 2 + mu2 * norm_phi ** 2)
    return PdStepsizes(mu1=mu1, mu2=mu2, sigma=sigma,
                       norm_psi_sq=norm_psi ** 2, norm_phi_sq=norm_phi ** 2)


@dataclass
class SolverOptions:
    max_iter: int = 20000
    tol: float = 1e-5


@dataclass
class SolverTrace:
    data_residual: list = field(default_factory=list)
    reg_value: list = field(default_factory=list)
    rel_change: list = field(default_factory=list)

    @property
    def iterations(self):
        return len(self.rel_change)

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["iter", "data_residual", "reg_value", "rel_change"])
            for i, (d, r, c) in enumerate(
                    zip(self.data_residual, self.reg_value, self.rel_change)):
                writer.writerow([i, repr(d), repr(r), repr(c)])


def solve_map(y, phi, psi, lam, epsilon, opts=None, x0=None, stepsizes=None):
    """Run the MAP iteration; returns (x_map, trace)."""
    opts = opts or SolverOptions()
    if stepsizes is None:
        stepsizes = default_map_stepsizes(phi, psi, y=y, epsilon=epsilon)
    stepsizes.validate()
    mu1, mu2, sigma = stepsizes.mu1, stepsizes.mu2, stepsizes.sigma

    if x0 is None:
        x0 = np.clip(phi.adjoint(y), 0.0, 1.0)
    if np.min(x0) < 0 or np.max(x0) > 1:
        raise ConfigurationError("initial point must lie in [0,1]^N")

    ball = Ball2(center=y, radius=float(epsilon))
    x = x0.copy()
    v1 = np.zeros(psi.out_shape)
    v2 = np.zeros(phi.out_shape, dtype=complex)
    trace = SolverTrace()
    x_proj = x

    for _ in range(opts.max_iter):
        vt1 = v1 + mu1 * psi.apply(x)
        v1 = vt1 - mu1 * soft_threshold(vt1 / mu1, lam / mu1)
        vt2 = v2 + mu2 * phi.apply(x)
        v2 = vt2 - mu2 * project_l2_ball(vt2 / mu2, ball)
        x_proj = project_box(x - sigma * (psi.adjoint(v1) + phi.adjoint(v2)), 0.0, 1.0)
        x_new = 2.0 * x_proj - x

        if not np.isfinite(x_new).all():
            raise NumericalDivergenceError("MAP iterate became non-finite")

        rel = float(np.linalg.norm(x_new - x) / max(np.linalg.norm(x), EPS_NORM))
        trace.data_residual.append(float(np.linalg.norm(phi.apply(x_proj) - y)))
        trace.reg_value.append(lam * float(np.abs(psi.apply(x_proj)).sum()))
        trace.rel_change.append(rel)
        x = x_new
        if rel <= opts.tol:
            break

    return x_proj, trace
