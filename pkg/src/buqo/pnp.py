"""Plug-and-play hypothesis test: minimize the fixed-point residual
energy h(x) = (zeta/2) ||x - G(x)||^2 over the credible region.

h is handled through its gradient (one forward plus one vector-Jacobian
product per evaluation); the credible-region balls are handled by dual
ascent as in the MAP solver. The Lipschitz constant of grad h is
estimated by power iteration on finite-difference Hessian-vector
products at perturbations of the inpainted MAP.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .bayes import in_credible_region
from .errors import (ConfigurationError, DegenerateStructureError,
                     NumericalDivergenceError)
from .operators import spectral_norm
from .prox import Ball2, project_box, project_l1_ball, project_l2_ball

EPS_NORM = 1e-30


def h_value_and_grad(G, x, zeta=1.0):
    """h(x) and grad h(x) = zeta * (I - J_G(x))^T (x - G(x))."""
    y, cache = G.forward(x)
    r = x - y
    h = 0.5 * zeta * float(np.sum(r * r))
    grad = zeta * (r - G.vjp(cache, r))
    return h, grad


def grad_h(G, x, zeta=1.0):
    return h_value_and_grad(G, x, zeta)[1]


def estimate_beta(G, x_map, sigma_perturb=0.01, count=4, seed=0, zeta=1.0,
                  power_tol=1e-3, power_max_iter=60, safety=1.1):
    """Lipschitz estimate for grad h: max spectral norm of the Hessian at
    Gaussian perturbations of G(x_map), inflated by a safety factor.

    The Hessian is probed matrix-free through one-sided finite
    differences of the gradient, (grad h(z + d*v) - grad h(z)) / d with
    d = 1e-4 * ||z|| / ||v||.
    """
    if count < 1:
        raise ConfigurationError("need at least one perturbation point")
    rng = np.random.default_rng(seed)
    z_base = G.apply(x_map)
    best = 0.0
    for _ in range(count):
        z = z_base + sigma_perturb * rng.standard_normal(z_base.shape)
        g0 = grad_h(G, z, zeta)
        if not np.isfinite(g0).all():
            raise NumericalDivergenceError("non-finite gradient at perturbation point")
        v = rng.standard_normal(z.shape)
        v /= np.linalg.norm(v)
        delta = 1e-4 * np.linalg.norm(z)
        if delta == 0.0:
            delta = 1e-4
        lam_prev = None
        lam = 0.0
        for _ in range(power_max_iter):
            hv = (grad_h(G, z + delta * v, zeta) - g0) / delta
            lam = float(np.linalg.norm(hv))
            if lam < 1e-14:
                lam = 0.0
                break
            v = hv / lam
            if lam_prev is not None and abs(lam - lam_prev) < power_tol * lam:
                break
            lam_prev = lam
        best = max(best, lam)
    return safety * best


@dataclass(frozen=True)
class PnpParams:
    zeta: float
    beta: float
    mu1: float
    mu2: float
    sigma: float
    perturb_std: float
    perturb_count: int
    seed: int
    norm_psi_sq: float
    norm_phi_sq: float

    def validate(self):
        slack = (1.0 / self.sigma - self.mu1 * self.norm_psi_sq
                 - self.mu2 * self.norm_phi_sq)
        if not slack > self.beta / 2.0:
            raise ConfigurationError(
                f"PnP stepsize condition violated: slack {slack:.6f} "
                f"<= beta/2 = {self.beta / 2.0:.6f}")


def default_pnp_params(G, x_map, phi, psi, zeta=1.0, mu1=1.0, mu2=1.0,
                       sigma_perturb=0.01, count=4, seed=0, margin=0.99):
    """Estimate beta, then saturate the stepsize bound with a 1% margin."""
    beta = estimate_beta(G, x_map, sigma_perturb=sigma_perturb, count=count,
                         seed=seed, zeta=zeta)
    norm_psi = spectral_norm(psi, seed=seed)
    norm_phi = spectral_norm(phi, seed=seed)
    sigma = margin / (beta / 2.0 + mu1 * norm_psi ** 2 + mu2 * norm_phi ** 2)
    params = PnpParams(zeta=zeta, beta=beta, mu1=mu1, mu2=mu2, sigma=sigma,
                       perturb_std=sigma_perturb, perturb_count=count, seed=seed,
                       norm_psi_sq=norm_psi ** 2, norm_phi_sq=norm_phi ** 2)
    params.validate()
    return params


@dataclass
class PnpOptions:
    max_iter: int = 5000
    tol: float = 1e-3
    membership_rel_tol: float = 1e-3


@dataclass
class PnpTrace:
    h_value: list = field(default_factory=list)
    grad_norm: list = field(default_factory=list)
    data_slack: list = field(default_factory=list)
    l1_slack: list = field(default_factory=list)
    rel_change: list = field(default_factory=list)

    @property
    def iterations(self):
        return len(self.rel_change)


def solve_pnp_buqo(x_map, y, region, G, params, phi, psi, opts=None):
    """Run the PnP iteration from x0 = G(x_map).

    Returns (x_dd, trace, converged); x_dd is the last projected iterate.
    """
    opts = opts or PnpOptions()
    params.validate()
    mu1, mu2, sigma, zeta = params.mu1, params.mu2, params.sigma, params.zeta
    data_ball = Ball2(center=y, radius=region.epsilon)

    x = G.apply(x_map)
    v1 = np.zeros(psi.out_shape)
    v2 = np.zeros(phi.out_shape, dtype=complex)
    trace = PnpTrace()
    xt = x
    converged = False

    for _ in range(opts.max_iter):
        vt1 = v1 + mu1 * psi.apply(x)
        v1 = vt1 - mu1 * project_l1_ball(vt1 / mu1, region.l1_radius)
        vt2 = v2 + mu2 * phi.apply(x)
        v2 = vt2 - mu2 * project_l2_ball(vt2 / mu2, data_ball)
        h_val, grad = h_value_and_grad(G, x, zeta)
        xt = project_box(x - sigma * grad - sigma * (psi.adjoint(v1) + phi.adjoint(v2)),
                         0.0, 1.0)
        x_new = 2.0 * xt - x

        if not np.isfinite(x_new).all():
            raise NumericalDivergenceError("PnP iterate became non-finite")

        member, diag = in_credible_region(xt, region, phi, psi, y,
                                          rel_tol=opts.membership_rel_tol)
        rel = float(np.linalg.norm(x_new - x) / max(np.linalg.norm(x), EPS_NORM))
        trace.h_value.append(h_val)
        trace.grad_norm.append(float(np.linalg.norm(grad)))
        trace.data_slack.append(diag.data_slack)
        trace.l1_slack.append(diag.l1_slack)
        trace.rel_change.append(rel)

        x = x_new
        if member and rel <= opts.tol:
            converged = True
            break

    return xt, trace, converged


def rho_alpha(x_map, x_dd, G):
    """||x_dd - G(x_dd)|| / ||x_map - G(x_map)||, the test statistic."""
    denom = float(np.linalg.norm(x_map - G.apply(x_map)))
    if denom <= 1e-12 * math.sqrt(x_map.size):
        raise DegenerateStructureError(
            "reference image contains no structure under this inpainting operator")
    num = float(np.linalg.norm(x_dd - G.apply(x_dd)))
    return max(num / denom, 0.0)


def decide(rho, tau=0.02, alpha=0.01):
    """Reject the no-structure hypothesis iff rho exceeds tau.

    A small rho never *accepts* the hypothesis: structure-free and
    structured images can both agree with the data, so the outcome is
    merely inconclusive.
    """
    if not 0.0 < tau < 1.0:
        raise ConfigurationError(f"tau={tau} must lie in (0, 1)")
    if not 0.0 < alpha < 1.0:
        raise ConfigurationError(f"alpha={alpha} must lie in (0, 1)")
    return "reject_H0" if rho > tau else "inconclusive"


@dataclass(frozen=True)
class TestReport:
    """Hypothesis-test outcome plus the diagnostics needed to audit it."""

    mode: str
    alpha: float
    tau: float
    rho_alpha: float
    decision: str
    iterations: int
    converged: bool
    data_slack: float
    l1_slack: float
    box_violation: float
    h_value: float
    grad_norm: float
    seed: int
    config: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "mode": self.mode,
            "alpha": self.alpha,
            "tau": self.tau,
            "rho_alpha": self.rho_alpha,
            "decision": self.decision,
            "iterations": self.iterations,
            "converged": self.converged,
            "slacks": {
                "data_ball": self.data_slack,
                "l1_ball": self.l1_slack,
                "box": self.box_violation,
                "h_value": self.h_value,
                "grad_norm": self.grad_norm,
            },
            "seed": self.seed,
            "config": self.config,
        }
