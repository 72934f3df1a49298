"""Closed-form oracles for the gamma-proportional and exponential-XL
specializations, used to cross-validate the general equilibrium solver.

The piecewise-exponential integrals here are written out locally so the
oracles stay independent of the general solver's integration path.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import special

from .errors import ConstraintViolated, MaxIterations, NoSolution, NonIntegrable
from .numerics import SolverConfig, solve_scalar_root

_SCALAR_CFG = SolverConfig(tolerance=1e-14, max_iterations=300)


@dataclass(frozen=True)
class GammaProportionalSolution:
    alpha: np.ndarray
    eta: np.ndarray
    shape: float       # pooled gamma shape of the pricing severity
    scale: float       # pooled gamma scale of the pricing severity
    total_intensity: float


def _pooled_gamma(m, xi, lam, pi, eps, ceded_total):
    shape = float(np.dot(pi, m))
    inv_scale = float(np.dot(pi, 1.0 / xi)) - eps * ceded_total
    if inv_scale <= 0:
        raise NonIntegrable("pooled pricing severity has nonpositive decay rate")
    scale = 1.0 / inv_scale
    coef = float(np.prod((lam / (special.gamma(m) * xi**m)) ** pi))
    intensity = scale**shape * special.gamma(shape) * coef
    return shape, scale, intensity


def gamma_proportional_oracle(
    m, xi, lam, gamma, eps: float, pi
) -> GammaProportionalSolution:
    """Equilibrium of the proportional game with gamma severities.

    Solves each insurer's scalar retention equation by bisection inside
    a fixed-point loop over the pooled-severity scale, which depends on
    the total ceded proportion.
    """
    m, xi, lam = np.asarray(m, float), np.asarray(xi, float), np.asarray(lam, float)
    gamma, pi = np.asarray(gamma, float), np.asarray(pi, float)
    n = m.size
    for k in range(n):
        bound = 1.0 / gamma[k] if eps == 0 else min(1.0 / gamma[k], 1.0 / (n * eps))
        if xi[k] > bound + 1e-12:
            raise ConstraintViolated(
                f"severity scale {xi[k]} exceeds min(1/gamma, 1/(n*eps)) = {bound}"
            )

    def solve_alphas(ceded_total):
        shape, scale, intensity = _pooled_gamma(m, xi, lam, pi, eps, ceded_total)
        alphas = np.empty(n)
        for k in range(n):
            const = shape * scale * intensity / (m[k] * xi[k] * lam[k])

            def h(a, k=k, const=const):
                base = 1.0 - a * gamma[k] * xi[k]
                return (
                    -base ** -(m[k] + 1.0)
                    + gamma[k] * (1.0 + m[k]) * xi[k] * (1.0 - a) * base ** -(m[k] + 2.0)
                    + const
                )

            if h(1.0) >= 0.0:
                alphas[k] = 1.0  # corner: full retention
            elif h(1e-9) <= 0.0:
                raise NoSolution(f"retention equation for insurer {k + 1} has no root")
            else:
                alphas[k] = solve_scalar_root(h, (1e-9, 1.0), _SCALAR_CFG)
        return alphas, shape, scale, intensity

    ceded = 0.5 * n
    for _ in range(200):
        alphas, shape, scale, intensity = solve_alphas(ceded)
        new_ceded = float(np.sum(1.0 - alphas))
        if abs(new_ceded - ceded) < 1e-14:
            break
        ceded = 0.5 * (ceded + new_ceded)
    else:
        raise MaxIterations("pooled-scale fixed point did not converge")
    eta = (1.0 - alphas * gamma * xi) ** -(m + 1.0) - 1.0
    return GammaProportionalSolution(
        alpha=alphas, eta=eta, shape=shape, scale=scale, total_intensity=intensity
    )


def _layer_integral(coef, rate, alphas, limits, eps, lo, hi):
    """``int_lo^hi coef * exp(-rate z + eps * sum_j min((z - a_j)+, l_j)) dz``.

    The exponent is piecewise linear with kinks at the retention levels
    and (for capped layers) at retention plus limit.
    """
    knots = [lo, hi]
    for a, l in zip(alphas, limits):
        for p in (a, a + l):
            if lo < p < hi:
                knots.append(p)
    knots = sorted(set(knots))

    def loss_at(z):
        return sum(min(max(z - a, 0.0), l) for a, l in zip(alphas, limits))

    total = 0.0
    for i in range(len(knots) - 1):
        z0, z1 = knots[i], knots[i + 1]
        zm = z0 + (0.5 * (z1 - z0) if np.isfinite(z1) else 1.0)
        active = sum(1 for a, l in zip(alphas, limits) if a < zm < a + l)
        s = -rate + eps * active
        u = np.log(coef) + eps * (loss_at(z0) - active * z0)
        if np.isinf(z1):
            if s >= 0:
                raise NonIntegrable("layer integral diverges: nonnegative exponent slope")
            total += -np.exp(u + s * z0) / s
        elif s == 0.0:
            total += np.exp(u) * (z1 - z0)
        else:
            total += (np.exp(u + s * z1) - np.exp(u + s * z0)) / s
    return total


def _xl_fixed_point(xi, lam, gamma, eps, pi, limits, max_iter=500, tol=1e-13):
    xi, lam = np.asarray(xi, float), np.asarray(lam, float)
    gamma, pi = np.asarray(gamma, float), np.asarray(pi, float)
    limits = np.asarray(limits, float)
    n = xi.size
    if np.any(gamma * xi >= 1.0):
        raise ConstraintViolated("need gamma_k * xi_k < 1 for every insurer")
    coef = float(np.prod((lam / xi) ** pi))
    rate = float(np.dot(pi, 1.0 / xi))
    if np.any(np.isinf(limits)) and eps * n >= rate:
        raise NonIntegrable(
            f"eps*n = {eps * n:.6g} reaches the barycentre decay rate {rate:.6g}"
        )

    def step(alpha):
        new = np.empty(n)
        for k in range(n):
            lo, hi = alpha[k], alpha[k] + limits[k]
            s_int = _layer_integral(coef, rate, alpha, limits, eps, lo, hi)
            if np.isinf(limits[k]):
                denom = lam[k] * np.exp(-alpha[k] / xi[k]) * (1.0 - gamma[k] * xi[k])
            else:
                denom = (
                    lam[k]
                    * np.exp(-alpha[k] / xi[k])
                    * (1.0 - np.exp(-limits[k] / xi[k]))
                    * (1.0 - gamma[k] * xi[k])
                )
            new[k] = np.log(s_int / denom) / gamma[k]
        return new

    # decoupled single-insurer solution as the starting point
    alpha = np.array(
        [
            np.log(1.0 / ((1.0 - gamma[k] * xi[k]) * max(1.0 - eps * xi[k], 1e-6)))
            / gamma[k]
            for k in range(n)
        ]
    )
    for _ in range(max_iter):
        new = step(alpha)
        if np.max(np.abs(new - alpha)) < tol:
            return new, coef, rate
        alpha = 0.5 * (alpha + new)
    raise MaxIterations("retention fixed point did not converge")


def exponential_xl_oracle(xi, lam, gamma, eps: float, pi):
    """Equilibrium retentions and loadings for uncapped XL with
    exponential severities."""
    n = np.asarray(xi).size
    alpha, _, _ = _xl_fixed_point(xi, lam, gamma, eps, pi, np.full(n, np.inf))
    eta = np.expm1(np.asarray(gamma, float) * alpha)
    return alpha, eta


def capped_xl_oracle(xi, lam, gamma, eps: float, pi, limits):
    """Equilibrium retentions, loadings, and premiums for capped XL
    with exponential severities."""
    limits = np.asarray(limits, float)
    if np.any(limits <= 0):
        raise NoSolution("policy limits must be positive")
    alpha, _, _ = _xl_fixed_point(xi, lam, gamma, eps, pi, limits)
    xi, lam = np.asarray(xi, float), np.asarray(lam, float)
    gamma = np.asarray(gamma, float)
    eta = np.expm1(gamma * alpha)
    layer_survival = xi * np.exp(-alpha / xi) * (1.0 - np.exp(-limits / xi))
    premiums = (1.0 + eta) * lam * layer_survival
    return alpha, eta, premiums
