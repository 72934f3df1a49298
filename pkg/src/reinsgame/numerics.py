"""Deterministic numerical kernel.

Semi-infinite quadrature, safeguarded scalar root-finding, a damped
Picard/Newton solver for small nonlinear systems, and the Lambert W
function.  Everything here is a pure function of its inputs.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy import integrate, special

from .errors import (
    Divergent,
    MaxIterations,
    NoBracket,
    NonFinite,
    OutOfDomain,
)


@dataclass(frozen=True)
class QuadratureConfig:
    """Tolerances and truncation policy for semi-infinite integrals."""

    abs_tol: float = 1e-10
    rel_tol: float = 1e-10
    max_subdivisions: int = 64

    def __post_init__(self):
        if self.abs_tol <= 0 or self.rel_tol <= 0:
            raise ValueError("quadrature tolerances must be positive")
        if self.max_subdivisions < 1:
            raise ValueError("max_subdivisions must be >= 1")


@dataclass(frozen=True)
class SolverConfig:
    """Tolerances for root-finding and fixed-point solving."""

    tolerance: float = 1e-12
    max_iterations: int = 200
    damping: float = 1.0
    fd_step: float = 1e-6

    def __post_init__(self):
        if self.tolerance <= 0:
            raise ValueError("tolerance must be positive")
        if not 0.0 < self.damping <= 1.0:
            raise ValueError("damping must lie in (0, 1]")


def integrate_upper_tail(
    f: Callable[[float], float],
    lower: float = 0.0,
    cfg: QuadratureConfig | None = None,
) -> float:
    """Evaluate ``int_lower^inf f(z) dz`` by panel doubling.

    The upper cutoff is doubled until the last panel contributes less
    than the configured tolerance; panels that keep growing signal a
    divergent integrand.
    """
    cfg = cfg or QuadratureConfig()

    def checked(z):
        v = f(z)
        if not np.isfinite(v):
            raise NonFinite(f"integrand returned non-finite value at z={z}")
        return v

    total = 0.0
    a = float(lower)
    width = max(1.0, abs(lower))
    prev_panel = None
    growing = 0
    for _ in range(cfg.max_subdivisions):
        b = a + width
        with warnings.catch_warnings():
            # roundoff chatter from quad near machine-precision targets;
            # accuracy is controlled by the panel-doubling stop rule
            warnings.simplefilter("ignore", integrate.IntegrationWarning)
            panel, _ = integrate.quad(
                checked, a, b, epsabs=0.1 * cfg.abs_tol, epsrel=0.1 * cfg.rel_tol, limit=200
            )
        total += panel
        if abs(panel) <= cfg.abs_tol + cfg.rel_tol * abs(total):
            return total
        if prev_panel is not None and abs(panel) >= abs(prev_panel):
            growing += 1
            if growing >= 8:
                raise Divergent("tail mass fails to decay under truncation doubling")
        else:
            growing = 0
        prev_panel = panel
        a = b
        width *= 2.0
    raise Divergent("tail integral did not settle within the subdivision budget")


def solve_scalar_root(
    f: Callable[[float], float],
    bracket: tuple[float, float],
    cfg: SolverConfig | None = None,
) -> float:
    """Safeguarded Newton-bisection for a sign-changing bracket."""
    cfg = cfg or SolverConfig()
    lo, hi = float(bracket[0]), float(bracket[1])
    flo, fhi = f(lo), f(hi)
    if not (np.isfinite(flo) and np.isfinite(fhi)):
        raise NonFinite("residual non-finite at bracket endpoint")
    if abs(flo) <= cfg.tolerance:
        return lo
    if abs(fhi) <= cfg.tolerance:
        return hi
    if flo * fhi > 0:
        raise NoBracket(f"f({lo})={flo} and f({hi})={fhi} have the same sign")

    x = 0.5 * (lo + hi)
    fx = f(x)
    for _ in range(cfg.max_iterations):
        if abs(fx) <= cfg.tolerance:
            return x
        if fx * flo < 0:
            hi = x
        else:
            lo, flo = x, fx
        h = cfg.fd_step * (1.0 + abs(x))
        deriv = (f(x + h) - f(x - h)) / (2.0 * h)
        x_new = x - fx / deriv if deriv != 0.0 else None
        if x_new is None or not (lo < x_new < hi):
            x_new = 0.5 * (lo + hi)
        x = x_new
        fx = f(x)
        if not np.isfinite(fx):
            raise NonFinite(f"residual non-finite at x={x}")
    raise MaxIterations("scalar root-finder exhausted its iteration budget")


def _fd_jacobian(residual, x, r, step):
    n = x.size
    jac = np.empty((n, n))
    for j in range(n):
        h = step * (1.0 + abs(x[j]))
        xp = x.copy()
        xm = x.copy()
        xp[j] += h
        xm[j] -= h
        jac[:, j] = (np.asarray(residual(xp)) - np.asarray(residual(xm))) / (2.0 * h)
    return jac


def solve_fixed_point_system(
    residual: Callable[[np.ndarray], Sequence[float]],
    x0: Sequence[float],
    cfg: SolverConfig | None = None,
) -> np.ndarray:
    """Drive ``residual`` to zero by damped Picard iteration.

    Switches to Newton steps (central-difference Jacobian) once the
    Picard step shrinks below 1e-3; a singular or non-improving Newton
    step falls back to the Picard update.
    """
    cfg = cfg or SolverConfig()
    x = np.array(x0, dtype=float)
    if not np.all(np.isfinite(x)):
        raise NonFinite("initial guess is not finite")
    r = np.asarray(residual(x), dtype=float)
    damping = cfg.damping
    norm = np.max(np.abs(r))
    for _ in range(cfg.max_iterations):
        if norm <= cfg.tolerance:
            return x
        step = -damping * r
        if np.max(np.abs(step)) < 1e-3:
            try:
                jac = _fd_jacobian(residual, x, r, cfg.fd_step)
                newton = np.linalg.solve(jac, -r)
                if np.all(np.isfinite(newton)):
                    step = newton
            except np.linalg.LinAlgError:
                pass  # keep the Picard step
        x_new = x + step
        r_new = np.asarray(residual(x_new), dtype=float)
        if not np.all(np.isfinite(r_new)):
            raise NonFinite("residual non-finite during iteration")
        norm_new = np.max(np.abs(r_new))
        if norm_new > norm and damping > 1e-4:
            damping *= 0.5
            continue
        damping = min(cfg.damping, damping * 1.5)
        x, r, norm = x_new, r_new, norm_new
    raise MaxIterations(
        f"fixed-point solver stalled with residual norm {norm:.3e}"
    )


def lambert_w(x: float, branch: str = "principal") -> float:
    """Lambert W on the principal or minus-one branch.

    Returns w with ``w * exp(w) == x`` to 1e-12.
    """
    if branch == "principal":
        k = 0
        if x < -np.exp(-1.0):
            raise OutOfDomain(f"principal branch requires x >= -1/e, got {x}")
    elif branch == "minus-one":
        k = -1
        if not -np.exp(-1.0) <= x < 0.0:
            raise OutOfDomain(f"minus-one branch requires -1/e <= x < 0, got {x}")
    else:
        raise ValueError(f"unknown branch {branch!r}")
    if x <= -np.exp(-1.0) * (1.0 - 1e-14):
        return -1.0  # branch point, where both real branches meet
    w = special.lambertw(x, k=k)
    if np.iscomplex(w) and abs(w.imag) > 1e-12:
        raise OutOfDomain(f"no real Lambert W value on branch {branch} at x={x}")
    w = float(w.real)
    # polish so the defining identity holds to 1e-12 even at branch edges
    for _ in range(4):
        ew = np.exp(w)
        err = w * ew - x
        if abs(err) <= 1e-13:
            break
        denom = ew * (1.0 + w)
        if denom == 0.0:
            break
        w -= err / denom
    return w
