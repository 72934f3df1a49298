"""Insurer best response to a quoted reinsurance safety loading."""

from __future__ import annotations

import numpy as np

from .contracts import CAPPED_XL, MIN_PROPORTION, PROPORTIONAL, XL, Contract
from .errors import ValidationError
from .measures import InsurerSpec
from .numerics import SolverConfig, solve_scalar_root

_ROOT_CFG = SolverConfig(tolerance=1e-13, max_iterations=300)


def best_response(insurer: InsurerSpec, contract: Contract, c: float) -> float:
    """Optimal control for a quoted safety loading c.

    XL contracts (capped or not) admit the closed form log(1+c)/gamma.
    Proportional contracts solve (1+c) mu = E[Z exp(gamma a Z)] for the
    retained proportion, returning the corner a=1 when even full
    retention leaves the first-order residual positive.
    """
    if c < 0:
        raise ValidationError("safety loading must be nonnegative")
    if contract.kind in (XL, CAPPED_XL):
        return np.log1p(c) / insurer.gamma

    sev = insurer.severity
    mu = sev.mean()

    def residual(a):
        return (1.0 + c) * mu - sev.tilted_moment(1, insurer.gamma * a)

    r_hi = residual(1.0)
    if r_hi >= 0.0:
        return 1.0  # reinsurance too expensive at any interior proportion
    r_lo = residual(MIN_PROPORTION)
    if r_lo <= 0.0:
        # the tilted moment is increasing in a, so the root sits below the
        # clamp: cede essentially everything
        return MIN_PROPORTION
    return solve_scalar_root(residual, (MIN_PROPORTION, 1.0), _ROOT_CFG)


def second_order_check(
    insurer: InsurerSpec, contract: Contract, c: float, a: float
) -> bool:
    """Second-order optimality of the first-order root.

    All supported retention functions are piecewise linear in the
    control, so the curvature integral vanishes almost everywhere and
    the condition holds vacuously.
    """
    contract.validate_control(a)
    return True


def response_sensitivity(
    insurer: InsurerSpec, contract: Contract, c: float, a: float
) -> float:
    """d(best response)/dc at a quoted loading, from the implicit
    function theorem applied to the first-order condition.

    For piecewise-linear retention the curvature term drops, leaving
    ``D / (gamma * int (d_a r)^2 exp(gamma r) F(dz))`` with
    ``D = int d_a r F(dz)``.
    """
    a = contract.validate_control(a)
    g = insurer.gamma
    if contract.kind == PROPORTIONAL:
        mu = insurer.severity.mean()
        second = insurer.severity.tilted_moment(2, g * a)
        return mu / (g * second)
    # XL and capped XL: the tilt is constant exp(gamma a) on the active layer
    return np.exp(-g * a) / g
