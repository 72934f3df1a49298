"""Retention functions, premiums, and the reinsurer's aggregate loss."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ControlOutOfDomain, ValidationError
from .measures import InsurerSpec, SeverityModel, _as_float

PROPORTIONAL = "proportional"
XL = "xl"
CAPPED_XL = "capped_xl"

# lower clamp for the proportional control, which lives on (0, 1]
MIN_PROPORTION = 1e-9


@dataclass(frozen=True)
class Contract:
    """A reinsurance contract form: proportional, XL, or capped XL."""

    kind: str
    limit: float | None = None

    def __post_init__(self):
        if self.kind not in (PROPORTIONAL, XL, CAPPED_XL):
            raise ValidationError(f"unknown contract kind {self.kind!r}")
        if self.kind == CAPPED_XL:
            if self.limit is None or self.limit <= 0:
                raise ValidationError("capped XL requires a positive policy limit")

    def validate_control(self, a: float) -> float:
        if self.kind == PROPORTIONAL:
            if not 0.0 < a <= 1.0:
                raise ControlOutOfDomain(f"proportional control must be in (0,1], got {a}")
            return max(a, MIN_PROPORTION)
        if a < 0.0:
            raise ControlOutOfDomain(f"retention level must be >= 0, got {a}")
        return a


def retention(contract: Contract, z, a: float, derivative: str = "value"):
    """Retained loss r(z, a), or its control derivative.

    The derivative branch uses the left-continuous convention at kinks,
    which is immaterial under atomless claim-size distributions.
    """
    a = contract.validate_control(a)
    zz = np.asarray(z, dtype=float)
    if derivative == "value":
        if contract.kind == PROPORTIONAL:
            out = a * zz
        elif contract.kind == XL:
            out = np.minimum(a, zz)
        else:
            ell = contract.limit
            out = np.where(zz <= a + ell, np.minimum(a, zz), zz - ell)
    elif derivative == "d/da":
        if contract.kind == PROPORTIONAL:
            out = zz.copy()
        elif contract.kind == XL:
            out = (zz > a).astype(float)
        else:
            out = ((zz > a) & (zz <= a + contract.limit)).astype(float)
    else:
        raise ValueError(f"unknown derivative branch {derivative!r}")
    return _as_float(z, out)


def ceded(contract: Contract, z, a: float):
    """Loss share passed to the reinsurer, z - r(z, a)."""
    zz = np.asarray(z, dtype=float)
    out = zz - np.asarray(retention(contract, zz, a))
    return _as_float(z, out)


def ceded_mean(severity: SeverityModel, contract: Contract, a: float) -> float:
    """``int (z - r(z, a)) F(dz)`` via survival-function identities."""
    a = contract.validate_control(a)
    if contract.kind == PROPORTIONAL:
        return (1.0 - a) * severity.mean()
    if contract.kind == XL:
        return severity.integrated_survival(a, np.inf)
    return severity.integrated_survival(a, a + contract.limit)


def premium(
    side: str,
    insurer: InsurerSpec,
    contract: Contract,
    a: float,
    loading: float,
) -> float:
    """Premium per unit time under the expected-value principle.

    The insurer side charges policyholders (1+theta) lambda mu and is
    independent of the reinsurance contract; the reinsurer side charges
    (1+c) lambda times the expected ceded loss.
    """
    if loading < 0:
        raise ValidationError("safety loading must be nonnegative")
    if side == "insurer":
        return (1.0 + loading) * insurer.lam * insurer.severity.mean()
    if side == "reinsurer":
        return (1.0 + loading) * insurer.lam * ceded_mean(insurer.severity, contract, a)
    raise ValueError(f"unknown side {side!r}")


def aggregate_loss(contracts: Sequence[Contract], alphas: Sequence[float], z):
    """Total ceded loss across insurers for a common claim size z."""
    zz = np.asarray(z, dtype=float)
    out = np.zeros_like(zz)
    for contract, a in zip(contracts, alphas):
        out = out + np.asarray(ceded(contract, zz, a))
    return _as_float(z, out)


def aggregate_loss_tail_slope(contracts: Sequence[Contract], alphas: Sequence[float]) -> float:
    """d/dz of the aggregate loss for z beyond every kink (0 when bounded)."""
    slope = 0.0
    for contract, a in zip(contracts, alphas):
        if contract.kind == PROPORTIONAL:
            slope += 1.0 - contract.validate_control(a)
        elif contract.kind == XL:
            slope += 1.0
    return slope


def aggregate_loss_bound(contracts: Sequence[Contract]) -> float:
    """Supremum of the aggregate loss, infinite unless every layer is capped."""
    bound = 0.0
    for contract in contracts:
        if contract.kind != CAPPED_XL:
            return np.inf
        bound += contract.limit
    return bound
