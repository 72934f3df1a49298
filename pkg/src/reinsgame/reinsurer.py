"""Distorted pricing compensator and the Stackelberg equilibrium solver."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import integrate

from .contracts import (
    CAPPED_XL,
    PROPORTIONAL,
    XL,
    Contract,
    aggregate_loss,
    aggregate_loss_bound,
    aggregate_loss_tail_slope,
    ceded_mean,
)
from .errors import MaxIterations, NonFinite, NonIntegrable, ValidationError
from .insurer import best_response, response_sensitivity, second_order_check
from .measures import (
    CompensatorField,
    GammaTag,
    InsurerSpec,
    PiecewiseExpTag,
    barycentre_density,
    total_intensity,
)
from .numerics import (
    QuadratureConfig,
    SolverConfig,
    integrate_upper_tail,
    lambert_w,
    solve_fixed_point_system,
)

WEALTH = "wealth"
UTILITY = "utility"


@dataclass
class MarketSpec:
    """Full description of one reinsurance market."""

    insurers: list[InsurerSpec]
    contract_kind: str
    limits: Sequence[float] | None = None
    epsilon: float = 0.0
    objective: str = WEALTH
    risk_aversion: float | None = None
    horizon: float = 1.0
    quad_cfg: QuadratureConfig = field(default_factory=QuadratureConfig)
    solver_cfg: SolverConfig = field(
        # the loading system is solved in log(1+c); 1e-13 there keeps the
        # raw loading residual below 1e-12 for moderate loadings
        default_factory=lambda: SolverConfig(tolerance=1e-13, damping=0.5)
    )

    def __post_init__(self):
        if not self.insurers:
            raise ValidationError("market needs at least one insurer")
        if self.epsilon < 0:
            raise ValidationError("ambiguity aversion must be nonnegative")
        if self.horizon <= 0:
            raise ValidationError("horizon must be positive")
        if self.objective not in (WEALTH, UTILITY):
            raise ValidationError(f"unknown objective {self.objective!r}")
        if self.objective == UTILITY:
            if self.risk_aversion is None or self.risk_aversion <= 0:
                raise ValidationError("utility objective requires risk aversion m > 0")
        pis = sum(ins.pi for ins in self.insurers)
        if abs(pis - 1.0) > 1e-9:
            raise ValidationError(f"insurer weights sum to {pis}, expected 1")
        n = len(self.insurers)
        if self.epsilon > 0:
            for k, ins in enumerate(self.insurers):
                sev = ins.severity
                if sev.kind in ("exponential", "gamma"):
                    bound = min(1.0 / ins.gamma, 1.0 / (n * self.epsilon))
                    if sev.scale >= bound:
                        warnings.warn(
                            f"insurer {k + 1}: severity scale {sev.scale} is not "
                            f"below min(1/gamma, 1/(n*eps)) = {bound}; the "
                            "equilibrium may not exist",
                            stacklevel=2,
                        )
        self.contracts = self._build_contracts()

    def _build_contracts(self) -> list[Contract]:
        n = len(self.insurers)
        if self.contract_kind == CAPPED_XL:
            if self.limits is None or len(self.limits) != n:
                raise ValidationError("capped XL requires one policy limit per insurer")
            return [Contract(CAPPED_XL, limit=float(l)) for l in self.limits]
        return [Contract(self.contract_kind) for _ in range(n)]

    @property
    def n(self) -> int:
        return len(self.insurers)


@dataclass
class IntegrabilityResult:
    integrable: bool
    reason: str | None = None


@dataclass
class EquilibriumResult:
    """Stackelberg equilibrium with solver diagnostics."""

    alpha: np.ndarray
    eta: np.ndarray
    premiums: np.ndarray
    total_intensity: float
    compensator: CompensatorField
    diagnostics: dict


def _geometric_barycentre(market: MarketSpec) -> CompensatorField:
    return barycentre_density(market.insurers, "geometric")


def check_integrability(market: MarketSpec, alpha: Sequence[float]) -> IntegrabilityResult:
    """Analytic integrability test for the distorted compensator.

    Compares the exponential growth induced by the aggregate-loss
    distortion against the decay rate of the geometric barycentre; a
    bounded aggregate loss (all layers capped) is always integrable.
    """
    eps = market.epsilon
    if eps == 0.0:
        return IntegrabilityResult(True)
    bound = aggregate_loss_bound(market.contracts)
    if market.objective == UTILITY:
        if np.isinf(bound):
            return IntegrabilityResult(
                False,
                "utility objective with unbounded aggregate loss: the doubly "
                "exponential distortion has infinite mass for any eps > 0",
            )
        return IntegrabilityResult(True)
    if not np.isinf(bound):
        return IntegrabilityResult(True)
    slope = aggregate_loss_tail_slope(market.contracts, alpha)
    decay = sum(ins.pi * ins.severity.tail_rate() for ins in market.insurers)
    if eps * slope >= decay:
        return IntegrabilityResult(
            False,
            f"distortion growth eps*slope = {eps * slope:.6g} is not below the "
            f"barycentre decay rate {decay:.6g}",
        )
    return IntegrabilityResult(True)


def _piecewise_tag(market, vg_tag, alpha):
    """Piecewise-exponential closed form, valid for exponential severities."""
    contracts = market.contracts
    eps = market.epsilon
    knots = set()
    for contract, a in zip(contracts, alpha):
        if contract.kind in (XL, CAPPED_XL) and a > 0:
            knots.add(float(a))
        if contract.kind == CAPPED_XL:
            knots.add(float(a) + contract.limit)
    bps = np.array([0.0] + sorted(knots))
    base_slope = -1.0 / vg_tag.scale
    base_off = np.log(vg_tag.coef)
    offsets, slopes = [], []
    l_at = np.asarray(aggregate_loss(contracts, alpha, bps))
    for i in range(bps.size):
        lo = bps[i]
        if i + 1 < bps.size:
            hi = bps[i + 1]
            s_l = (float(aggregate_loss(contracts, alpha, hi)) - l_at[i]) / (hi - lo)
        else:
            s_l = aggregate_loss_tail_slope(contracts, alpha)
        offsets.append(base_off + eps * (l_at[i] - s_l * lo))
        slopes.append(base_slope + eps * s_l)
    return PiecewiseExpTag(bps, offsets, slopes)


def distorted_compensator(market: MarketSpec, alpha: Sequence[float]) -> CompensatorField:
    """Pricing compensator: geometric barycentre times an exponential
    (wealth mode) or doubly exponential (utility mode) loss distortion."""
    alpha = np.asarray(alpha, dtype=float)
    vg = _geometric_barycentre(market)
    eps = market.epsilon
    status = check_integrability(market, alpha)
    if eps == 0.0:
        vg.integrable = status.integrable
        return vg
    contracts = market.contracts

    if market.objective == WEALTH:
        def evaluator(z):
            return vg(z) * np.exp(eps * np.asarray(aggregate_loss(contracts, alpha, z)))
    else:
        m = market.risk_aversion
        def evaluator(z):
            big_l = np.asarray(aggregate_loss(contracts, alpha, z))
            return vg(z) * np.exp((eps / m) * np.expm1(m * big_l))

    tag = None
    if status.integrable and market.objective == WEALTH and isinstance(vg.tag, GammaTag):
        if market.contract_kind == PROPORTIONAL:
            new_inv_scale = 1.0 / vg.tag.scale - eps * aggregate_loss_tail_slope(
                contracts, alpha
            )
            tag = GammaTag(coef=vg.tag.coef, shape=vg.tag.shape, scale=1.0 / new_inv_scale)
        elif vg.tag.shape == 1.0:
            tag = _piecewise_tag(market, vg.tag, alpha)
    return CompensatorField(evaluator=evaluator, tag=tag, integrable=status.integrable)


def _layer_weight_integral(market, field, k, alpha):
    """``int d_a r_k * [exp(m L)] * field dz`` for insurer k's contract."""
    contract = market.contracts[k]
    a = float(alpha[k])
    utility = market.objective == UTILITY
    m = market.risk_aversion if utility else 0.0
    contracts = market.contracts

    if not utility and isinstance(field.tag, PiecewiseExpTag):
        if contract.kind == XL:
            return field.tag.integral(a, np.inf)
        if contract.kind == CAPPED_XL:
            return field.tag.integral(a, a + contract.limit)
    if not utility and isinstance(field.tag, GammaTag) and contract.kind == PROPORTIONAL:
        return field.tag.moment(1)

    if utility:
        def weight(z):
            return np.exp(m * np.asarray(aggregate_loss(contracts, alpha, z)))
    else:
        def weight(z):
            return 1.0

    if contract.kind == PROPORTIONAL:
        return integrate_upper_tail(
            lambda z: z * float(field(z)) * float(weight(z)), 0.0, market.quad_cfg
        )
    if contract.kind == XL:
        return integrate_upper_tail(
            lambda z: float(field(z)) * float(weight(z)), a, market.quad_cfg
        )
    # capped XL: finite layer with interior kinks at the other insurers' knots
    lo, hi = a, a + contract.limit
    pts = sorted(
        p
        for j, cj in enumerate(market.contracts)
        for p in ((alpha[j],) if cj.kind == XL else (alpha[j], alpha[j] + cj.limit))
        if lo < p < hi
    )
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        val, _ = integrate.quad(
            lambda z: float(field(z)) * float(weight(z)),
            lo,
            hi,
            points=pts or None,
            epsabs=1e-14,
            epsrel=1e-13,
            limit=200,
        )
    return val


def _layer_probability(insurer, contract, a):
    """``int d_a r F(dz)`` under the insurer's own model."""
    sev = insurer.severity
    if contract.kind == PROPORTIONAL:
        return sev.mean()
    if contract.kind == XL:
        return sev.survival(a)
    return sev.cdf(a + contract.limit) - sev.cdf(a)


def loading_residual(market: MarketSpec, c: Sequence[float]) -> np.ndarray:
    """Residual of the reinsurer's first-order loading system.

    Component k is (1 + c_k) minus the optimal-markup expression
    evaluated at the insurers' best responses; its roots are the
    equilibrium safety loadings.
    """
    c = np.asarray(c, dtype=float)
    alpha = np.array(
        [
            best_response(ins, contract, ck)
            for ins, contract, ck in zip(market.insurers, market.contracts, c)
        ]
    )
    field = distorted_compensator(market, alpha)
    if not field.integrable:
        raise NonIntegrable(check_integrability(market, alpha).reason)
    out = np.empty_like(c)
    for k, (ins, contract) in enumerate(zip(market.insurers, market.contracts)):
        psi = ceded_mean(ins.severity, contract, alpha[k])
        d_layer = _layer_probability(ins, contract, alpha[k])
        sens = response_sensitivity(ins, contract, c[k], alpha[k])
        s_int = _layer_weight_integral(market, field, k, alpha)
        rhs = psi / (sens * d_layer) + s_int / (ins.lam * d_layer)
        out[k] = (1.0 + c[k]) - rhs
    return out


def _initial_loadings(market: MarketSpec) -> np.ndarray:
    guess = np.empty(market.n)
    for k, ins in enumerate(market.insurers):
        if market.contract_kind == PROPORTIONAL:
            guess[k] = ins.theta if ins.theta > 0 else 0.5
        else:
            guess[k] = np.expm1(ins.gamma * ins.severity.quantile(0.5))
    return guess


def _solve_loadings(market: MarketSpec, eta0, calls) -> np.ndarray:
    def residual(u):
        # iterate in u = log(1+c): loadings live on [0, inf) and can span
        # orders of magnitude across insurers, so the log transform keeps
        # the Picard map well scaled; iterates that stray negative are
        # evaluated at the projection and tilted back
        calls["n"] += 1
        u = np.asarray(u, dtype=float)
        clamped = np.maximum(u, 0.0)
        c = np.expm1(clamped)
        rhs = (1.0 + c) - loading_residual(market, c)
        if np.any(rhs <= 0.0):
            raise NonFinite("loading fixed-point map left the positive cone")
        return (clamped - np.log(rhs)) + (u - clamped)

    u_star = solve_fixed_point_system(residual, np.log1p(eta0), market.solver_cfg)
    return np.expm1(np.maximum(u_star, 0.0))


def _with_objective(market: MarketSpec, objective, m) -> MarketSpec:
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")  # construction warnings already issued
        return MarketSpec(
            insurers=market.insurers,
            contract_kind=market.contract_kind,
            limits=market.limits,
            epsilon=market.epsilon,
            objective=objective,
            risk_aversion=m,
            horizon=market.horizon,
            quad_cfg=market.quad_cfg,
            solver_cfg=market.solver_cfg,
        )


def _solve_utility_loadings(market: MarketSpec, calls) -> np.ndarray:
    """Utility-mode loadings by continuation in the risk aversion m.

    The loading system can have several fixed points; the equilibrium is
    pinned down as the branch continuously connected to the m -> 0
    (expected-wealth) limit, traced by warm-started solves with an
    adaptive step in m.
    """
    wealth = _with_objective(market, WEALTH, None)
    try:
        eta = _solve_loadings(wealth, _initial_loadings(wealth), calls)
    except MaxIterations:
        eta = _initial_loadings(market)
    target = market.risk_aversion
    done = 0.0
    step = target
    while done < target:
        m_try = min(done + step, target)
        try:
            eta = _solve_loadings(_with_objective(market, UTILITY, m_try), eta, calls)
        except MaxIterations:
            step *= 0.5
            if step < target / 64.0:
                raise
            continue
        done = m_try
        step *= 2.0
    return eta


def solve_equilibrium(market: MarketSpec) -> EquilibriumResult:
    """Solve the loading fixed-point system and assemble the equilibrium."""
    if market.objective == UTILITY and market.epsilon > 0:
        if np.isinf(aggregate_loss_bound(market.contracts)):
            raise NonIntegrable(
                "utility objective with unbounded aggregate loss cannot be priced"
            )
    calls = {"n": 0}
    if market.objective == UTILITY:
        eta = _solve_utility_loadings(market, calls)
    else:
        eta = _solve_loadings(market, _initial_loadings(market), calls)
    alpha = np.array(
        [
            best_response(ins, contract, ck)
            for ins, contract, ck in zip(market.insurers, market.contracts, eta)
        ]
    )
    field = distorted_compensator(market, alpha)
    premiums = np.array(
        [
            (1.0 + eta[k]) * ins.lam * ceded_mean(ins.severity, market.contracts[k], alpha[k])
            for k, ins in enumerate(market.insurers)
        ]
    )
    res = loading_residual(market, eta)
    flags = [
        second_order_check(ins, contract, eta[k], alpha[k])
        for k, (ins, contract) in enumerate(zip(market.insurers, market.contracts))
    ]
    landscape = _residual_landscape(market, eta)
    diagnostics = {
        "residual_norm": float(np.max(np.abs(res))),
        "residual_evaluations": calls["n"],
        "second_order": flags,
        "integrability": check_integrability(market, alpha).integrable,
        "residual_landscape": landscape,
    }
    return EquilibriumResult(
        alpha=alpha,
        eta=eta,
        premiums=premiums,
        total_intensity=total_intensity(field),
        compensator=field,
        diagnostics=diagnostics,
    )


def _residual_landscape(market, eta, factors=(0.5, 0.75, 1.0, 1.25, 1.5)):
    """Coarse per-coordinate residual scan around the solved loadings."""
    rows = []
    for k in range(market.n):
        for f in factors:
            probe = np.array(eta, dtype=float)
            probe[k] = eta[k] * f
            try:
                norm = float(np.max(np.abs(loading_residual(market, probe))))
            except Exception:
                norm = np.nan
            rows.append((k, float(probe[k]), norm))
    return rows


def crossover_loss(m: float, branch: str = "minus-one") -> float:
    """Aggregate-loss level where the two objectives' distortions cross."""
    if m <= 0:
        raise ValidationError("risk aversion m must be positive")
    return -lambert_w(-m * np.exp(-m), branch) / m - 1.0
