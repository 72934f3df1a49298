"""Severity distributions, Poisson compensators, barycentres, and KL rates."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import special, stats

from .errors import Divergent, OutOfDomain, ValidationError
from .numerics import QuadratureConfig, integrate_upper_tail

log = logging.getLogger(__name__)

_TAB_QUAD = QuadratureConfig(abs_tol=1e-12, rel_tol=1e-12)


def _as_float(z, out):
    return float(out) if np.isscalar(z) else out


@dataclass(frozen=True)
class SeverityModel:
    """Claim-size distribution on the positive half-line.

    ``exponential`` and ``gamma`` kinds carry analytic moments; the
    ``tabulated`` kind interpolates a density grid linearly and
    extrapolates the tail exponentially beyond the last knot.
    """

    kind: str
    shape: float = 1.0
    scale: float = 1.0
    grid_z: np.ndarray | None = None
    grid_density: np.ndarray | None = None
    _tab: dict = field(default=None, repr=False, compare=False)

    @classmethod
    def exponential(cls, scale: float) -> "SeverityModel":
        if scale <= 0:
            raise ValidationError("exponential scale must be positive")
        return cls(kind="exponential", shape=1.0, scale=float(scale))

    @classmethod
    def gamma(cls, shape: float, scale: float) -> "SeverityModel":
        if shape <= 0 or scale <= 0:
            raise ValidationError("gamma shape and scale must be positive")
        return cls(kind="gamma", shape=float(shape), scale=float(scale))

    @classmethod
    def tabulated(cls, z: Sequence[float], density: Sequence[float]) -> "SeverityModel":
        z = np.asarray(z, dtype=float)
        f = np.asarray(density, dtype=float)
        if z.ndim != 1 or z.size < 3 or z.shape != f.shape:
            raise ValidationError("tabulated model needs matching 1-d grids, >= 3 knots")
        if np.any(np.diff(z) <= 0) or z[0] < 0:
            raise ValidationError("tabulated grid must be strictly increasing and >= 0")
        if np.any(f < 0):
            raise ValidationError("tabulated density must be nonnegative")
        if f[-1] <= 0 or f[-2] <= 0 or f[-1] >= f[-2]:
            raise ValidationError("tabulated density must decay at its last two knots")
        tail_rate = np.log(f[-2] / f[-1]) / (z[-1] - z[-2])
        body = np.concatenate([[0.0], np.cumsum(0.5 * (f[1:] + f[:-1]) * np.diff(z))])
        tail_mass = f[-1] / tail_rate
        total = body[-1] + tail_mass
        if abs(total - 1.0) > 1e-8:
            raise ValidationError(
                f"tabulated density integrates to {total:.10f}, not 1 within 1e-8"
            )
        mean_body = np.trapezoid(z * f, z)
        mean_tail = f[-1] * (z[-1] / tail_rate + 1.0 / tail_rate**2)
        tab = {
            "tail_rate": float(tail_rate),
            "cum": body,
            "mean": float(mean_body + mean_tail),
        }
        obj = cls(kind="tabulated", grid_z=z, grid_density=f)
        object.__setattr__(obj, "_tab", tab)
        return obj

    # -- basic evaluations -------------------------------------------------

    def density(self, z):
        zz = np.asarray(z, dtype=float)
        if self.kind in ("exponential", "gamma"):
            out = stats.gamma.pdf(zz, a=self.shape, scale=self.scale)
        else:
            out = np.interp(zz, self.grid_z, self.grid_density, left=0.0)
            beyond = zz > self.grid_z[-1]
            if np.any(beyond):
                rate = self._tab["tail_rate"]
                out = np.where(
                    beyond,
                    self.grid_density[-1] * np.exp(-rate * (zz - self.grid_z[-1])),
                    out,
                )
            out = np.where(zz < 0, 0.0, out)
        return _as_float(z, out)

    def cdf(self, z):
        zz = np.asarray(z, dtype=float)
        if self.kind in ("exponential", "gamma"):
            out = stats.gamma.cdf(zz, a=self.shape, scale=self.scale)
        else:
            gz, gf, cum = self.grid_z, self.grid_density, self._tab["cum"]
            idx = np.clip(np.searchsorted(gz, zz, side="right") - 1, 0, gz.size - 2)
            z0 = gz[idx]
            f0, f1 = gf[idx], gf[idx + 1]
            w = np.clip((zz - z0) / (gz[idx + 1] - z0), 0.0, 1.0)
            fmid = f0 + w * (f1 - f0)
            out = cum[idx] + 0.5 * (f0 + fmid) * (zz - z0) * (zz <= gz[-1])
            rate = self._tab["tail_rate"]
            tail = 1.0 - (gf[-1] / rate) * np.exp(-rate * np.maximum(zz - gz[-1], 0.0))
            out = np.where(zz > gz[-1], tail, out)
            out = np.where(zz < gz[0], 0.0, np.minimum(out, 1.0))
        return _as_float(z, out)

    def survival(self, z):
        return _as_float(z, 1.0 - np.asarray(self.cdf(z)))

    def mean(self) -> float:
        if self.kind in ("exponential", "gamma"):
            return self.shape * self.scale
        return self._tab["mean"]

    def quantile(self, p):
        pp = np.asarray(p, dtype=float)
        if np.any((pp <= 0) | (pp >= 1)):
            raise OutOfDomain("quantile requires p in (0, 1)")
        if self.kind in ("exponential", "gamma"):
            out = stats.gamma.ppf(pp, a=self.shape, scale=self.scale)
            return _as_float(p, out)
        # monotone bisection on the interpolated cdf
        lo = np.zeros_like(pp)
        hi = np.full_like(pp, self.grid_z[-1] + 60.0 / self._tab["tail_rate"])
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            below = np.asarray(self.cdf(mid)) < pp
            lo = np.where(below, mid, lo)
            hi = np.where(below, hi, mid)
        return _as_float(p, 0.5 * (lo + hi))

    def integrated_survival(self, a: float, b: float) -> float:
        """``int_a^b survival(z) dz`` (b may be inf)."""
        if self.kind in ("exponential", "gamma"):
            def emin(t):  # E[min(Z, t)]
                if np.isinf(t):
                    return self.mean()
                return self.mean() * stats.gamma.cdf(
                    t, a=self.shape + 1.0, scale=self.scale
                ) + t * stats.gamma.sf(t, a=self.shape, scale=self.scale)
            return emin(b) - emin(a)
        if np.isinf(b):
            return integrate_upper_tail(lambda z: self.survival(z), a, _TAB_QUAD)
        zs = np.linspace(a, b, 2001)
        return float(np.trapezoid([self.survival(z) for z in zs], zs))

    def tail_rate(self) -> float:
        """Asymptotic exponential decay rate of the density."""
        if self.kind in ("exponential", "gamma"):
            return 1.0 / self.scale
        return self._tab["tail_rate"]

    def tilted_moment(self, order: int, tilt: float) -> float:
        """``int z^order exp(tilt z) F(dz)``; closed form for the gamma family."""
        if order not in (1, 2):
            raise ValueError("order must be 1 or 2")
        if self.kind in ("exponential", "gamma"):
            m, xi = self.shape, self.scale
            if tilt * xi >= 1.0:
                raise Divergent(f"tilt {tilt} at or beyond the rate 1/{xi}")
            base = 1.0 - tilt * xi
            if order == 1:
                return m * xi / base ** (m + 1.0)
            return m * (m + 1.0) * xi**2 / base ** (m + 2.0)
        if tilt >= self._tab["tail_rate"]:
            raise Divergent("tilt at or beyond the tabulated tail decay rate")
        return integrate_upper_tail(
            lambda z: z**order * np.exp(tilt * z) * self.density(z), 0.0, _TAB_QUAD
        )


def severity_eval(model: SeverityModel, query: str, arg: float) -> float:
    """Uniform dispatcher over density / cdf / survival / mean / quantile."""
    if query == "mean":
        return model.mean()
    if query == "quantile":
        return model.quantile(arg)
    if arg < 0:
        raise OutOfDomain(f"{query} requires arg >= 0, got {arg}")
    if query == "density":
        return model.density(arg)
    if query == "cdf":
        return model.cdf(arg)
    if query == "survival":
        return model.survival(arg)
    raise ValueError(f"unknown query {query!r}")


@dataclass(frozen=True)
class InsurerSpec:
    """One insurer: risk aversion, claim model, loading, and prior weight."""

    gamma: float
    lam: float
    severity: SeverityModel
    theta: float = 0.0
    pi: float = 1.0

    def __post_init__(self):
        if self.gamma <= 0 or self.lam <= 0:
            raise ValidationError("gamma and lambda must be positive")
        if self.theta < 0 or self.pi < 0:
            raise ValidationError("theta and pi must be nonnegative")

    def compensator_density(self, z):
        return self.lam * self.severity.density(z)


class PiecewiseExpTag:
    """Density of the form exp(offset_i + slope_i * z) between breakpoints.

    Breakpoints start at 0; the last segment extends to infinity.
    """

    def __init__(self, breakpoints, offsets, slopes):
        self.breakpoints = np.asarray(breakpoints, dtype=float)
        self.offsets = np.asarray(offsets, dtype=float)
        self.slopes = np.asarray(slopes, dtype=float)
        if self.breakpoints[0] != 0.0:
            raise ValueError("first breakpoint must be 0")
        if self.offsets.size != self.breakpoints.size:
            raise ValueError("one (offset, slope) pair per segment")

    def __call__(self, z):
        zz = np.asarray(z, dtype=float)
        idx = np.clip(
            np.searchsorted(self.breakpoints, zz, side="right") - 1,
            0,
            self.breakpoints.size - 1,
        )
        out = np.exp(self.offsets[idx] + self.slopes[idx] * zz)
        out = np.where(zz < 0, 0.0, out)
        return _as_float(z, out)

    @property
    def integrable(self) -> bool:
        return self.slopes[-1] < 0.0

    def integral(self, lo: float = 0.0, hi: float = np.inf) -> float:
        """Exact ``int_lo^hi`` of the piecewise exponential."""
        if hi <= lo:
            return 0.0
        total = 0.0
        bps = self.breakpoints
        for i in range(bps.size):
            seg_lo = max(lo, bps[i])
            seg_hi = bps[i + 1] if i + 1 < bps.size else np.inf
            seg_hi = min(hi, seg_hi)
            if seg_hi <= seg_lo:
                continue
            u, s = self.offsets[i], self.slopes[i]
            if np.isinf(seg_hi):
                if s >= 0:
                    raise Divergent("piecewise exponential has nonnegative tail slope")
                total += -np.exp(u + s * seg_lo) / s
            elif s == 0.0:
                total += np.exp(u) * (seg_hi - seg_lo)
            else:
                total += (np.exp(u + s * seg_hi) - np.exp(u + s * seg_lo)) / s
        return total


@dataclass(frozen=True)
class GammaTag:
    """Closed-form tag: density coef * z**(shape-1) * exp(-z/scale)."""

    coef: float
    shape: float
    scale: float

    def __call__(self, z):
        zz = np.asarray(z, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = self.coef * zz ** (self.shape - 1.0) * np.exp(-zz / self.scale)
        out = np.where(zz < 0, 0.0, np.where(zz == 0, 0.0 if self.shape > 1 else out, out))
        return _as_float(z, out)

    def mass(self) -> float:
        if self.scale <= 0:
            raise Divergent("gamma-tagged field with nonpositive scale")
        return self.coef * special.gamma(self.shape) * self.scale**self.shape

    def moment(self, order: int) -> float:
        return (
            self.coef
            * special.gamma(self.shape + order)
            * self.scale ** (self.shape + order)
        )


@dataclass
class CompensatorField:
    """Nonnegative claim-intensity density z -> sigma(z) on the half-line."""

    evaluator: Callable
    tag: GammaTag | PiecewiseExpTag | None = None
    integrable: bool = True
    _mass: float | None = None

    def __call__(self, z):
        return self.evaluator(z)

    def total_mass(self) -> float:
        if self._mass is None:
            self._mass = total_intensity(self)
        return self._mass


def barycentre_density(insurers: Sequence[InsurerSpec], kind: str) -> CompensatorField:
    """Weighted arithmetic or geometric mean of the insurers' compensators."""
    weights = np.array([ins.pi for ins in insurers], dtype=float)
    if abs(weights.sum() - 1.0) > 1e-9:
        raise ValidationError(f"barycentre weights sum to {weights.sum()}, expected 1")
    if kind == "arithmetic":
        def v_a(z):
            zz = np.asarray(z, dtype=float)
            out = sum(w * ins.compensator_density(zz) for w, ins in zip(weights, insurers))
            return _as_float(z, np.asarray(out))
        mass = float(sum(w * ins.lam for w, ins in zip(weights, insurers)))
        fld = CompensatorField(evaluator=v_a, tag=None, integrable=True)
        fld._mass = mass
        return fld
    if kind != "geometric":
        raise ValueError(f"unknown barycentre kind {kind!r}")

    active = [(w, ins) for w, ins in zip(weights, insurers) if w > 0]

    def v_g(z):
        zz = np.asarray(z, dtype=float)
        logs = np.zeros_like(zz, dtype=float)
        zero_mask = np.zeros_like(zz, dtype=bool)
        for w, ins in active:
            d = np.asarray(ins.compensator_density(zz), dtype=float)
            pos = d > 0
            zero_mask |= ~pos
            with np.errstate(divide="ignore"):
                logs += np.where(pos, w * np.log(np.where(pos, d, 1.0)), 0.0)
        if np.any(zero_mask):
            log.warning(
                "geometric barycentre support mismatch: some component density "
                "is zero where its weight is positive"
            )
        out = np.where(zero_mask, 0.0, np.exp(logs))
        return _as_float(z, out)

    tag = None
    if all(ins.severity.kind in ("exponential", "gamma") for _, ins in active):
        shape = sum(w * ins.severity.shape for w, ins in active)
        inv_scale = sum(w / ins.severity.scale for w, ins in active)
        coef = float(
            np.prod(
                [
                    (
                        ins.lam
                        / (special.gamma(ins.severity.shape) * ins.severity.scale ** ins.severity.shape)
                    )
                    ** w
                    for w, ins in active
                ]
            )
        )
        tag = GammaTag(coef=coef, shape=float(shape), scale=1.0 / float(inv_scale))
    return CompensatorField(evaluator=v_g, tag=tag, integrable=True)


def kl_rate(
    candidate: CompensatorField,
    reference: CompensatorField,
    cfg: QuadratureConfig | None = None,
) -> float:
    """Per-unit-time KL rate ``int (s log(s/v) - s + v) dz`` >= 0."""
    cfg = cfg or QuadratureConfig(abs_tol=1e-11, rel_tol=1e-11)

    def integrand(z):
        s = float(candidate(z))
        v = float(reference(z))
        if s == 0.0:
            return v
        if v == 0.0:
            raise Divergent(f"candidate not absolutely continuous at z={z}")
        return s * np.log(s / v) - s + v

    val = integrate_upper_tail(integrand, 0.0, cfg)
    return max(val, 0.0)


def total_intensity(field: CompensatorField) -> float:
    """Total mass of a compensator field (claims per unit time)."""
    if not field.integrable:
        raise Divergent("compensator flagged non-integrable")
    if isinstance(field.tag, GammaTag):
        return field.tag.mass()
    if isinstance(field.tag, PiecewiseExpTag):
        return field.tag.integral(0.0, np.inf)
    return integrate_upper_tail(lambda z: float(field(z)), 0.0, _TAB_QUAD)
