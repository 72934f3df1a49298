"""Compound-Poisson path simulation and statistical verification.

Terminal wealths are simulated under the insurers' own models and under
the reinsurer's distorted pricing measure; the Kullback-Leibler penalty
is added analytically (it is deterministic given the compensators), so
only the wealth part carries Monte Carlo noise.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .contracts import Contract, aggregate_loss, premium, retention
from .errors import NonIntegrable, ValidationError
from .insurer import best_response
from .measures import CompensatorField, InsurerSpec, SeverityModel, kl_rate

# replications are processed in fixed-size blocks, each with its own RNG
# stream keyed by (master seed, block index); results are therefore
# identical no matter how blocks are distributed across workers
_BLOCK = 1 << 13

_QUANTILE_KNOTS = 2048


@dataclass(frozen=True)
class SimConfig:
    """Simulation horizon, replication budget, and initial balances."""

    horizon: float = 1.0
    replications: int = 10_000
    seed: int = 0
    initial_wealths: tuple = ()
    initial_reserve: float = 0.0
    antithetic: bool = False

    def __post_init__(self):
        if self.horizon < 0:
            raise ValidationError("horizon must be nonnegative")
        if self.replications < 1:
            raise ValidationError("need at least one replication")

    def initial_wealth(self, k: int) -> float:
        if k < len(self.initial_wealths):
            return float(self.initial_wealths[k])
        return 0.0


@dataclass(frozen=True)
class EventPath:
    """One marked-point-process realization on [0, T]."""

    times: np.ndarray
    sizes: np.ndarray
    tag: str


def _field_quantile(field: CompensatorField):
    """Inverse cdf of the normalized density, via a fixed-knot table."""
    if not field.integrable:
        raise NonIntegrable("cannot sample from a non-integrable compensator")
    mass = field.total_mass()
    hi = 8.0
    while True:
        z = np.linspace(0.0, hi, 1 << 16)
        dens = np.asarray(field(z), dtype=float)
        cum = np.concatenate([[0.0], np.cumsum(0.5 * (dens[1:] + dens[:-1]) * np.diff(z))])
        if cum[-1] >= mass * (1.0 - 1e-10) or hi > 1e7:
            break
        hi *= 2.0
    u_grid = cum / cum[-1]
    # strictly increasing cdf knots so the inverse interpolation is well posed
    keep = np.concatenate([[True], np.diff(u_grid) > 0])
    u_grid, z = u_grid[keep], z[keep]
    uk = np.linspace(0.0, 1.0, _QUANTILE_KNOTS)
    zk = np.interp(uk, u_grid, z)

    def q(u):
        return np.interp(u, uk, zk)

    return q


def _quantile_fn(model):
    if isinstance(model, SeverityModel):
        return lambda u: model.quantile(np.clip(u, 1e-15, 1.0 - 1e-16))
    if isinstance(model, CompensatorField):
        return _field_quantile(model)
    raise TypeError(f"cannot sample from {type(model).__name__}")


def simulate_compound_poisson(intensity: float, model, horizon: float, seed) -> EventPath:
    """One compound-Poisson path: Poisson(intensity * horizon) events at
    uniform times with i.i.d. marks from the given claim-size model."""
    if intensity <= 0:
        raise ValidationError("intensity must be positive")
    if horizon < 0:
        raise ValidationError("horizon must be nonnegative")
    tag = model.kind if isinstance(model, SeverityModel) else "compensator"
    if horizon == 0:
        return EventPath(times=np.empty(0), sizes=np.empty(0), tag=tag)
    rng = np.random.default_rng(seed)
    n = rng.poisson(intensity * horizon)
    times = np.sort(rng.uniform(0.0, horizon, n))
    sizes = np.asarray(_quantile_fn(model)(rng.random(n)), dtype=float)
    return EventPath(times=times, sizes=sizes, tag=tag)


def _claim_blocks(intensity: float, quantile, sim: SimConfig):
    """Yield (replications-in-block, claim sizes, per-claim replication
    index) triples with reproducible per-block RNG streams."""
    done = 0
    block = 0
    while done < sim.replications:
        b = min(_BLOCK, sim.replications - done)
        rng = np.random.default_rng([sim.seed, block])
        if sim.antithetic:
            half = (b + 1) // 2
            counts_half = rng.poisson(intensity * sim.horizon, half)
            counts = np.repeat(counts_half, 2)[:b]
            u_half = rng.random(int(counts_half.sum()))
            offsets = np.concatenate([[0], np.cumsum(counts_half)])
            parts = []
            for j in range(b):
                u = u_half[offsets[j // 2] : offsets[j // 2 + 1]]
                parts.append(u if j % 2 == 0 else 1.0 - u)
            u_all = np.concatenate(parts) if parts else np.empty(0)
        else:
            counts = rng.poisson(intensity * sim.horizon, b)
            u_all = rng.random(int(counts.sum()))
        sizes = np.asarray(quantile(u_all), dtype=float)
        rep_idx = np.repeat(np.arange(b), counts)
        yield b, sizes, rep_idx
        done += b
        block += 1


def _mean_and_stderr(total, total_sq, n):
    mean = total / n
    var = max(total_sq / n - mean * mean, 0.0)
    return mean, np.sqrt(var / n)


def estimate_insurer_objective(
    insurer: InsurerSpec,
    contract: Contract,
    a: float,
    c: float,
    sim: SimConfig,
    index: int = 0,
):
    """Sample mean and standard error of the insurer's exponential
    utility of terminal wealth at control a and quoted loading c."""
    a = contract.validate_control(a)
    drift = premium("insurer", insurer, contract, a, insurer.theta) - premium(
        "reinsurer", insurer, contract, a, c
    )
    base = sim.initial_wealth(index) + drift * sim.horizon
    g = insurer.gamma
    quantile = _quantile_fn(insurer.severity)
    total = total_sq = 0.0
    n = 0
    for b, sizes, rep_idx in _claim_blocks(insurer.lam, quantile, sim):
        retained = np.bincount(
            rep_idx, weights=np.asarray(retention(contract, sizes, a)), minlength=b
        )
        util = -np.exp(-g * (base - retained)) / g
        if sim.antithetic and b % 2 == 0:
            util = 0.5 * (util[0::2] + util[1::2])
        total += float(util.sum())
        total_sq += float((util * util).sum())
        n += util.size
    return _mean_and_stderr(total, total_sq, n)


def estimate_reinsurer_objective(market, c, field: CompensatorField, sim: SimConfig):
    """Sample mean and standard error of the reinsurer's penalized
    objective: terminal reserve under the candidate pricing measure plus
    the analytic Kullback-Leibler penalty."""
    if not field.integrable:
        raise NonIntegrable("candidate compensator has infinite mass")
    c = np.asarray(c, dtype=float)
    alpha = [
        best_response(ins, contract, ck)
        for ins, contract, ck in zip(market.insurers, market.contracts, c)
    ]
    income = sum(
        premium("reinsurer", ins, contract, ak, ck)
        for ins, contract, ak, ck in zip(market.insurers, market.contracts, alpha, c)
    )
    penalty = 0.0
    if market.epsilon > 0:
        penalty = (sim.horizon / market.epsilon) * sum(
            ins.pi
            * kl_rate(field, CompensatorField(evaluator=ins.compensator_density))
            for ins in market.insurers
        )
    intensity = field.total_mass()
    quantile = _quantile_fn(field)
    contracts = market.contracts
    base = sim.initial_reserve + income * sim.horizon
    total = total_sq = 0.0
    n = 0
    for b, sizes, rep_idx in _claim_blocks(intensity, quantile, sim):
        paid = np.bincount(
            rep_idx,
            weights=np.asarray(aggregate_loss(contracts, alpha, sizes)),
            minlength=b,
        )
        reserve = base - paid
        if sim.antithetic and b % 2 == 0:
            reserve = 0.5 * (reserve[0::2] + reserve[1::2])
        total += float(reserve.sum())
        total_sq += float((reserve * reserve).sum())
        n += reserve.size
    mean, stderr = _mean_and_stderr(total, total_sq, n)
    return mean + penalty, stderr


def radon_nikodym_mean(candidate: CompensatorField, insurer: InsurerSpec, sim: SimConfig):
    """Mean and standard error of the change-of-measure density
    dQ/dP_k over paths simulated under insurer k's own model.

    The density of the candidate marked-point-process law against the
    insurer's compound-Poisson law is
    exp(T (lambda_k - Lambda)) * prod_i candidate(Z_i) / nu_k(Z_i),
    a mean-one martingale when both compensators are deterministic.
    """
    if not candidate.integrable:
        raise NonIntegrable("candidate compensator has infinite mass")
    lam_mass = candidate.total_mass()
    log_const = sim.horizon * (insurer.lam - lam_mass)
    quantile = _quantile_fn(insurer.severity)
    total = total_sq = 0.0
    n = 0
    for b, sizes, rep_idx in _claim_blocks(insurer.lam, quantile, sim):
        ratio = np.asarray(candidate(sizes), dtype=float) / np.asarray(
            insurer.compensator_density(sizes), dtype=float
        )
        log_prod = np.bincount(rep_idx, weights=np.log(ratio), minlength=b)
        dens = np.exp(log_const + log_prod)
        if sim.antithetic and b % 2 == 0:
            dens = 0.5 * (dens[0::2] + dens[1::2])
        total += float(dens.sum())
        total_sq += float((dens * dens).sum())
        n += dens.size
    return _mean_and_stderr(total, total_sq, n)
