"""Flat key-value market configuration files.

Schema (one ``key = value`` per line, ``#`` comments allowed)::

    contract        = proportional | xl | capped_xl
    epsilon         = 0.1
    objective       = wealth | utility          (default wealth)
    risk_aversion   = 0.5                       (required when objective = utility)
    horizon         = 1.0                       (default 1.0)
    insurer.1.gamma    = 0.5
    insurer.1.lambda   = 2.0
    insurer.1.severity = gamma | exponential
    insurer.1.shape    = 1.5                    (gamma only)
    insurer.1.scale    = 1.0
    insurer.1.pi       = 0.5
    insurer.1.theta    = 0.2                    (default 0)
    insurer.1.limit    = 1.0                    (capped_xl only)

Insurer indices must run 1..n without gaps.  Weights are renormalized
with a warning when they do not sum to one.
"""

from __future__ import annotations

import warnings

from .errors import ParseError, ValidationError
from .measures import InsurerSpec, SeverityModel
from .reinsurer import MarketSpec

_MARKET_KEYS = {"contract", "epsilon", "objective", "risk_aversion", "horizon"}
_INSURER_KEYS = {"gamma", "lambda", "severity", "shape", "scale", "pi", "theta", "limit"}


def _read_pairs(path):
    pairs = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ParseError(f"{path}:{lineno}: expected 'key = value', got {raw.strip()!r}")
            key, value = (part.strip() for part in line.split("=", 1))
            if not key or not value:
                raise ParseError(f"{path}:{lineno}: empty key or value")
            if key in pairs:
                raise ParseError(f"{path}:{lineno}: duplicate key {key!r}")
            pairs[key] = (value, lineno)
    return pairs


def _number(path, key, value, lineno):
    try:
        return float(value)
    except ValueError:
        raise ParseError(f"{path}:{lineno}: field {key!r} needs a number, got {value!r}") from None


def parse_market_spec(path) -> MarketSpec:
    """Read and validate a market description file."""
    pairs = _read_pairs(path)
    market = {}
    insurers = {}
    for key, (value, lineno) in pairs.items():
        if key in _MARKET_KEYS:
            market[key] = (value, lineno)
            continue
        parts = key.split(".")
        if len(parts) == 3 and parts[0] == "insurer" and parts[2] in _INSURER_KEYS:
            if not parts[1].isdigit() or int(parts[1]) < 1:
                raise ParseError(f"{path}:{lineno}: bad insurer index in {key!r}")
            insurers.setdefault(int(parts[1]), {})[parts[2]] = (value, lineno)
            continue
        raise ParseError(f"{path}:{lineno}: unknown key {key!r}")

    if "contract" not in market:
        raise ValidationError("missing required field 'contract'")
    if "epsilon" not in market:
        raise ValidationError("missing required field 'epsilon'")
    if not insurers:
        raise ValidationError("no insurer sections found")
    n = max(insurers)
    if sorted(insurers) != list(range(1, n + 1)):
        raise ValidationError(f"insurer indices must run 1..{n} without gaps")

    contract = market["contract"][0]
    epsilon = _number(path, "epsilon", *market["epsilon"])
    objective = market.get("objective", ("wealth", 0))[0]
    risk_aversion = None
    if "risk_aversion" in market:
        risk_aversion = _number(path, "risk_aversion", *market["risk_aversion"])
    horizon = _number(path, "horizon", *market["horizon"]) if "horizon" in market else 1.0

    specs, weights, limits = [], [], []
    for k in range(1, n + 1):
        fields = insurers[k]
        for required in ("gamma", "lambda", "severity", "scale", "pi"):
            if required not in fields:
                raise ValidationError(f"insurer {k}: missing field {required!r}")
        kind = fields["severity"][0]
        scale = _number(path, "scale", *fields["scale"])
        if kind == "exponential":
            if "shape" in fields:
                raise ValidationError(f"insurer {k}: exponential severity takes no shape")
            severity = SeverityModel.exponential(scale)
        elif kind == "gamma":
            if "shape" not in fields:
                raise ValidationError(f"insurer {k}: gamma severity needs a shape")
            severity = SeverityModel.gamma(_number(path, "shape", *fields["shape"]), scale)
        else:
            raise ValidationError(f"insurer {k}: unknown severity kind {kind!r}")
        theta = _number(path, "theta", *fields["theta"]) if "theta" in fields else 0.0
        weights.append(_number(path, "pi", *fields["pi"]))
        if contract == "capped_xl":
            if "limit" not in fields:
                raise ValidationError(f"insurer {k}: capped_xl needs a policy limit")
            limits.append(_number(path, "limit", *fields["limit"]))
        elif "limit" in fields:
            raise ValidationError(f"insurer {k}: limit is only valid for capped_xl")
        specs.append(
            dict(
                gamma=_number(path, "gamma", *fields["gamma"]),
                lam=_number(path, "lambda", *fields["lambda"]),
                severity=severity,
                theta=theta,
            )
        )

    total = sum(weights)
    if total <= 0:
        raise ValidationError("insurer weights must have positive sum")
    if abs(total - 1.0) > 1e-12:
        warnings.warn(
            f"insurer weights sum to {total:.6g}; renormalizing to 1", stacklevel=2
        )
        weights = [w / total for w in weights]

    insurer_specs = [InsurerSpec(pi=w, **spec) for spec, w in zip(specs, weights)]
    return MarketSpec(
        insurers=insurer_specs,
        contract_kind=contract,
        limits=limits or None,
        epsilon=epsilon,
        objective=objective,
        risk_aversion=risk_aversion,
        horizon=horizon,
    )


def write_market_spec(market: MarketSpec, path) -> None:
    """Write a market description that parse_market_spec reads back
    field-for-field."""
    lines = [f"contract = {market.contract_kind}", f"epsilon = {market.epsilon!r}"]
    lines.append(f"objective = {market.objective}")
    if market.risk_aversion is not None:
        lines.append(f"risk_aversion = {market.risk_aversion!r}")
    lines.append(f"horizon = {market.horizon!r}")
    for k, ins in enumerate(market.insurers, start=1):
        sev = ins.severity
        if sev.kind not in ("exponential", "gamma"):
            raise ValidationError("only exponential/gamma severities are serializable")
        lines.append(f"insurer.{k}.gamma = {ins.gamma!r}")
        lines.append(f"insurer.{k}.lambda = {ins.lam!r}")
        lines.append(f"insurer.{k}.severity = {sev.kind}")
        if sev.kind == "gamma":
            lines.append(f"insurer.{k}.shape = {sev.shape!r}")
        lines.append(f"insurer.{k}.scale = {sev.scale!r}")
        lines.append(f"insurer.{k}.pi = {ins.pi!r}")
        lines.append(f"insurer.{k}.theta = {ins.theta!r}")
        if market.contract_kind == "capped_xl":
            lines.append(f"insurer.{k}.limit = {float(market.limits[k - 1])!r}")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
