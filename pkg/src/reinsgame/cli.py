"""Command-line driver: equilibrium solves, parameter sweeps, Monte
Carlo verification, and figure-data emission (CSV plus a PNG render)."""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys

import numpy as np

from .config import parse_market_spec
from .errors import (
    ConstraintViolated,
    ControlOutOfDomain,
    OutOfDomain,
    ParseError,
    ReinsGameError,
    ValidationError,
)
from .measures import barycentre_density
from .montecarlo import SimConfig, estimate_insurer_objective, estimate_reinsurer_objective
from .reinsurer import MarketSpec, solve_equilibrium

FIGURE_IDS = (
    "compensators",
    "total-intensity",
    "loadings-vs-weight",
    "xl-compensators",
    "xl-loadings",
    "capped-sweep",
    "utility-sweep",
)

SWEEP_PARAMS = ("eps", "pi2", "limit", "m")


@dataclasses.dataclass
class FigureTable:
    """Columnar data behind one figure or report."""

    figure_id: str
    columns: list
    rows: list

    def __post_init__(self):
        for row in self.rows:
            if len(row) != len(self.columns):
                raise ValidationError("row width does not match the column schema")
            if not all(np.isfinite(v) for v in row):
                raise ValidationError(f"non-finite value in figure {self.figure_id!r}")

    def write_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(",".join(self.columns) + "\n")
            for row in self.rows:
                fh.write(",".join(format(float(v), ".12g") for v in row) + "\n")


def _replace_market(market: MarketSpec, **overrides) -> MarketSpec:
    fields = dict(
        insurers=market.insurers,
        contract_kind=market.contract_kind,
        limits=market.limits,
        epsilon=market.epsilon,
        objective=market.objective,
        risk_aversion=market.risk_aversion,
        horizon=market.horizon,
        quad_cfg=market.quad_cfg,
        solver_cfg=market.solver_cfg,
    )
    fields.update(overrides)
    return MarketSpec(**fields)


def _with_weight(market: MarketSpec, pi2: float) -> MarketSpec:
    if market.n != 2:
        raise ValidationError("weight sweeps require exactly two insurers")
    ins = [
        dataclasses.replace(market.insurers[0], pi=1.0 - pi2),
        dataclasses.replace(market.insurers[1], pi=pi2),
    ]
    return _replace_market(market, insurers=ins)


def _with_sweep_value(market: MarketSpec, param: str, value: float) -> MarketSpec:
    if param == "eps":
        return _replace_market(market, epsilon=value)
    if param == "pi2":
        return _with_weight(market, value)
    if param == "limit":
        if market.contract_kind != "capped_xl":
            raise ValidationError("limit sweeps require a capped_xl contract")
        return _replace_market(market, limits=[value] * market.n)
    if param == "m":
        if market.contract_kind != "capped_xl" and market.epsilon > 0:
            raise ValidationError(
                "risk-aversion sweeps require a capped_xl contract when eps > 0"
            )
        return _replace_market(market, objective="utility", risk_aversion=value)
    raise ValidationError(f"unknown sweep parameter {param!r}")


def _per_insurer(names, n):
    return [f"{name}_{k + 1}" for name in names for k in range(n)]


def _sweep_rows(market: MarketSpec, param: str, grid) -> FigureTable:
    n = market.n
    columns = [param] + _per_insurer(("alpha", "eta", "premium"), n) + ["Lambda"]
    rows = []
    for value in grid:
        res = solve_equilibrium(_with_sweep_value(market, param, float(value)))
        rows.append(
            [float(value)]
            + list(res.alpha)
            + list(res.eta)
            + list(res.premiums)
            + [res.total_intensity]
        )
    return FigureTable(figure_id=f"sweep-{param}", columns=columns, rows=rows)


def _figure_compensators(market: MarketSpec, figure_id: str) -> FigureTable:
    res = solve_equilibrium(market)
    vg = barycentre_density(market.insurers, "geometric")
    z = np.linspace(0.05, 20.0, 400)
    columns = (
        ["z"]
        + [f"nu_{k + 1}" for k in range(market.n)]
        + ["geometric", "distorted"]
    )
    rows = []
    for zi in z:
        rows.append(
            [zi]
            + [float(ins.compensator_density(zi)) for ins in market.insurers]
            + [float(vg(zi)), float(res.compensator(zi))]
        )
    return FigureTable(figure_id=figure_id, columns=columns, rows=rows)


def _figure_total_intensity(market: MarketSpec) -> FigureTable:
    rows = []
    for eps in np.linspace(0.0, 0.3, 31):
        res = solve_equilibrium(_replace_market(market, epsilon=float(eps)))
        rows.append([float(eps), res.total_intensity])
    return FigureTable("total-intensity", ["eps", "Lambda"], rows)


def _figure_loadings_vs_weight(market: MarketSpec) -> FigureTable:
    columns = ["pi2"] + _per_insurer(("eta", "alpha"), 2)
    rows = []
    for pi2 in np.linspace(0.0, 1.0, 21):
        res = solve_equilibrium(_with_weight(market, float(pi2)))
        rows.append([float(pi2)] + list(res.eta) + list(res.alpha))
    return FigureTable("loadings-vs-weight", columns, rows)


def _figure_loadings_vs_eps(market: MarketSpec) -> FigureTable:
    columns = ["eps"] + _per_insurer(("alpha", "eta"), market.n)
    rows = []
    for eps in np.linspace(0.0, 0.3, 31):
        res = solve_equilibrium(_replace_market(market, epsilon=float(eps)))
        rows.append([float(eps)] + list(res.alpha) + list(res.eta))
    return FigureTable("xl-loadings", columns, rows)


def _figure_capped_sweep(market: MarketSpec) -> FigureTable:
    table = _sweep_rows(market, "limit", np.linspace(0.25, 6.0, 24))
    return FigureTable("capped-sweep", table.columns, table.rows)


def _figure_utility_sweep(market: MarketSpec) -> FigureTable:
    columns = ["m"] + _per_insurer(("alpha", "eta"), market.n)
    rows = []
    for m in np.linspace(0.1, 1.0, 10):
        res = solve_equilibrium(
            _with_sweep_value(market, "m", float(m))
        )
        rows.append([float(m)] + list(res.alpha) + list(res.eta))
    return FigureTable("utility-sweep", columns, rows)


def _build_figure(figure_id: str, market: MarketSpec) -> FigureTable:
    if figure_id in ("compensators", "xl-compensators"):
        return _figure_compensators(market, figure_id)
    if figure_id == "total-intensity":
        return _figure_total_intensity(market)
    if figure_id == "loadings-vs-weight":
        return _figure_loadings_vs_weight(market)
    if figure_id == "xl-loadings":
        return _figure_loadings_vs_eps(market)
    if figure_id == "capped-sweep":
        return _figure_capped_sweep(market)
    if figure_id == "utility-sweep":
        return _figure_utility_sweep(market)
    raise ValidationError(f"unknown figure id {figure_id!r}")


def _json_safe(obj):
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (np.floating, float)):
        return None if not np.isfinite(obj) else float(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, np.ndarray):
        return [_json_safe(v) for v in obj]
    if isinstance(obj, (list, tuple)):
        return [_json_safe(v) for v in obj]
    if isinstance(obj, dict):
        return {str(k): _json_safe(v) for k, v in obj.items()}
    return obj


def run_command(command: str, market: MarketSpec, out_dir, **options) -> FigureTable:
    """Dispatch one subcommand and write its artifacts under out_dir."""
    os.makedirs(out_dir, exist_ok=True)

    if command == "equilibrium":
        res = solve_equilibrium(market)
        table = FigureTable(
            "equilibrium",
            ["insurer", "alpha", "eta", "premium"],
            [
                [float(k + 1), res.alpha[k], res.eta[k], res.premiums[k]]
                for k in range(market.n)
            ],
        )
        table.write_csv(os.path.join(out_dir, "equilibrium.csv"))
        payload = _json_safe(
            {
                "alpha": res.alpha,
                "eta": res.eta,
                "premiums": res.premiums,
                "total_intensity": res.total_intensity,
                "diagnostics": res.diagnostics,
            }
        )
        with open(
            os.path.join(out_dir, "equilibrium.json"), "w", encoding="utf-8", newline="\n"
        ) as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
            fh.write("\n")
        return table

    if command == "sweep":
        param = options["param"]
        if param not in SWEEP_PARAMS:
            raise ValidationError(f"sweep parameter must be one of {SWEEP_PARAMS}")
        grid = np.linspace(options["start"], options["stop"], options["steps"])
        table = _sweep_rows(market, param, grid)
        table.write_csv(os.path.join(out_dir, f"sweep_{param}.csv"))
        from .plotting import render_table

        render_table(table, os.path.join(out_dir, f"sweep_{param}.png"))
        return table

    if command == "simulate":
        res = solve_equilibrium(market)
        sim = SimConfig(
            horizon=market.horizon,
            replications=options.get("reps", 100_000),
            seed=options.get("seed", 0),
        )
        rows = []
        obj, se = estimate_reinsurer_objective(market, res.eta, res.compensator, sim)
        rows.append([0.0, obj, se])
        for k, ins in enumerate(market.insurers):
            mean, err = estimate_insurer_objective(
                ins, market.contracts[k], res.alpha[k], res.eta[k], sim, index=k
            )
            rows.append([float(k + 1), mean, err])
        table = FigureTable("simulate", ["entity", "estimate", "std_error"], rows)
        table.write_csv(os.path.join(out_dir, "simulate.csv"))
        return table

    if command == "figure":
        figure_id = options["figure_id"]
        table = _build_figure(figure_id, market)
        stem = figure_id.replace("-", "_")
        table.write_csv(os.path.join(out_dir, f"figure_{stem}.csv"))
        from .plotting import render_table

        render_table(table, os.path.join(out_dir, f"figure_{stem}.png"))
        return table

    raise ValidationError(f"unknown command {command!r}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="reinsgame",
        description="Stackelberg reinsurance-game equilibria, sweeps, and "
        "Monte Carlo verification",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--spec", required=True, help="market description file")
        p.add_argument("--out", required=True, help="output directory")

    common(sub.add_parser("equilibrium", help="solve one market"))

    p_sweep = sub.add_parser("sweep", help="solve along a parameter grid")
    common(p_sweep)
    p_sweep.add_argument("--param", required=True, choices=SWEEP_PARAMS)
    p_sweep.add_argument("--from", dest="start", type=float, required=True)
    p_sweep.add_argument("--to", dest="stop", type=float, required=True)
    p_sweep.add_argument("--steps", type=int, required=True)

    p_sim = sub.add_parser("simulate", help="Monte Carlo check of the equilibrium")
    common(p_sim)
    p_sim.add_argument("--reps", type=int, default=100_000)
    p_sim.add_argument("--seed", type=int, default=0)

    p_fig = sub.add_parser("figure", help="emit figure data (CSV + PNG)")
    common(p_fig)
    p_fig.add_argument("--id", dest="figure_id", required=True, choices=FIGURE_IDS)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    options = {
        key: value
        for key, value in vars(args).items()
        if key not in ("command", "spec", "out")
    }
    try:
        market = parse_market_spec(args.spec)
        run_command(args.command, market, args.out, **options)
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ParseError, ValidationError, ControlOutOfDomain, OutOfDomain) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ConstraintViolated as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ReinsGameError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
