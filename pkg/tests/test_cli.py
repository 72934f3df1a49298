import json
import os

import numpy as np
import pytest

from reinsgame.cli import FigureTable, main, run_command
from reinsgame.closedform import exponential_xl_oracle
from reinsgame.config import parse_market_spec, write_market_spec
from reinsgame.errors import ParseError, ValidationError
from reinsgame.reinsurer import solve_equilibrium

CONFIG_DIR = os.path.join(os.path.dirname(__file__), os.pardir, "configs")


def _config(name):
    return os.path.join(CONFIG_DIR, name)


def _write(tmp_path, text, name="market.cfg"):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return str(path)


MINIMAL_XL = """\
contract = xl
epsilon = 0.0
insurer.1.gamma = 0.5
insurer.1.lambda = 2.0
insurer.1.severity = exponential
insurer.1.scale = 1.0
insurer.1.pi = 1.0
"""


class TestParseMarketSpec:
    def test_bundled_proportional_config(self):
        market = parse_market_spec(_config("gamma_proportional.cfg"))
        assert market.contract_kind == "proportional"
        assert market.epsilon == 0.1
        assert market.objective == "wealth"
        assert market.horizon == 1.0
        assert [ins.gamma for ins in market.insurers] == [0.5, 0.5]
        assert [ins.lam for ins in market.insurers] == [2.0, 2.5]
        assert [ins.severity.shape for ins in market.insurers] == [1.5, 2.0]
        assert [ins.severity.scale for ins in market.insurers] == [1.0, 1.25]
        assert [ins.pi for ins in market.insurers] == [0.5, 0.5]

    def test_bundled_capped_config(self):
        market = parse_market_spec(_config("capped_xl.cfg"))
        assert market.contract_kind == "capped_xl"
        assert list(market.limits) == [1.0, 1.0]

    def test_bundled_utility_config(self):
        market = parse_market_spec(_config("capped_xl_utility.cfg"))
        assert market.objective == "utility"
        assert market.risk_aversion == 0.5

    def test_missing_required_fields(self):
        with pytest.raises(ValidationError, match="epsilon"):
            parse_market_spec_text("contract = xl\n" + MINIMAL_XL.split("\n", 2)[2])

    def test_parse_error_line_numbers(self, tmp_path):
        path = _write(tmp_path, "contract = xl\nthis is not a pair\n")
        with pytest.raises(ParseError, match=":2:"):
            parse_market_spec(path)

    def test_unknown_key(self, tmp_path):
        path = _write(tmp_path, MINIMAL_XL + "discount = 0.03\n")
        with pytest.raises(ParseError, match="unknown key"):
            parse_market_spec(path)

    def test_duplicate_key(self, tmp_path):
        path = _write(tmp_path, MINIMAL_XL + "epsilon = 0.1\n")
        with pytest.raises(ParseError, match="duplicate"):
            parse_market_spec(path)

    def test_non_numeric_value(self, tmp_path):
        path = _write(tmp_path, MINIMAL_XL.replace("epsilon = 0.0", "epsilon = none"))
        with pytest.raises(ParseError, match="needs a number"):
            parse_market_spec(path)

    def test_index_gap(self, tmp_path):
        text = MINIMAL_XL.replace("insurer.1.", "insurer.3.")
        path = _write(tmp_path, text)
        with pytest.raises(ValidationError, match="without gaps"):
            parse_market_spec(path)

    def test_exponential_rejects_shape(self, tmp_path):
        path = _write(tmp_path, MINIMAL_XL + "insurer.1.shape = 1.5\n")
        with pytest.raises(ValidationError, match="no shape"):
            parse_market_spec(path)

    def test_limit_requires_capped(self, tmp_path):
        path = _write(tmp_path, MINIMAL_XL + "insurer.1.limit = 1.0\n")
        with pytest.raises(ValidationError, match="capped_xl"):
            parse_market_spec(path)

    def test_weight_renormalization_warns(self, tmp_path):
        text = MINIMAL_XL.replace("insurer.1.pi = 1.0", "insurer.1.pi = 0.8")
        path = _write(tmp_path, text)
        with pytest.warns(UserWarning, match="renormalizing"):
            market = parse_market_spec(path)
        assert market.insurers[0].pi == pytest.approx(1.0)

    @pytest.mark.parametrize(
        "name",
        [
            "gamma_proportional.cfg",
            "exponential_xl.cfg",
            "capped_xl.cfg",
            "capped_xl_utility.cfg",
        ],
    )
    def test_write_round_trip(self, tmp_path, name):
        market = parse_market_spec(_config(name))
        out = tmp_path / "copy.cfg"
        write_market_spec(market, out)
        again = parse_market_spec(str(out))
        assert again.contract_kind == market.contract_kind
        assert again.epsilon == market.epsilon
        assert again.objective == market.objective
        assert again.risk_aversion == market.risk_aversion
        if market.limits is not None:
            assert list(again.limits) == [float(l) for l in market.limits]
        for a, b in zip(again.insurers, market.insurers):
            assert (a.gamma, a.lam, a.pi, a.theta) == (b.gamma, b.lam, b.pi, b.theta)
            assert a.severity.kind == b.severity.kind
            assert a.severity.scale == b.severity.scale


def parse_market_spec_text(text, tmp_path=None):
    import tempfile

    with tempfile.NamedTemporaryFile("w", suffix=".cfg", delete=False) as fh:
        fh.write(text)
        path = fh.name
    try:
        return parse_market_spec(path)
    finally:
        os.unlink(path)


class TestFigureTable:
    def test_row_width_mismatch(self):
        with pytest.raises(ValidationError, match="row width"):
            FigureTable("t", ["a", "b"], [[1.0]])

    def test_non_finite_rejected(self):
        with pytest.raises(ValidationError, match="non-finite"):
            FigureTable("t", ["a"], [[np.inf]])

    def test_csv_format(self, tmp_path):
        table = FigureTable("t", ["x", "y"], [[1.0 / 3.0, 2.0]])
        path = tmp_path / "t.csv"
        table.write_csv(path)
        raw = path.read_bytes()
        assert b"\r" not in raw
        assert raw.decode() == "x,y\n0.333333333333,2\n"


class TestRunCommand:
    def test_equilibrium_artifacts(self, tmp_path):
        market = parse_market_spec(_config("exponential_xl.cfg"))
        run_command("equilibrium", market, tmp_path)
        csv_path = tmp_path / "equilibrium.csv"
        json_path = tmp_path / "equilibrium.json"
        assert csv_path.exists() and json_path.exists()
        payload = json.loads(json_path.read_text())
        res = solve_equilibrium(market)
        assert payload["alpha"] == pytest.approx(list(res.alpha), rel=1e-12)
        assert payload["eta"] == pytest.approx(list(res.eta), rel=1e-12)
        assert payload["diagnostics"]["integrability"] is True
        assert payload["diagnostics"]["residual_norm"] <= 1e-12
        header = csv_path.read_text().splitlines()[0]
        assert header == "insurer,alpha,eta,premium"

    def test_output_is_byte_deterministic(self, tmp_path):
        market = parse_market_spec(_config("capped_xl.cfg"))
        run_command("equilibrium", market, tmp_path / "a")
        run_command("equilibrium", market, tmp_path / "b")
        for name in ("equilibrium.csv", "equilibrium.json"):
            assert (tmp_path / "a" / name).read_bytes() == (
                tmp_path / "b" / name
            ).read_bytes()

    def test_limit_sweep_approaches_uncapped(self, tmp_path):
        market = parse_market_spec(_config("capped_xl.cfg"))
        from reinsgame.cli import _replace_market

        market = _replace_market(market, epsilon=0.0)
        table = run_command(
            "sweep", market, tmp_path, param="limit", start=2.0, stop=6.0, steps=5
        )
        assert (tmp_path / "sweep_limit.csv").exists()
        assert (tmp_path / "sweep_limit.png").stat().st_size > 0
        a_inf, e_inf = exponential_xl_oracle(
            (1.0, 1.25), (2.0, 2.5), (0.5, 0.5), 0.0, (0.5, 0.5)
        )
        p1_inf = (1.0 + e_inf[0]) * 2.0 * np.exp(-a_inf[0])
        col = table.columns.index("premium_1")
        gaps = [abs(row[col] - p1_inf) for row in table.rows]
        assert all(g1 < g0 for g0, g1 in zip(gaps, gaps[1:]))

    def test_total_intensity_figure(self, tmp_path):
        market = parse_market_spec(_config("gamma_proportional.cfg"))
        table = run_command("figure", market, tmp_path, figure_id="total-intensity")
        assert (tmp_path / "figure_total_intensity.csv").exists()
        assert (tmp_path / "figure_total_intensity.png").stat().st_size > 0
        lam = [row[1] for row in table.rows]
        assert table.rows[0][0] == 0.0
        assert lam[0] == pytest.approx(2.1000188168650746, rel=1e-8)
        assert all(b >= a for a, b in zip(lam, lam[1:]))

    def test_compensators_figure_columns(self, tmp_path):
        market = parse_market_spec(_config("gamma_proportional.cfg"))
        table = run_command("figure", market, tmp_path, figure_id="compensators")
        assert table.columns == ["z", "nu_1", "nu_2", "geometric", "distorted"]
        # the ambiguity tilt lifts the pricing density above the barycentre
        geo = np.array([row[3] for row in table.rows])
        dist = np.array([row[4] for row in table.rows])
        assert np.all(dist >= geo - 1e-14)

    def test_simulate_artifacts(self, tmp_path):
        market = parse_market_spec(_config("capped_xl.cfg"))
        table = run_command("simulate", market, tmp_path, reps=2048, seed=1)
        assert (tmp_path / "simulate.csv").exists()
        assert len(table.rows) == market.n + 1
        assert all(row[2] >= 0.0 for row in table.rows)

    def test_unknown_command(self, tmp_path):
        market = parse_market_spec(_config("exponential_xl.cfg"))
        with pytest.raises(ValidationError):
            run_command("audit", market, tmp_path)

    def test_sweep_m_requires_capped(self, tmp_path):
        market = parse_market_spec(_config("exponential_xl.cfg"))
        with pytest.raises(ValidationError):
            run_command(
                "sweep", market, tmp_path, param="m", start=0.1, stop=0.5, steps=2
            )


class TestMainExitCodes:
    def test_success(self, tmp_path):
        code = main(
            [
                "equilibrium",
                "--spec",
                _config("exponential_xl.cfg"),
                "--out",
                str(tmp_path),
            ]
        )
        assert code == 0
        assert (tmp_path / "equilibrium.json").exists()

    def test_missing_spec_file(self, tmp_path, capsys):
        code = main(
            ["equilibrium", "--spec", str(tmp_path / "nope.cfg"), "--out", str(tmp_path)]
        )
        assert code == 2
        assert "error" in capsys.readouterr().err

    def test_invalid_config(self, tmp_path, capsys):
        bad = _write(tmp_path, "contract = xl\n")  # no epsilon, no insurers
        code = main(["equilibrium", "--spec", bad, "--out", str(tmp_path)])
        assert code == 2

    def test_solver_failure_exit_code(self, tmp_path, capsys):
        # risk-averse reinsurer with an uncapped layer: not integrable
        text = MINIMAL_XL.replace("epsilon = 0.0", "epsilon = 0.1")
        text += "objective = utility\nrisk_aversion = 0.5\n"
        path = _write(tmp_path, text)
        code = main(["equilibrium", "--spec", path, "--out", str(tmp_path)])
        assert code == 3
        assert "solver failure" in capsys.readouterr().err

    def test_figure_cli(self, tmp_path):
        code = main(
            [
                "figure",
                "--spec",
                _config("gamma_proportional.cfg"),
                "--out",
                str(tmp_path),
                "--id",
                "compensators",
            ]
        )
        assert code == 0
        assert (tmp_path / "figure_compensators.png").stat().st_size > 0
