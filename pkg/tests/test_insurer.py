import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from reinsgame.contracts import CAPPED_XL, MIN_PROPORTION, PROPORTIONAL, XL, Contract
from reinsgame.errors import ValidationError
from reinsgame.insurer import best_response, response_sensitivity, second_order_check
from reinsgame.measures import InsurerSpec, SeverityModel


def _gamma_insurer():
    return InsurerSpec(gamma=0.5, lam=2.0, severity=SeverityModel.gamma(1.5, 1.0))


def _exp_insurer(scale=1.0, gamma=0.5):
    return InsurerSpec(gamma=gamma, lam=2.0, severity=SeverityModel.exponential(scale))


class TestBestResponse:
    def test_xl_closed_form(self):
        ins = _exp_insurer()
        for c in (0.0, 0.5, 1.0, 3.0):
            assert best_response(ins, Contract(XL), c) == pytest.approx(
                np.log1p(c) / ins.gamma
            )

    def test_capped_matches_xl(self):
        ins = _exp_insurer()
        a_xl = best_response(ins, Contract(XL), 1.0)
        a_cap = best_response(ins, Contract(CAPPED_XL, limit=2.0), 1.0)
        assert a_cap == a_xl

    def test_proportional_equilibrium_anchor(self):
        # loading and retention from the single-insurer worked example
        ins = _gamma_insurer()
        a = best_response(ins, Contract(PROPORTIONAL), 1.7258552724402243)
        assert a == pytest.approx(0.6608510711857878, abs=1e-9)

    def test_proportional_first_order_condition(self):
        ins = _gamma_insurer()
        c = 2.0
        a = best_response(ins, Contract(PROPORTIONAL), c)
        sev = ins.severity
        res = (1.0 + c) * sev.mean() - sev.tilted_moment(1, ins.gamma * a)
        assert res == pytest.approx(0.0, abs=1e-10)

    def test_proportional_corner_full_retention(self):
        # expensive reinsurance: keep everything
        ins = _gamma_insurer()
        assert best_response(ins, Contract(PROPORTIONAL), 30.0) == 1.0

    def test_proportional_corner_full_cession(self):
        # actuarially fair quote: cede essentially everything
        ins = _gamma_insurer()
        assert best_response(ins, Contract(PROPORTIONAL), 0.0) == MIN_PROPORTION

    def test_negative_loading(self):
        with pytest.raises(ValidationError):
            best_response(_exp_insurer(), Contract(XL), -0.2)

    @given(
        st.sampled_from([PROPORTIONAL, XL]),
        st.floats(min_value=0.1, max_value=5.0),
        st.floats(min_value=0.01, max_value=2.0),
    )
    @settings(max_examples=60, deadline=None)
    def test_monotone_in_loading(self, kind, c, dc):
        ins = _gamma_insurer()
        contract = Contract(kind)
        a0 = best_response(ins, contract, c)
        a1 = best_response(ins, contract, c + dc)
        assert a1 >= a0 - 1e-12


class TestSecondOrder:
    def test_always_holds_for_linear_retention(self):
        ins = _exp_insurer()
        assert second_order_check(ins, Contract(XL), 1.0, 1.2)
        assert second_order_check(ins, Contract(PROPORTIONAL), 1.0, 0.5)


class TestResponseSensitivity:
    @pytest.mark.parametrize(
        "kind,limit", [(PROPORTIONAL, None), (XL, None), (CAPPED_XL, 1.0)]
    )
    def test_matches_finite_difference(self, kind, limit):
        ins = _gamma_insurer() if kind == PROPORTIONAL else _exp_insurer()
        contract = Contract(kind, limit=limit)
        c, h = 1.5, 1e-6
        a = best_response(ins, contract, c)
        fd = (best_response(ins, contract, c + h) - best_response(ins, contract, c - h)) / (
            2.0 * h
        )
        assert response_sensitivity(ins, contract, c, a) == pytest.approx(fd, rel=1e-5)

    def test_positive(self):
        ins = _gamma_insurer()
        for c in (0.5, 1.0, 3.0):
            a = best_response(ins, Contract(PROPORTIONAL), c)
            assert response_sensitivity(ins, Contract(PROPORTIONAL), c, a) > 0.0
