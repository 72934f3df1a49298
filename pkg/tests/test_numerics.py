import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from reinsgame.errors import Divergent, MaxIterations, NoBracket, NonFinite, OutOfDomain
from reinsgame.numerics import (
    QuadratureConfig,
    SolverConfig,
    integrate_upper_tail,
    lambert_w,
    solve_fixed_point_system,
    solve_scalar_root,
)


class TestIntegrateUpperTail:
    def test_exponential_mass(self):
        assert integrate_upper_tail(lambda z: np.exp(-z), 0.0) == pytest.approx(1.0, abs=1e-10)

    def test_gamma_mean(self):
        from scipy import stats

        val = integrate_upper_tail(lambda z: z * stats.gamma.pdf(z, a=1.5, scale=2.0), 0.0)
        assert val == pytest.approx(3.0, abs=1e-9)

    def test_shifted_lower_bound(self):
        # int_2^inf e^{-z} dz = e^{-2}
        val = integrate_upper_tail(lambda z: np.exp(-z), 2.0)
        assert val == pytest.approx(np.exp(-2.0), rel=1e-10)

    def test_divergent_integrand(self):
        with pytest.raises(Divergent):
            integrate_upper_tail(lambda z: np.exp(0.1 * z), 0.0)

    def test_constant_tail_diverges(self):
        with pytest.raises(Divergent):
            integrate_upper_tail(lambda z: 1.0, 0.0)

    def test_non_finite_integrand(self):
        with pytest.raises(NonFinite):
            integrate_upper_tail(lambda z: np.nan, 0.0)


class TestSolveScalarRoot:
    def test_cosine_root(self):
        x = solve_scalar_root(np.cos, (1.0, 2.0))
        assert x == pytest.approx(np.pi / 2, abs=1e-12)

    def test_retention_equation_root(self):
        # single-insurer proportional retention equation with a Gamma(1.5, 1)
        # claim model, gamma = 0.5, no ambiguity: the pooled severity equals
        # the insurer's own, so the constant term is exactly 1
        def h(a):
            base = 1.0 - 0.5 * a
            return -base**-2.5 + 1.25 * (1.0 - a) * base**-3.5 + 1.0

        a = solve_scalar_root(h, (1e-9, 1.0))
        assert a == pytest.approx(0.6608510711857878, abs=1e-9)
        assert abs(h(a)) < 1e-11

    def test_no_bracket(self):
        with pytest.raises(NoBracket):
            solve_scalar_root(lambda x: 1.0 + x * x, (-1.0, 1.0))

    def test_endpoint_root(self):
        assert solve_scalar_root(lambda x: x - 1.0, (1.0, 2.0)) == pytest.approx(1.0)

    @given(st.floats(min_value=-5.0, max_value=5.0))
    @settings(max_examples=30, deadline=None)
    def test_affine_roots(self, b):
        x = solve_scalar_root(lambda x: x - b, (-10.0, 10.0))
        assert x == pytest.approx(b, abs=1e-11)


class TestSolveFixedPointSystem:
    def test_linear_system(self):
        b = np.array([0.3, -1.2, 4.0])
        x = solve_fixed_point_system(lambda x: x - b, np.zeros(3))
        assert np.allclose(x, b, atol=1e-12)

    def test_coupled_contraction(self):
        # x = cos(y), y = 0.5 sin(x)
        def residual(v):
            return np.array([v[0] - np.cos(v[1]), v[1] - 0.5 * np.sin(v[0])])

        v = solve_fixed_point_system(residual, np.array([1.0, 1.0]))
        assert np.max(np.abs(residual(v))) <= 1e-12

    def test_stall_raises(self):
        cfg = SolverConfig(max_iterations=10)
        with pytest.raises(MaxIterations):
            solve_fixed_point_system(lambda x: np.array([1.0 + x[0] ** 2]), np.array([3.0]), cfg)

    def test_non_finite_guess(self):
        with pytest.raises(NonFinite):
            solve_fixed_point_system(lambda x: x, np.array([np.nan]))


class TestLambertW:
    def test_principal_at_zero(self):
        assert lambert_w(0.0, "principal") == 0.0

    def test_branch_point(self):
        assert lambert_w(-np.exp(-1.0), "principal") == pytest.approx(-1.0)
        assert lambert_w(-np.exp(-1.0), "minus-one") == pytest.approx(-1.0)

    @given(st.floats(min_value=-0.367, max_value=20.0))
    @settings(max_examples=50, deadline=None)
    def test_principal_identity(self, x):
        w = lambert_w(x, "principal")
        assert w * np.exp(w) == pytest.approx(x, abs=1e-12, rel=1e-12)

    @given(st.floats(min_value=-0.367, max_value=-1e-6))
    @settings(max_examples=50, deadline=None)
    def test_minus_one_identity(self, x):
        w = lambert_w(x, "minus-one")
        assert w <= -1.0
        assert w * np.exp(w) == pytest.approx(x, abs=1e-12, rel=1e-12)

    def test_out_of_domain(self):
        with pytest.raises(OutOfDomain):
            lambert_w(-1.0, "principal")
        with pytest.raises(OutOfDomain):
            lambert_w(0.5, "minus-one")
        with pytest.raises(ValueError):
            lambert_w(0.5, "zero")


class TestQuadratureConfig:
    def test_defaults(self):
        cfg = QuadratureConfig()
        assert cfg.abs_tol == 1e-10 and cfg.rel_tol == 1e-10
