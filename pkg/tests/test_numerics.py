"""Quadrature, root finding and tabulation contracts."""

import numpy as np
import pytest

from prescreen.numerics import (IntegrationError, QuadratureSpec,
                                RootFindingError, TabulatedFunction,
                                find_root, integrate, integrate_batched,
                                tabulate)

SPEC = QuadratureSpec()
TOL = max(SPEC.abs_tol, SPEC.rel_tol)


class TestIntegrate:
    def test_linear(self):
        assert integrate(lambda x: x, 0.0, 1.0) == pytest.approx(0.5, abs=TOL)

    def test_empty_interval_is_exact_zero(self):
        assert integrate(lambda x: 1.0, 0.3, 0.3) == 0.0

    def test_parabola(self):
        # antiderivative of 6x(1-x) is 3x^2 - 2x^3, so the integral is 1
        got = integrate(lambda x: 6.0 * x * (1.0 - x), 0.0, 1.0)
        assert got == pytest.approx(1.0, abs=TOL)

    def test_linearity_on_random_polynomials(self, rng):
        for _ in range(10):
            cf = rng.normal(size=4)
            cg = rng.normal(size=4)
            a, b = rng.normal(size=2)
            f = np.polynomial.Polynomial(cf)
            g = np.polynomial.Polynomial(cg)
            lhs = integrate(lambda x: a * f(x) + b * g(x), 0.0, 1.0)
            rhs = a * integrate(f, 0.0, 1.0) + b * integrate(g, 0.0, 1.0)
            assert abs(lhs - rhs) <= 2 * TOL * (1 + abs(a) + abs(b))

    def test_interval_additivity(self, rng):
        f = np.polynomial.Polynomial(rng.normal(size=5))
        whole = integrate(f, 0.0, 0.9)
        split = integrate(f, 0.0, 0.4) + integrate(f, 0.4, 0.9)
        assert abs(whole - split) <= 2 * TOL

    def test_reversed_bounds_rejected(self):
        with pytest.raises(ValueError):
            integrate(lambda x: x, 1.0, 0.0)

    def test_depth_limit_carries_partial_estimate(self):
        # a kink needs ~30 bisection levels for 1e-9; cap the depth at 10
        shallow = QuadratureSpec(max_depth=10)
        with pytest.raises(IntegrationError) as exc:
            integrate(lambda x: abs(x - 1.0 / 3.0) ** 0.3, 0.0, 1.0, shallow)
        want = ((1 / 3) ** 1.3 + (2 / 3) ** 1.3) / 1.3
        assert abs(exc.value.estimate - want) < 1e-2

    def test_spec_validation(self):
        with pytest.raises(ValueError):
            QuadratureSpec(abs_tol=0.0)
        with pytest.raises(ValueError):
            QuadratureSpec(max_depth=5)


class TestIntegrateBatched:
    def test_vectorised_integrand(self):
        got = integrate_batched(lambda x: np.exp(x), 0.0, 1.0)
        assert got == pytest.approx(np.e - 1.0, abs=1e-9)

    def test_breakpoints_isolate_kink(self):
        f = lambda x: np.abs(x - 1.0 / 3.0)
        got = integrate_batched(f, 0.0, 1.0, breakpoints=(1.0 / 3.0,))
        want = (1.0 / 3.0) ** 2 / 2 + (2.0 / 3.0) ** 2 / 2
        assert got == pytest.approx(want, abs=1e-12)


class TestFindRoot:
    def test_affine(self):
        assert find_root(lambda x: x - 0.25, 0.0, 1.0) == \
            pytest.approx(0.25, abs=1e-10)

    def test_sqrt_half(self):
        got = find_root(lambda x: x * x - 0.5, 0.0, 1.0)
        assert got == pytest.approx(np.sqrt(0.5), abs=1e-9)

    def test_no_sign_change(self):
        with pytest.raises(RootFindingError):
            find_root(lambda x: x - 2.0, 0.0, 1.0)

    def test_idempotent_rebracketing(self):
        f = lambda x: np.tanh(5 * (x - 0.37))
        r1 = find_root(f, 0.0, 1.0, tol=1e-12)
        r2 = find_root(f, max(0.0, r1 - 0.05), min(1.0, r1 + 0.05),
                       tol=1e-12)
        assert abs(r1 - r2) < 1e-10


class TestTabulate:
    def test_grid_point_is_exact(self):
        tab = tabulate(lambda x: x ** 2, npoints=129)
        assert abs(tab(0.5) - 0.25) < 1e-10

    def test_constant(self):
        tab = tabulate(lambda x: np.ones_like(x), npoints=65)
        assert np.all(tab.values == 1.0)
        assert tab(np.array([0.123, 0.77])) == pytest.approx([1.0, 1.0])

    def test_power_law_off_grid(self):
        tab = tabulate(lambda x: x ** 0.2, monotone=True)
        assert abs(tab(0.1234) - 0.1234 ** 0.2) < 1e-6

    def test_too_few_points(self):
        with pytest.raises(ValueError):
            tabulate(lambda x: x, npoints=32)

    def test_nonfinite_sample_names_abscissa(self):
        with pytest.raises(ValueError, match="0.5"):
            tabulate(lambda x: np.where(x == 0.5, np.nan, x), npoints=33)

    def test_monotone_never_overshoots(self):
        grid = np.linspace(0, 1, 33)
        vals = np.where(grid < 0.5, 0.0, 1.0)  # a step
        tab = TabulatedFunction(grid, vals, monotone=True)
        probe = tab(np.linspace(0, 1, 1001))
        assert probe.min() >= -1e-12 and probe.max() <= 1.0 + 1e-12
        assert np.all(np.diff(probe) >= -1e-12)

    def test_roundtrip_reproduces_grid_values(self):
        tab = tabulate(lambda x: np.sin(2 * x) + 2 * x, npoints=257,
                       monotone=True)
        again = tabulate(tab, npoints=257, monotone=True)
        np.testing.assert_array_equal(tab.values, again.values)

    def test_grid_must_span_unit_interval(self):
        with pytest.raises(ValueError):
            TabulatedFunction(np.linspace(0, 0.9, 33), np.zeros(33))
