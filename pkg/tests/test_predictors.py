"""Copula families, conditional laws, accuracy ordering and sampling."""

import numpy as np
import pytest

from conftest import NULL, PERFECT, POWER02, UNIFORM, get_predictor, hal
from prescreen.predictors import (Copula, Marginal, PqdOrdering, Predictor,
                                  cond_cdf_signal_given_value,
                                  cond_cdf_value_given_signal,
                                  cond_expectation, copula_partials,
                                  pqd_compare, predictor_from_json,
                                  sample_signal, validate_predictor)

ALL_FAMILIES = [
    ("independence",), PERFECT, ("amh", 0.5), ("fgm", 1.0), hal(0.5),
    ("mix", ((0.3, ("amh", 0.8)), (0.7, ("fgm", 0.4)))),
]


class TestCopulaPartials:
    def test_fgm_midpoint(self):
        c, c1, c2 = copula_partials(Copula.fgm(1.0), 0.5, 0.5)
        assert c == pytest.approx(0.3125)
        assert c1 == pytest.approx(0.5)
        assert c2 == pytest.approx(0.5)

    def test_independence(self):
        c, c1, c2 = copula_partials(Copula.independence(), 0.3, 0.7)
        assert (c, c1, c2) == (pytest.approx(0.21), pytest.approx(0.7),
                               pytest.approx(0.3))

    def test_comonotonic_below_diagonal(self):
        c, c1, c2 = copula_partials(Copula.comonotonic(), 0.2, 0.6)
        assert (c, c1, c2) == (0.2, 1.0, 0.0)

    def test_domain_validation(self):
        with pytest.raises(ValueError):
            copula_partials(Copula.independence(), 1.2, 0.5)

    @pytest.mark.parametrize("desc", ALL_FAMILIES)
    def test_boundary_identities(self, desc):
        cop = get_predictor(desc).copula
        g = np.linspace(0.0, 1.0, 41)
        z = np.zeros_like(g)
        o = np.ones_like(g)
        np.testing.assert_allclose(cop.cdf(g, z), 0.0, atol=1e-12)
        np.testing.assert_allclose(cop.cdf(z, g), 0.0, atol=1e-12)
        np.testing.assert_allclose(cop.cdf(g, o), g, atol=1e-12)
        np.testing.assert_allclose(cop.cdf(o, g), g, atol=1e-12)

    @pytest.mark.parametrize("desc", ALL_FAMILIES)
    def test_two_increasing(self, desc, rng):
        cop = get_predictor(desc).copula
        x = np.sort(rng.uniform(0, 1, (200, 2)), axis=1)
        y = np.sort(rng.uniform(0, 1, (200, 2)), axis=1)
        mass = (cop.cdf(x[:, 1], y[:, 1]) - cop.cdf(x[:, 1], y[:, 0])
                - cop.cdf(x[:, 0], y[:, 1]) + cop.cdf(x[:, 0], y[:, 0]))
        assert mass.min() >= -1e-12

    def test_parameter_range(self):
        with pytest.raises(ValueError):
            Copula.amh(1.2)
        with pytest.raises(ValueError):
            Copula.fgm(-0.5)
        # negative dependence is representable when validation is waived,
        # so that `check` runs can report the assumption violation
        cop = Copula.fgm(-0.5, validate=False)
        assert cop.cdf(0.5, 0.5) < 0.25
        with pytest.raises(ValueError):
            Copula.fgm(-1.5, validate=False)

    def test_hallucinatory_is_two_component_mixture(self):
        cop = Copula.hallucinatory(0.3)
        assert cop.comonotonic_weight == pytest.approx(0.3)
        assert cop.is_hallucinatory
        assert not Copula.amh(0.2).is_hallucinatory


class TestConditionalCdfs:
    def test_value_given_signal_independence(self):
        p = get_predictor(NULL, POWER02, UNIFORM)
        v = np.linspace(0, 1, 11)
        np.testing.assert_allclose(
            cond_cdf_value_given_signal(p, v, 0.3 * np.ones_like(v)),
            v ** 0.2)

    def test_value_given_signal_comonotonic_indicator(self):
        p = get_predictor(PERFECT)
        assert cond_cdf_value_given_signal(p, 0.7, 0.4) == 1.0
        assert cond_cdf_value_given_signal(p, 0.3, 0.6) == 0.0

    def test_value_given_signal_fgm_midpoint(self):
        p = get_predictor(("fgm", 0.8))
        assert cond_cdf_value_given_signal(p, 0.5, 0.5) == pytest.approx(0.5)

    def test_monotone_in_v(self, rng):
        p = get_predictor(("amh", 0.7), POWER02, UNIFORM)
        v = np.sort(rng.uniform(0, 1, 50))
        vals = cond_cdf_value_given_signal(p, v, np.full_like(v, 0.42))
        assert np.all(np.diff(vals) >= -1e-12)

    def test_signal_given_value_independence(self):
        p = get_predictor(NULL, UNIFORM, POWER02)
        s = np.linspace(0, 1, 11)
        np.testing.assert_allclose(
            cond_cdf_signal_given_value(p, s, 0.9 * np.ones_like(s)),
            s ** 0.2)

    def test_signal_given_value_hallucinatory(self):
        # gamma 1{s >= F2^-1(F1(v))} + (1 - gamma) F2(s)
        p = get_predictor(hal(0.6))
        v, s = 0.5, 0.3
        assert cond_cdf_signal_given_value(p, s, v) == \
            pytest.approx(0.4 * 0.3)
        assert cond_cdf_signal_given_value(p, 0.7, v) == \
            pytest.approx(0.6 + 0.4 * 0.7)

    def test_signal_given_value_comonotonic(self):
        p = get_predictor(PERFECT)
        assert cond_cdf_signal_given_value(p, 0.4, 0.6) == 0.0


class TestCondExpectation:
    def test_independence_is_prior_mean(self):
        p = get_predictor(NULL, POWER02, UNIFORM)
        want = 0.2 / 1.2  # int (1 - x^c) dx = c/(c+1)
        assert cond_expectation(p, 0.77) == pytest.approx(want, abs=1e-9)

    def test_comonotonic_inverts_quantiles(self):
        p = get_predictor(PERFECT, POWER02, ("power", 2.0))
        s = 0.6
        assert cond_expectation(p, s) == pytest.approx((s ** 2) ** 5,
                                                       abs=1e-9)

    def test_fgm_uniform_closed_form(self):
        # E[V | S=s] = 1/2 - alpha (1 - 2s) / 6 for uniform marginals
        for alpha, s in ((1.0, 1.0), (1.0, 0.0), (0.4, 0.25)):
            p = Predictor(Copula.fgm(alpha), Marginal.uniform(),
                          Marginal.uniform())
            want = 0.5 - alpha * (1.0 - 2.0 * s) / 6.0
            assert cond_expectation(p, s) == pytest.approx(want, abs=1e-9)


class TestValidatePredictor:
    @pytest.mark.parametrize("alpha", [0.0, 0.25, 0.5, 0.75, 1.0])
    @pytest.mark.parametrize("family", ["amh", "fgm", "hal"])
    def test_builtin_families_pass(self, family, alpha):
        p = get_predictor((family if family != "hal" else "hal", alpha),
                          POWER02, UNIFORM)
        assert validate_predictor(p).all_ok

    def test_comonotonic_passes(self):
        assert validate_predictor(get_predictor(PERFECT)).all_ok

    def test_negative_fgm_flags_assumption(self):
        p = get_predictor(("fgm-raw", -0.5))
        report = validate_predictor(p)
        assert not report.assumption1
        assert not report.all_ok

    def test_independence_all_true(self):
        report = validate_predictor(get_predictor(NULL))
        assert report.all_ok
        assert report.condition13


class TestPqdCompare:
    CHAIN = [PERFECT, hal(0.5), ("amh", 0.5), ("fgm", 0.5), NULL]

    @pytest.mark.parametrize("gamma", [0.25, 0.5, 0.75])
    def test_accuracy_chain(self, gamma):
        chain = [PERFECT, hal(gamma), ("amh", gamma), ("fgm", gamma), NULL]
        preds = [get_predictor(c, POWER02, UNIFORM) for c in chain]
        for better, worse in zip(preds, preds[1:]):
            assert pqd_compare(better, worse) in (PqdOrdering.A_DOMINATES,
                                                  PqdOrdering.EQUAL)
            assert pqd_compare(worse, better) in (PqdOrdering.B_DOMINATES,
                                                  PqdOrdering.EQUAL)

    def test_strict_dominance_along_chain(self):
        a = get_predictor(PERFECT)
        b = get_predictor(hal(0.5))
        assert pqd_compare(a, b) is PqdOrdering.A_DOMINATES

    def test_equal(self):
        a = get_predictor(("fgm", 0.3))
        b = get_predictor(("fgm", 0.3))
        assert pqd_compare(a, b) is PqdOrdering.EQUAL

    @pytest.mark.parametrize("family", ["fgm", "amh", "hal"])
    def test_monotone_in_parameter(self, family):
        lo = get_predictor((family, 0.25))
        hi = get_predictor((family, 0.75))
        assert pqd_compare(hi, lo) is PqdOrdering.A_DOMINATES

    def test_marginal_mismatch(self):
        with pytest.raises(ValueError):
            pqd_compare(get_predictor(NULL, POWER02, UNIFORM),
                        get_predictor(NULL, UNIFORM, UNIFORM))


class TestSampleSignal:
    def test_independence(self):
        p = get_predictor(NULL, UNIFORM, ("power", 2.0))
        u = np.array([0.04, 0.25, 0.81])
        np.testing.assert_allclose(sample_signal(p, 0.3 * np.ones(3), u),
                                   np.sqrt(u))

    def test_comonotonic_degenerate(self):
        p = get_predictor(PERFECT, POWER02, UNIFORM)
        s = sample_signal(p, 0.5, 0.99)
        assert s == pytest.approx(0.5 ** 0.2)
        assert sample_signal(p, 0.5, 0.01) == pytest.approx(s)

    def test_hallucinatory_stick_breaking(self):
        p = get_predictor(hal(0.6))
        v = 0.3
        # component draw below gamma: fully informative
        assert sample_signal(p, v, 0.3) == pytest.approx(v)
        # above gamma: the remainder is rescaled into an independent draw
        assert sample_signal(p, v, 0.6 + 0.4 * 0.55) == pytest.approx(0.55)

    @pytest.mark.parametrize("desc", [("fgm", 0.7), ("amh", 0.5)])
    def test_sampling_matches_conditional_cdf(self, desc, rng):
        """KS distance of 1e5 draws against C1(F1(v), F2(.)) stays below
        the 1% critical value."""
        p = get_predictor(desc, POWER02, UNIFORM)
        n = 100_000
        v = np.full(n, 0.5)
        s = np.sort(sample_signal(p, v, rng.random(n)))
        target = cond_cdf_signal_given_value(p, s, np.full(n, 0.5))
        ecdf_hi = np.arange(1, n + 1) / n
        ecdf_lo = np.arange(0, n) / n
        ks = max(np.max(np.abs(ecdf_hi - target)),
                 np.max(np.abs(ecdf_lo - target)))
        assert ks < 1.628 / np.sqrt(n)

    def test_hallucinatory_atom_frequency(self, rng):
        gamma = 0.4
        p = get_predictor(hal(gamma))
        n = 100_000
        s = sample_signal(p, np.full(n, 0.37), rng.random(n))
        share = np.mean(s == pytest.approx(0.37)) if False else \
            np.mean(np.abs(s - 0.37) < 1e-12)
        assert abs(share - gamma) < 4 * np.sqrt(gamma * (1 - gamma) / n)


class TestJson:
    def test_round_trip(self, rng):
        p = get_predictor(("mix", ((0.3, ("amh", 0.8)), (0.7, hal(0.4)))),
                          POWER02, UNIFORM)
        q = predictor_from_json(p.to_json())
        g = rng.uniform(0, 1, (50, 2))
        np.testing.assert_allclose(p.joint_cdf(g[:, 0], g[:, 1]),
                                   q.joint_cdf(g[:, 0], g[:, 1]),
                                   atol=1e-12)

    def test_unknown_keys_rejected(self):
        with pytest.raises(ValueError, match="unknown"):
            predictor_from_json({"copula": {"family": "fgm", "alpha": 0.5},
                                 "f1": {"family": "power", "c": 1.0},
                                 "f2": {"family": "power", "c": 1.0},
                                 "extra": 1})
        with pytest.raises(ValueError, match="unknown"):
            predictor_from_json({"copula": {"family": "fgm", "gamma": 0.5},
                                 "f1": {"family": "power", "c": 1.0},
                                 "f2": {"family": "power", "c": 1.0}})

    def test_negative_alpha_loadable_for_checks(self):
        p = predictor_from_json({"copula": {"family": "fgm", "alpha": -0.5},
                                 "f1": {"family": "power", "c": 1.0},
                                 "f2": {"family": "power", "c": 1.0}})
        assert not validate_predictor(p).assumption1

    def test_table_marginal(self):
        grid = np.linspace(0, 1, 65)
        spec = {"copula": {"family": "independence"},
                "f1": {"family": "table", "grid": grid.tolist(),
                       "cdf": (grid ** 2).tolist()},
                "f2": {"family": "power", "c": 1.0}}
        p = predictor_from_json(spec)
        assert p.f1.cdf(0.5) == pytest.approx(0.25, abs=1e-9)
        assert p.f1.quantile(0.25) == pytest.approx(0.5, abs=1e-7)
        assert p.f1.pdf(0.5) == pytest.approx(1.0, abs=1e-3)


class TestSklarConsistency:
    @pytest.mark.parametrize("desc", ALL_FAMILIES)
    def test_marginal_consistency(self, desc):
        p = get_predictor(desc, POWER02, ("power", 2.0))
        g = np.linspace(0, 1, 101)
        np.testing.assert_allclose(p.joint_cdf(g, np.ones_like(g)),
                                   p.f1.cdf(g), atol=1e-10)
        np.testing.assert_allclose(p.joint_cdf(np.ones_like(g), g),
                                   p.f2.cdf(g), atol=1e-10)
