import numpy as np
import pytest

from horops.groups import builtin, cyclic
from horops.horofunction import Interior
from horops.orbit import enumerate_ball
from horops.patterson import (
    ExponentError,
    atom_shadow_margins,
    critical_exponent,
    patterson_measure,
    phi_length,
    poincare_abscissa,
    poincare_partial_sum,
    quasi_invariance_report,
    sample_by_length,
    shadow_lemma_report,
    unbiased_radius,
)
from horops.shadows import ShadowSpec, shadow_margin
from horops.weyl import Functional


def test_phi_length_examples():
    g = np.diag([np.e**2, 1.0, np.e**-2])
    assert phi_length(Functional({1: 1.0}), g) == pytest.approx(2.0, abs=1e-14)
    assert phi_length(Functional({2: 1.0}), g) == pytest.approx(2.0, abs=1e-14)
    assert phi_length(Functional({1: 1.0, 2: 0.5}), g) == pytest.approx(3.0, abs=1e-14)


def test_phi_length_of_orbit_element(schottky6):
    o, _, phi = schottky6
    e = o[5]
    assert phi_length(phi, e) == pytest.approx(phi_length(phi, o.matrices[5]), abs=1e-10)


class TestExponent:
    def test_cyclic_growth_is_subexponential(self, cyclic20):
        o, _, phi = cyclic20
        est = critical_exponent(o, phi)
        assert 0.0 <= est.delta_hat < 0.1
        assert est.bisection < 0.05
        lo, hi = est.confidence_band
        assert lo <= est.delta_hat <= hi

    def test_schottky_two_routes_agree(self, schottky6):
        o, _, phi = schottky6
        est = critical_exponent(o, phi)
        assert est.bisection is not None
        assert abs(est.delta_hat - est.bisection) / est.bisection < 0.1

    def test_free_group_bounds(self, schottky6):
        # 4 * 3^(n-1) words of length n, each of phi-length at most n * max generator length
        o, _, phi = schottky6
        gens = phi(o.kappa[o.shell(1)])
        est = critical_exponent(o, phi)
        assert est.delta_hat >= np.log(3) / np.max(gens) * 0.9
        assert est.delta_hat <= np.log(3) / np.min(gens) * 3.0

    def test_unbiased_radius_capped_by_generators(self, schottky6):
        o, _, phi = schottky6
        T = unbiased_radius(o, phi)
        assert T <= o.max_word_length * np.min(phi(o.kappa[o.shell(1)])) + 1e-12
        assert T <= np.min(phi(o.kappa[o.shell(o.max_word_length)])) + 1e-12

    def test_no_window_on_trivial_ball(self):
        P, _, phi = builtin("schottky")
        with pytest.raises(ExponentError, match="no unbiased window"):
            critical_exponent(enumerate_ball(P, 0), phi)


class TestPoincare:
    def test_large_exponent_keeps_only_identity(self, schottky6):
        o, _, phi = schottky6
        total, ratios = poincare_partial_sum(o, phi, 60.0)
        assert total == pytest.approx(1.0, abs=1e-20)
        assert np.all(ratios < 1)

    def test_cyclic_sums_converge(self, cyclic20):
        o, _, phi = cyclic20
        _, ratios = poincare_partial_sum(o, phi, 0.5)
        assert np.all(ratios < 1)

    def test_abscissa_brackets(self, schottky6):
        o, _, phi = schottky6
        s0 = poincare_abscissa(o, phi)
        _, below = poincare_partial_sum(o, phi, s0 - 0.2)
        _, above = poincare_partial_sum(o, phi, s0 + 0.2)
        assert np.mean(np.log(below[-3:])) > 0 > np.mean(np.log(above[-3:]))


class TestMeasure:
    def test_trivial_ball_is_dirac(self):
        P, _, phi = builtin("schottky")
        mu = patterson_measure(enumerate_ball(P, 0), phi, 1.0)
        np.testing.assert_array_equal(mu.weights, [1.0])

    def test_three_atoms_closed_form(self):
        # cyclic ball of radius one: e, g, g^-1 with phi-lengths 0, a, a
        o = enumerate_ball(cyclic(3), 1)
        phi = Functional({1: 1.0})
        t = phi(o.kappa)
        s = 0.7
        mu = patterson_measure(o, phi, s)
        expected = np.exp(-s * t) / np.exp(-s * t).sum()
        np.testing.assert_allclose(mu.weights, expected, rtol=1e-14)
        assert mu.weights.sum() == pytest.approx(1.0, abs=1e-15)

    def test_log_weight_slope(self, schottky6):
        o, _, phi = schottky6
        mu = patterson_measure(o, phi, 1.3)
        t = phi(o.kappa)
        slope = np.polyfit(t, mu.log_weights, 1)[0]
        assert slope == pytest.approx(-1.3, abs=1e-10)

    def test_polynomial_gauge(self, schottky6):
        o, _, phi = schottky6
        a = patterson_measure(o, phi, 1.3)
        b = patterson_measure(o, phi, 1.3, "polynomial(0.5)")
        t = phi(o.kappa)
        diff = b.log_weights - a.log_weights
        np.testing.assert_allclose(diff - diff[0], 0.5 * np.log1p(t) - 0.5 * np.log1p(t[0]), atol=1e-10)

    def test_bad_inputs(self, schottky6):
        o, _, phi = schottky6
        with pytest.raises(ValueError):
            patterson_measure(o, phi, 0.0)
        with pytest.raises(ValueError):
            patterson_measure(o, phi, 1.0, "exotic")

    def test_bitwise_reproducible(self):
        P, _, phi = builtin("schottky")
        a = patterson_measure(enumerate_ball(P, 5), phi, 1.2)
        b = patterson_measure(enumerate_ball(P, 5, threads=3), phi, 1.2)
        assert a.log_weights.tobytes() == b.log_weights.tobytes()


class TestQuasiInvariance:
    def test_identity_is_exact(self, schottky6):
        o, th, phi = schottky6
        mu = patterson_measure(o, phi, 1.2)
        rep = quasi_invariance_report(mu, [0], th)
        assert rep.truncation_loss[0] == 0.0
        assert np.nanmax(rep.max_log_deviation) == 0.0

    def test_generators(self, schottky6):
        o, th, phi = schottky6
        mu = patterson_measure(o, phi, 1.2)
        rep = quasi_invariance_report(mu, ["a", "b", "A"], th)
        assert rep.verdict == "ok"
        assert np.nanmax(rep.max_log_deviation) < 1e-9
        assert np.all(rep.truncation_loss > 0)

    def test_cyclic_generator(self, cyclic20):
        o, th, phi = cyclic20
        mu = patterson_measure(o, phi, 0.5)
        rep = quasi_invariance_report(mu, [1], th)
        assert np.nanmax(rep.max_log_deviation) < 1e-12

    def test_unknown_word(self, schottky6):
        o, th, phi = schottky6
        mu = patterson_measure(o, phi, 1.2)
        with pytest.raises(KeyError):
            quasi_invariance_report(mu, ["a.a.a.a.a.a.a"], th)


class TestShadowLemma:
    def test_identity_shadow_holds_everything(self, schottky6):
        o, th, phi = schottky6
        mu = patterson_measure(o, phi, 1.2)
        rep = shadow_lemma_report(mu, o, th, 2.0, 1.2, [0])
        assert rep.masses[0] == pytest.approx(1.0, abs=1e-14)
        assert rep.ratios[0] == pytest.approx(1.0, abs=1e-14)

    def test_atom_margins_match_predicate(self, schottky6):
        o, th, _ = schottky6
        rng = np.random.default_rng(3)
        for i in rng.choice(len(o), 5, replace=False):
            rows = rng.choice(len(o), 40, replace=False)
            fast = atom_shadow_margins(o, int(i), th, 3.0, rows)
            s = ShadowSpec(o.matrices[i], 3.0, th, o.inverses[i])
            slow = [shadow_margin(s, Interior(o.matrices[r], o.inverses[r])) for r in rows]
            np.testing.assert_allclose(fast, slow, atol=1e-8)

    def test_masses_decay_with_length(self, schottky6):
        o, th, phi = schottky6
        mu = patterson_measure(o, phi, 1.25)
        tests = sample_by_length(o, [1, 2, 3, 4], 4, seed=2)
        rep = shadow_lemma_report(mu, o, th, 3.0, 1.25, tests)
        assert rep.empty_shadows == 0
        by_len = [rep.masses[o.length[tests] == n].mean() for n in (1, 2, 3, 4)]
        assert all(a > b for a, b in zip(by_len, by_len[1:]))

    def test_sample_is_deterministic(self, schottky6):
        o, _, _ = schottky6
        a = sample_by_length(o, [2, 3], 5, seed=9)
        b = sample_by_length(o, [2, 3], 5, seed=9)
        np.testing.assert_array_equal(a, b)
        assert len(a) == 10
        assert set(o.length[a]) == {2, 3}

    def test_measure_must_match_orbit(self, schottky6):
        o, th, phi = schottky6
        other = enumerate_ball(builtin("schottky")[0], 2)
        with pytest.raises(ValueError):
            shadow_lemma_report(patterson_measure(other, phi, 1.0), o, th, 2.0, 1.0, [0])
