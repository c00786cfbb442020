import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from horops.decompositions import cartan_projection
from horops.groups import builtin, cyclic, example59, modular, punctured_torus, schottky, sym2_schottky
from horops.orbit import (
    CapExceededError,
    GroupPresentation,
    enumerate_ball,
    limit_set_sample,
    regularity_report,
)
from horops.shadows import transverse_pair_check
from horops.weyl import Theta


def free_count(L, rank=2):
    n = 2 * rank
    return 1 + sum(n * (n - 1) ** (k - 1) for k in range(1, L + 1))


def integer_ball_counts(gens, L):
    """Exhaustive oracle for integer groups: exact tuple dedup, shortest word wins."""
    letters = []
    for g in gens:
        a, b, c, d = (int(v) for v in np.asarray(g).ravel())
        letters += [(a, b, c, d), (d, -b, -c, a)]

    def mul(x, y):
        return (x[0] * y[0] + x[1] * y[2], x[0] * y[1] + x[1] * y[3], x[2] * y[0] + x[3] * y[2], x[2] * y[1] + x[3] * y[3])

    seen = {(1, 0, 0, 1)}
    frontier = [(1, 0, 0, 1)]
    counts = [1]
    for _ in range(L):
        nxt = []
        for m in frontier:
            for lt in letters:
                p = mul(m, lt)
                if p not in seen:
                    seen.add(p)
                    nxt.append(p)
        counts.append(len(nxt))
        frontier = nxt
    return counts


def reduce_word(w):
    out = []
    for c in w:
        if out and out[-1] == c ^ 1:
            out.pop()
        else:
            out.append(c)
    return out


class TestEnumeration:
    def test_free_rank_two_length_one(self):
        assert len(enumerate_ball(schottky(), 1)) == 5

    @pytest.mark.parametrize("n", [0, 1, 5, 17])
    def test_cyclic(self, n):
        assert len(enumerate_ball(cyclic(), n)) == 2 * n + 1

    def test_schottky_counts(self):
        o = enumerate_ball(schottky(), 8)
        assert len(o) == free_count(8) == 13121
        assert o.is_free

    def test_modular_group_against_integer_oracle(self):
        o = enumerate_ball(modular(), 6)
        shells = np.bincount(o.length).tolist()
        assert shells == integer_ball_counts(modular().generators, 6)
        assert np.cumsum(shells).tolist() == [1, 5, 16, 36, 68, 120, 204]
        assert not o.is_free

    def test_punctured_torus_against_integer_oracle(self):
        o = enumerate_ball(punctured_torus(), 4)
        oracle = integer_ball_counts(punctured_torus().generators, 4)
        assert np.bincount(o.length).tolist() == oracle
        # the commutator is parabolic, not trivial: the group is free
        assert len(o) == sum(oracle) == free_count(4) == 161

    def test_ordering_and_shortest_words(self):
        o = enumerate_ball(modular(), 5)
        assert np.all(np.diff(o.length) >= 0)
        for n in range(1, 6):
            rows = o.shell(n)
            words = [o.word(int(i)) for i in rows]
            assert words == sorted(words)

    def test_word_matrix_consistency(self, schottky6):
        o, _, _ = schottky6
        P = o.presentation
        for i in range(0, len(o), 37):
            np.testing.assert_allclose(P.evaluate_word(o.word(i)), o.matrices[i], rtol=1e-10, atol=1e-10)
            np.testing.assert_allclose(o.matrices[i] @ o.inverses[i], np.eye(2), atol=1e-8)

    def test_no_false_merges_at_length_12(self):
        o = enumerate_ball(schottky(), 12)
        assert len(o) == free_count(12)

    def test_threads_do_not_change_output(self):
        a = enumerate_ball(sym2_schottky(), 7, threads=1)
        b = enumerate_ball(sym2_schottky(), 7, threads=4)
        assert np.array_equal(a.matrices, b.matrices)
        assert np.array_equal(a.parent, b.parent) and np.array_equal(a.letter, b.letter)

    def test_cap(self):
        with pytest.raises(CapExceededError):
            enumerate_ball(schottky(), 6, cap=100)

    def test_invalid_arguments(self):
        with pytest.raises(ValueError):
            enumerate_ball(schottky(), -1)
        with pytest.raises(ValueError):
            enumerate_ball(schottky(), 2, dedup_tol=0.0)
        with pytest.raises(ValueError):
            GroupPresentation((np.diag([2.0, 1.0]),))


class TestWordTools:
    @settings(max_examples=25)
    @given(st.lists(st.integers(0, 3), max_size=5))
    def test_left_multiply_matches_free_reduction(self, u):
        o = enumerate_ball(schottky(), 5)
        res = o.left_multiply(u)
        for r in range(0, len(o), 7):
            w = reduce_word(list(u) + list(o.word(r)))
            expect = o.index_of_word(w) if len(w) <= 5 else -1
            assert res[r] == expect

    def test_relative_kappa_matches_products(self, schottky6):
        o, _, _ = schottky6
        rows = np.arange(len(o))
        for i in (3, 40, 500, len(o) - 1):
            direct = cartan_projection(o.inverses[i] @ o.matrices[rows], o.inverses[rows] @ o.matrices[i])
            np.testing.assert_allclose(o.relative_kappa(i, rows), direct, atol=1e-7)

    def test_relative_kappa_non_free(self):
        o = enumerate_ball(modular(), 5)
        rows = np.arange(len(o))
        direct = cartan_projection(o.inverses[9] @ o.matrices, o.inverses @ o.matrices[9])
        np.testing.assert_allclose(o.relative_kappa(9, rows), direct, atol=1e-9)

    def test_lookup(self, schottky6):
        o, _, _ = schottky6
        assert o.lookup(o.matrices[123]) == 123
        assert o.lookup(np.diag([7.0, 1 / 7.0])) is None

    def test_parse_and_label(self, schottky6):
        o, _, _ = schottky6
        P = o.presentation
        i = o.index_of_word(P.parse_word("a.B.B"))
        assert o.word_label(i) == "a.B.B"


class TestRegularity:
    def test_example59_not_regular(self):
        P, _, _ = builtin("example59")
        rep = regularity_report(enumerate_ball(P, 6), Theta(4, (1, 2, 3)))
        assert not rep.regular
        assert np.abs(rep.min_margin).max() < 1e-12

    def test_schottky_margin_grows(self):
        rep = regularity_report(enumerate_ball(schottky(), 12), Theta(2, (1,)))
        assert rep.regular
        assert np.all(np.diff(rep.min_margin[1:]) > 0)

    def test_powers_linear(self):
        H = np.array([0.9, 0.1, -1.0])
        P = GroupPresentation((np.diag(np.exp(H)),))
        rep = regularity_report(enumerate_ball(P, 10), Theta(3, (1, 2)))
        np.testing.assert_allclose(rep.min_margin, 0.8 * np.arange(11), atol=1e-12)


class TestLimitSet:
    def test_cyclic_two_flags(self):
        P, th, _ = builtin("cyclic")
        flags, idx = limit_set_sample(enumerate_ball(P, 10), th, 0.1)
        assert len(flags) == 2

    def test_example59_empty(self):
        P, _, _ = builtin("example59")
        flags, _ = limit_set_sample(enumerate_ball(P, 8), Theta(4, (1, 2, 3)), 0.1)
        assert flags == []

    def test_sym2_pairwise_transverse(self):
        # distinct limit flags are transverse; the gap shrinks roughly with the
        # square of their distance, so a short ball keeps it above the default tol
        P, th, _ = builtin("sym2-schottky")
        o = enumerate_ball(P, 3)
        flags, _ = limit_set_sample(o, th, 0.1)
        assert len(flags) > 40
        for i in range(len(flags)):
            for j in range(i + 1, len(flags)):
                assert transverse_pair_check(flags[i], flags[j])

    def test_example59_flags_undefined(self):
        P = example59()
        o = enumerate_ball(P, 3)
        assert np.abs(o.annotate(Theta(4, (1, 2, 3))).theta_margin).max() < 1e-12
