import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from horops import linalg
from horops.decompositions import (
    PartialFlag,
    act_on_flag,
    cartan_projection,
    flag_distance,
    flag_projection,
    iwasawa_cocycle_partial,
    random_flag,
)
from horops.groups import PUNCTURED_TORUS, block_embed, hyperbolic_pair
from horops.horofunction import (
    HorofunctionPoint,
    Interior,
    act,
    busemann_raw,
    cocycle_B,
    compactification_distance,
    embed_flag,
    evaluate,
    lipschitz_lhs_rhs,
    orbit_limit,
    probe_values,
    same_point,
)
from horops.weyl import Theta, partial_projection, weights

from strategies import seeds, sl_element

THETAS = [Theta(3, (1,)), Theta(3, (2,)), Theta(3, (1, 2)), Theta(4, (2,)), Theta(4, (1, 3)), Theta(4, (1, 2, 3))]


def theta_strategy():
    return st.sampled_from(THETAS)


def test_every_point_vanishes_at_basepoint(rng):
    I3 = np.eye(3)
    th = Theta(3, (1, 2))
    assert np.all(evaluate(Interior(linalg.random_sl(3, rng, spread=2.0)), I3, th) == 0.0)
    assert np.all(evaluate(embed_flag(random_flag(th, rng)), I3) == 0.0)
    assert np.all(evaluate(embed_flag(random_flag(th, rng)), I3, route="exterior") == 0.0)


def test_busemann_at_own_point():
    # b_{g o}(g o) = -kappa(g)
    g = np.diag([np.e**2, 1.0, np.e**-2])
    np.testing.assert_allclose(busemann_raw(g, g), [-2.0, 0.0, 2.0], atol=1e-14)


def test_standard_flag_on_diagonal_elements():
    # Lambda^k(exp(-tH)) e_1 ^ ... ^ e_k = exp(-t(H_1 + ... + H_k)) e_1 ^ ... ^ e_k
    th = Theta(3, (1, 2))
    H = np.array([0.7, 0.1, -0.8])
    p = embed_flag(PartialFlag.standard(th))
    for t in (0.5, 1.0, 3.0):
        val = evaluate(p, np.diag(np.exp(t * H)))
        np.testing.assert_allclose(weights(th, val), [-t * 0.7, -t * 0.8], atol=1e-13)


def test_standard_flag_constant_on_horospheres(rng):
    th = Theta.full(4)
    p = embed_flag(PartialFlag.standard(th))
    for _ in range(20):
        n = np.eye(4) + np.triu(rng.standard_normal((4, 4)), 1)
        np.testing.assert_allclose(evaluate(p, n), 0.0, atol=1e-12)
        np.testing.assert_allclose(evaluate(p, n, route="exterior"), 0.0, atol=1e-12)


@given(seeds(), theta_strategy())
def test_flag_route_matches_exterior_route(seed, theta):
    rng = np.random.default_rng(seed)
    p = embed_flag(random_flag(theta, rng))
    h = linalg.random_sl(theta.d, rng, size=8, spread=1.5)
    np.testing.assert_allclose(evaluate(p, h), evaluate(p, h, route="exterior"), atol=1e-10)


@given(seeds(), theta_strategy())
def test_embedding_is_iwasawa_cocycle(seed, theta):
    rng = np.random.default_rng(seed)
    x = random_flag(theta, rng)
    g = linalg.random_sl(theta.d, rng)
    lhs = evaluate(embed_flag(x), g, route="exterior")
    np.testing.assert_allclose(lhs, iwasawa_cocycle_partial(theta, np.linalg.inv(g), x), atol=1e-9)


@given(seeds(), theta_strategy(), st.booleans())
def test_cocycle_identity(seed, theta, boundary):
    rng = np.random.default_rng(seed)
    d = theta.d
    g1, g2 = linalg.random_sl(d, rng), linalg.random_sl(d, rng)
    p = embed_flag(random_flag(theta, rng)) if boundary else Interior(linalg.random_sl(d, rng))
    lhs = cocycle_B(theta, g1 @ g2, p)
    rhs = cocycle_B(theta, g1, act(g2, p)) + cocycle_B(theta, g2, p)
    np.testing.assert_allclose(lhs, rhs, atol=1e-9)


@given(seeds(), theta_strategy())
def test_weight_upper_bound(seed, theta):
    # omega_k of p(h o) never exceeds omega_k(kappa(h^-1))
    rng = np.random.default_rng(seed)
    p = embed_flag(random_flag(theta, rng))
    h = linalg.random_sl(theta.d, rng, spread=2.0)
    bound = weights(theta, cartan_projection(np.linalg.inv(h)))
    assert np.all(weights(theta, evaluate(p, h)) <= bound + 1e-10)


@given(seeds(), theta_strategy())
def test_action_equivariance(seed, theta):
    rng = np.random.default_rng(seed)
    x = random_flag(theta, rng)
    g = linalg.random_sl(theta.d, rng, spread=1.5)
    assert same_point(act(g, embed_flag(x)), embed_flag(act_on_flag(g, x)), theta, tol=1e-8)


def test_interior_action_composes(rng):
    g, h = linalg.random_sl(3, rng), linalg.random_sl(3, rng)
    p = act(g, Interior(h))
    np.testing.assert_allclose(p.g, g @ h, atol=1e-12)
    np.testing.assert_allclose(p.g @ p.g_inv, np.eye(3), atol=1e-10)


def test_json_round_trip(rng):
    th = Theta(4, (1, 3))
    p = embed_flag(random_flag(th, rng))
    q = HorofunctionPoint.from_json(json.dumps(p.to_json()))
    assert q.theta == p.theta and q.provenance == "flag"
    for k in th.indices:
        np.testing.assert_array_equal(q.reps[k], p.reps[k])
    np.testing.assert_array_equal(q.flag_tag.frame, p.flag_tag.frame)


def test_representatives_are_validated():
    th = Theta(3, (1,))
    with pytest.raises(ValueError, match="operator norm"):
        HorofunctionPoint(th, {1: 2.0 * np.eye(3)})
    with pytest.raises(ValueError, match="missing"):
        HorofunctionPoint(Theta(3, (1, 2)), {1: np.eye(3)})


def test_interior_points_converge_to_standard_flag():
    th = Theta(3, (1, 2))
    H = np.array([1.0, 0.2, -1.2])
    p = embed_flag(PartialFlag.standard(th))
    h = sl_element(3, 3)
    errs = [np.abs(evaluate(Interior(np.diag(np.exp(n * H))), h, th) - evaluate(p, h)).max() for n in (2, 6, 12, 24)]
    assert errs[-1] < 1e-8
    assert all(a >= b for a, b in zip(errs, errs[1:]))


def test_orbit_limit_of_regular_ray_is_standard_flag():
    th = Theta(3, (1, 2))
    H = np.array([1.0, 0.2, -1.2])
    seq = np.array([np.diag(np.exp(n * H)) for n in range(10, 41)])
    p, diag = orbit_limit(seq, th)
    assert diag.converged
    assert max(diag.rank_one_defect.values()) < 1e-8
    assert same_point(p, embed_flag(PartialFlag.standard(th)), th, tol=1e-8)
    assert p.flag_tag is not None


def test_example59_limit_is_not_a_flag():
    # A^n + id has singular values (l^n, 1, 1, l^-n); on Lambda^2 the top value is doubled
    th = Theta.full(4)
    A = PUNCTURED_TORUS[0]
    seq = np.array([block_embed(np.linalg.matrix_power(A, n)) for n in range(5, 16)])
    p, diag = orbit_limit(seq, th)
    defect = diag.rank_one_defect
    lam = (3 + np.sqrt(5)) / 2
    assert defect[1] == pytest.approx(lam**-15, rel=1e-6)
    assert defect[3] == pytest.approx(lam**-15, abs=1e-10)
    assert defect[2] > 0.99
    assert p.flag_tag is None


def test_compactification_distance_basics(rng):
    th = Theta(3, (1, 2))
    x, y = random_flag(th, rng), random_flag(th, rng)
    p, q = embed_flag(x), embed_flag(y)
    assert compactification_distance(p, p, th) == 0.0
    assert compactification_distance(p, q, th) == pytest.approx(compactification_distance(q, p, th), abs=1e-14)
    assert compactification_distance(p, q, th) > 0.0
    g = Interior(linalg.random_sl(3, rng))
    assert compactification_distance(g, g, th) == pytest.approx(0.0, abs=1e-10)


def test_compactification_distance_along_ray_decreases():
    th = Theta(3, (1, 2))
    H = np.array([1.0, 0.2, -1.2])
    p = embed_flag(PartialFlag.standard(th))
    dist = [compactification_distance(Interior(np.diag(np.exp(n * H))), p, th) for n in (1, 4, 16, 64)]
    assert all(a > b for a, b in zip(dist, dist[1:]))
    assert dist[-1] < 0.02


@given(seeds(), theta_strategy())
def test_busemann_lipschitz(seed, theta):
    rng = np.random.default_rng(seed)
    g, h1, h2 = (linalg.random_sl(theta.d, rng, spread=1.5) for _ in range(3))
    lhs, rhs = lipschitz_lhs_rhs(g, h1, h2, theta)
    assert lhs <= rhs + 1e-9


def test_interior_value_is_projected_busemann(rng):
    th = Theta(4, (2,))
    g, h = linalg.random_sl(4, rng), linalg.random_sl(4, rng)
    expected = partial_projection(th, cartan_projection(np.linalg.inv(h) @ g) - cartan_projection(g))
    np.testing.assert_allclose(evaluate(Interior(g), h, th), expected, atol=1e-10)


@given(seeds(), theta_strategy())
def test_action_law(seed, theta):
    rng = np.random.default_rng(seed)
    g1, g2 = linalg.random_sl(theta.d, rng), linalg.random_sl(theta.d, rng)
    p = embed_flag(random_flag(theta, rng))
    a = probe_values(act(g1 @ g2, p), theta)
    b = probe_values(act(g1, act(g2, p)), theta)
    np.testing.assert_allclose(a, b, atol=1e-7)


def test_action_preserves_normalization(rng):
    th = Theta(4, (1, 2, 3))
    q = act(linalg.random_sl(4, rng, spread=2.0), embed_flag(random_flag(th, rng)))
    assert np.all(evaluate(q, np.eye(4)) == 0.0)


def test_probe_set_separates_distant_flags(rng):
    th = Theta(3, (1, 2))
    checked = 0
    while checked < 50:
        x, y = random_flag(th, rng), random_flag(th, rng)
        if flag_distance(x, y) <= 0.1:
            continue
        checked += 1
        diff = np.abs(probe_values(embed_flag(x), th) - probe_values(embed_flag(y), th)).max()
        assert diff > 1e-4


def test_schottky_positive_words_limit():
    th = Theta(2, (1,))
    a, _ = hyperbolic_pair()
    seq = np.array([np.linalg.matrix_power(a, n) for n in range(1, 16)])
    p, diag = orbit_limit(seq, th)
    q = embed_flag(flag_projection(seq[-1], th))
    assert np.abs(probe_values(p, th) - probe_values(q, th)).max() <= 1e-5
