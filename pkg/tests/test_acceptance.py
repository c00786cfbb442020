"""Acceptance criteria 1-11, each at its stated tolerance and runtime budget.

Every criterion records one PASS/FAIL line before asserting; the lines are
printed in the terminal summary (see conftest.py).
"""

import time

import numpy as np

from horops import linalg
from horops.decompositions import (
    PartialFlag,
    cartan_projection,
    iwasawa_cocycle_full,
    iwasawa_cocycle_partial,
    kak,
    random_flag,
)
from horops.groups import builtin
from horops.horofunction import Interior, act, cocycle_B, embed_flag, lipschitz_lhs_rhs
from horops.orbit import enumerate_ball
from horops.patterson import critical_exponent
from horops.shadows import (
    ShadowSpec,
    comparison_radius,
    flag_candidates,
    shadow_margin,
    symmetric_shadow_search,
)
from horops.suites import (
    axioms_suite,
    diameter_sequences,
    embedding_suite,
    endpoint_suite,
    example59_suite,
    shadow_lemma_suite,
)
from horops.weyl import Theta, fundamental_weight, simple_root

RESULTS: dict[int, str] = {}


def record(n: int, ok: bool, elapsed: float, budget: float, detail: str) -> bool:
    within = elapsed < budget
    passed = ok and within
    RESULTS[n] = f"criterion {n:2d}: {'PASS' if passed else 'FAIL'}  {detail}  ({elapsed:.1f} s, budget {budget:.0f} s)"
    print(RESULTS[n])
    return passed


def test_criterion_01_r1_identity():
    t0 = time.perf_counter()
    rng = np.random.default_rng(101)
    worst_w = worst_a = 0.0
    for d in (3, 4):
        g = linalg.random_sl(d, rng, size=10_000, spread=1.5)
        H = cartan_projection(g)
        for k in range(1, d):
            s = linalg.singular_values(linalg.exterior_power(g, k))
            worst_w = max(worst_w, float(np.abs(np.log(s[:, 0]) - fundamental_weight(k, H)).max()))
            worst_a = max(worst_a, float(np.abs(np.log(s[:, 0] / s[:, 1]) - simple_root(k, H)).max()))
    ok = worst_w <= 1e-8 and worst_a <= 1e-8
    assert record(1, ok, time.perf_counter() - t0, 30, f"max weight error {worst_w:.2e}, max root error {worst_a:.2e}")


def _pushed_frames(g, frames):
    return linalg.qr_positive(g @ frames, check=False)[0]


def test_criterion_02_cocycles():
    t0 = time.perf_counter()
    rng = np.random.default_rng(102)
    worst = {"full Iwasawa": 0.0, "partial Iwasawa": 0.0, "compactification": 0.0}
    for d in (3, 4):
        g1, g2 = linalg.random_sl(d, rng, size=500), linalg.random_sl(d, rng, size=500)
        F = linalg.random_special_orthogonal(d, rng, size=500)
        lhs = iwasawa_cocycle_full(g1 @ g2, F)
        rhs = iwasawa_cocycle_full(g1, _pushed_frames(g2, F)) + iwasawa_cocycle_full(g2, F)
        worst["full Iwasawa"] = max(worst["full Iwasawa"], float(np.abs(lhs - rhs).max()))
    thetas = [Theta(3, (1,)), Theta(3, (2,)), Theta(3, (1, 2)), Theta(4, (2,)), Theta(4, (1, 3))]
    for th in thetas:
        g1, g2 = linalg.random_sl(th.d, rng, size=200), linalg.random_sl(th.d, rng, size=200)
        F = linalg.random_special_orthogonal(th.d, rng, size=200)
        lhs = iwasawa_cocycle_partial(th, g1 @ g2, F)
        rhs = iwasawa_cocycle_partial(th, g1, _pushed_frames(g2, F)) + iwasawa_cocycle_partial(th, g2, F)
        worst["partial Iwasawa"] = max(worst["partial Iwasawa"], float(np.abs(lhs - rhs).max()))
    for i in range(1000):
        th = thetas[i % len(thetas)]
        g1, g2 = linalg.random_sl(th.d, rng), linalg.random_sl(th.d, rng)
        p = embed_flag(random_flag(th, rng)) if i % 3 else Interior(linalg.random_sl(th.d, rng))
        lhs = cocycle_B(th, g1 @ g2, p)
        rhs = cocycle_B(th, g1, act(g2, p)) + cocycle_B(th, g2, p)
        worst["compactification"] = max(worst["compactification"], float(np.abs(lhs - rhs).max()))
    ok = max(worst.values()) <= 1e-7
    detail = ", ".join(f"{k} {v:.2e}" for k, v in worst.items())
    assert record(2, ok, time.perf_counter() - t0, 30, detail)


def test_criterion_03_lipschitz():
    t0 = time.perf_counter()
    rng = np.random.default_rng(103)
    worst = -np.inf
    for d in (3, 4):
        g, h1, h2 = (linalg.random_sl(d, rng, size=500, spread=1.5) for _ in range(3))
        lhs, rhs = lipschitz_lhs_rhs(g, h1, h2, Theta.full(d))
        worst = max(worst, float((lhs - rhs).max()))
    ok = worst <= 1e-7
    assert record(3, ok, time.perf_counter() - t0, 10, f"max lhs - rhs {worst:.3f} over 1000 triples")


def test_criterion_04_embedding():
    t0 = time.perf_counter()
    rep = embedding_suite(3, [Theta(3, (1,)), Theta(3, (2,)), Theta(3, (1, 2))], samples=1000, seed=104, tol=1e-7)
    assert record(4, rep["pass"], time.perf_counter() - t0, 30, f"max residual {rep['max_residual']:.2e}")


def test_criterion_05_endpoints_in_shadows():
    t0 = time.perf_counter()
    P, th, _ = builtin("schottky")
    orbit = enumerate_ball(P, 10)
    rep = endpoint_suite(orbit, th, [0.5, 1.0, 2.0, 5.0])
    detail = (f"{rep['violations']} violations over {rep['resolved_elements']} resolved "
              f"of {rep['regular_elements']} regular elements")
    assert record(5, rep["pass"], time.perf_counter() - t0, 120, detail)


def test_criterion_06_shadow_diameters():
    t0 = time.perf_counter()
    rep = diameter_sequences()
    detail = (f"exp(nH) final {rep['exp_nH'][-1]:.3f}, Schottky powers final {rep['schottky_powers'][-1]:.3f}, "
              f"Example 5.9 min {min(rep['example59']):.3f}")
    assert record(6, rep["pass"], time.perf_counter() - t0, 120, detail)


def test_criterion_07_symmetric_shadows_included():
    t0 = time.perf_counter()
    rng = np.random.default_rng(11)
    thetas = [Theta(3, (1,)), Theta(3, (2,)), Theta(3, (1, 2))]
    violations = members = 0
    for i in range(200):
        th = thetas[i % 3]
        g = linalg.random_sl(3, rng, spread=1.5)
        g_inv = np.linalg.inv(g)
        R = [0.5, 1.0, 2.0][i % 3 if i % 2 else (i // 2) % 3]
        x = flag_candidates(PartialFlag(th, kak(g).left_k), rng, count=1, n_uniform=0, scale_range=(1e-3, 1.0))[0]
        res = symmetric_shadow_search(th, g, R, x, g_inv=g_inv)
        if res.member:
            members += 1
            if shadow_margin(ShadowSpec(g, comparison_radius(th, R), th, g_inv), embed_flag(x)) <= 0:
                violations += 1
    ok = violations == 0 and members > 0
    assert record(7, ok, time.perf_counter() - t0, 300, f"{violations} violations, {members} certified members of 200 pairs")


def test_criterion_08_example59():
    t0 = time.perf_counter()
    P, th, _ = builtin("example59")
    orbit = enumerate_ball(P, 10)
    rep = example59_suite(orbit, th, margin_floor=0.1, R=3.0, min_chain=5, directions=100, seed=0)
    c = rep["conical"]
    detail = (f"limit flags {rep['regular_limit_set']['flags']}, conical {c['fraction']:.0%}, "
              f"contracting {c['contracting']}")
    assert record(8, rep["pass"], time.perf_counter() - t0, 180, detail)


def test_criterion_09_shadow_lemma():
    t0 = time.perf_counter()
    P, th, phi = builtin("schottky")
    rep = shadow_lemma_suite(P, th, phi, 10, 12, 10.0, range(4, 11), 5, s_offset=0.05, seed=1)
    detail = (f"spread L=10 {rep['ball']['report']['spread']:.2f}, L=12 {rep['compare_ball']['report']['spread']:.2f}, "
              f"drift {rep['spread_drift']:.1%}")
    assert record(9, rep["pass"], time.perf_counter() - t0, 180, detail)


def test_criterion_10_critical_exponents():
    t0 = time.perf_counter()
    P, _, phi = builtin("cyclic")
    cyc = critical_exponent(enumerate_ball(P, 50), phi).delta_hat
    P, _, phi = builtin("punctured-torus")
    pt = critical_exponent(enumerate_ball(P, 12), phi, cross_check=False).delta_hat
    P, _, phi = builtin("schottky")
    est = critical_exponent(enumerate_ball(P, 10), phi)
    agree = abs(est.delta_hat - est.bisection) / est.bisection
    ok = -0.05 <= cyc <= 0.05 and 1.6 <= pt <= 2.4 and agree <= 0.1
    detail = f"cyclic {cyc:.4f}, punctured torus {pt:.3f}, Schottky {est.delta_hat:.3f} vs {est.bisection:.3f} ({agree:.1%})"
    assert record(10, ok, time.perf_counter() - t0, 180, detail)


def test_criterion_11_ps_axioms():
    t0 = time.perf_counter()
    P, th, phi = builtin("sym2-schottky")
    orbit = enumerate_ball(P, 10, theta=th, phi=phi)
    rep = axioms_suite(orbit, th, phi, [1.0, 2.0, 4.0], seed=0)
    ax = rep["axioms"]
    detail = ", ".join(f"{k} {v['verdict']}" for k, v in sorted(ax.items())
                       if not v["verdict"].startswith("not"))
    detail += f"; PS8 chains {ax['PS8']['evidence_count']}"
    assert record(11, rep["pass"], time.perf_counter() - t0, 300, detail)

