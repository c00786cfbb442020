"""End-to-end invariant suites behind ``horops verify``.

Each suite returns a JSON-ready dict with a boolean ``pass`` and the
constants it measured.
"""

from __future__ import annotations

import numpy as np

from . import linalg
from .decompositions import PartialFlag, iwasawa_cocycle_partial, kak, random_flag
from .groups import product_flag_candidates
from .horofunction import embed_flag, evaluate
from .orbit import Orbit, enumerate_ball, limit_set_sample, regular_flag_frames
from .patterson import (
    NOT_CHECKABLE,
    critical_exponent,
    patterson_measure,
    ps_axiom_report,
    sample_by_length,
    shadow_lemma_report,
)
from .shadows import (
    STRICTNESS,
    conical_witness,
    endpoint_log_error,
    endpoint_shadow_margins,
    flag_candidates,
    flag_set_shadow_diameter,
)
from .weyl import Functional, Theta, chamber_margin, weights

SUITES = ("embedding", "shadows", "shadow-lemma", "axioms", "example59")
RESOLVED_ERROR = 1e-3
REGULAR_TOL = 1e-6


def embedding_suite(d: int, thetas, samples: int = 1000, seed: int = 0, tol: float = 1e-7) -> dict:
    """evaluate(iota(x), g) against the partial Iwasawa cocycle at (g^-1, x).

    The embedded flag is evaluated through the exterior-power route so that
    the two sides share no code beyond the group operations.
    """
    rng = np.random.default_rng(seed)
    per_theta = {}
    for theta in thetas:
        worst = 0.0
        for _ in range(samples):
            g = linalg.random_sl(d, rng, spread=1.0)
            g_inv = np.linalg.inv(g)
            x = random_flag(theta, rng)
            lhs = evaluate(embed_flag(x), g, theta, h_inv=g_inv, route="exterior")
            rhs = iwasawa_cocycle_partial(theta, g_inv, x)
            worst = max(worst, float(np.abs(lhs - rhs).max()))
        per_theta[str(theta)] = worst
    worst = max(per_theta.values())
    return {"suite": "embedding", "pass": worst <= tol, "samples_per_theta": samples,
            "max_residual": worst, "max_residual_per_theta": per_theta, "tolerance": tol}


def endpoint_suite(orbit: Orbit, theta: Theta, R_grid, resolved_error: float = RESOLVED_ERROR) -> dict:
    """U_theta(gamma) lies in the R-shadow of gamma for every regular element of the ball."""
    regular = np.flatnonzero((chamber_margin(orbit.kappa, theta) > REGULAR_TOL) & (orbit.length > 0))
    mats, invs, kap = orbit.matrices[regular], orbit.inverses[regular], orbit.kappa[regular]
    frames = regular_flag_frames(mats, invs)
    resolved = endpoint_log_error(theta, kap) < resolved_error
    per_R = {}
    total = 0
    for R in R_grid:
        m = endpoint_shadow_margins(theta, mats, invs, float(R), frames, kap)[resolved]
        v = int(np.sum(m <= STRICTNESS))
        total += v
        per_R[repr(float(R))] = {"violations": v, "min_margin": float(m.min()) if m.size else None,
                                 "max_abs_margin_minus_R": float(np.abs(m - R).max()) if m.size else None}
    return {"suite": "shadows", "pass": total == 0, "regular_elements": int(regular.size),
            "resolved_elements": int(resolved.sum()), "resolved_error": resolved_error,
            "violations": total, "per_R": per_R}


def _frames(flags) -> np.ndarray:
    return np.array([x.frame for x in flags])


def diameter_sequences(seed: int = 5, R: float = 2.0, schottky_t: float = 1.2, count: int = 400,
                       example59_horizon: int = 18) -> dict:
    """Shadow diameters along exp(nH), Schottky generator powers and the Example 5.9 sequence.

    The Example 5.9 candidates share the attracting line of the first block
    and vary the line of the second block.  The attracting line of A^n is
    resolved in double precision only while exp(2 n lambda) stays below
    1/eps, which sets ``example59_horizon``.
    """
    from .groups import PUNCTURED_TORUS, block_embed, hyperbolic_pair

    rng = np.random.default_rng(seed)
    ns = [1, 2, 3, 5, 8, 12, 20, 30]
    th3 = Theta(3, (1, 2))
    H = np.array([1.0, 0.2, -1.2])
    F = _frames(flag_candidates(PartialFlag.standard(th3), rng, count=count))
    exp_h = [flag_set_shadow_diameter(th3, np.diag(np.exp(n * H)), np.diag(np.exp(-n * H)), R, F)[0] for n in ns]

    a, _ = hyperbolic_pair(schottky_t)
    th2 = Theta(2, (1,))
    F = _frames(flag_candidates(PartialFlag(th2, kak(a).left_k), rng, count=count))
    a_inv = np.linalg.inv(a)
    sch = [flag_set_shadow_diameter(th2, np.linalg.matrix_power(a, n), np.linalg.matrix_power(a_inv, n), R, F)[0] for n in ns]

    A = PUNCTURED_TORUS[0]
    th4 = Theta(4, (1, 2, 3))
    u = _attracting_line(A)
    F = product_flag_candidates(u, rng, count, scale_range=(1e-300, 1e-300))
    A_inv = np.linalg.inv(A)
    ns59 = list(range(1, example59_horizon + 1))
    ex59 = [flag_set_shadow_diameter(th4, block_embed(np.linalg.matrix_power(A, n)),
                                     block_embed(np.linalg.matrix_power(A_inv, n)), R, F)[0] for n in ns59]
    ok = exp_h[-1] < 0.1 and sch[-1] < 0.1 and min(ex59) > 0.3
    return {"pass": bool(ok), "R": R, "n": ns, "exp_nH": exp_h, "schottky_powers": sch,
            "example59_n": ns59, "example59": ex59}


def _attracting_line(A) -> np.ndarray:
    w, V = np.linalg.eig(np.asarray(A, dtype=float))
    v = np.real(V[:, np.argmax(np.abs(w))])
    return v / np.linalg.norm(v)


def cyclic_closed_form_masses(H, theta: Theta, phi: Functional, s: float, L: int, R: float, tests) -> np.ndarray:
    """Shadow masses of the measure on {g^n : |n| <= L}, g = diag(exp H), from kappa(g^n) in closed form.

    kappa(g^n) is n H for n >= 0 and |n| i(H) for n < 0, with H sorted
    decreasingly; no matrix is formed.
    """
    Hs = np.sort(np.asarray(H, dtype=float))[::-1]
    iH = -Hs[::-1]

    def kap(j):
        j = np.asarray(j)
        return np.where(j[..., None] >= 0, j[..., None] * Hs, -j[..., None] * iH)

    n = np.arange(-L, L + 1)
    logw = -s * phi(kap(n))
    w = np.exp(logw - logw.max())
    w /= w.sum()
    out = []
    for m in tests:
        margin = np.min(R - weights(theta, kap(m)) - weights(theta, kap(n - m) - kap(n)), axis=-1)
        out.append(float(w[margin > STRICTNESS].sum()))
    return np.array(out)


def cyclic_shadow_lemma_suite(orbit: Orbit, theta: Theta, phi: Functional, s: float, R: float,
                              lengths, seed: int = 0, tol: float = 1e-9) -> dict:
    P = orbit.presentation
    g = P.generators[0]
    if len(P.generators) != 1 or np.abs(g - np.diag(np.diag(g))).max() > 0:
        raise ValueError("the closed-form shadow masses need a cyclic group generated by a diagonal matrix")
    H = np.log(np.diag(g))
    mu = patterson_measure(orbit, phi, s)
    tests = sample_by_length(orbit, lengths, 2, seed)
    rep = shadow_lemma_report(mu, orbit, theta, R, s, tests)
    # exponent of each test element: word in g or G
    exps = [len(orbit.word(int(i))) * (1 if orbit.word(int(i))[0] == 0 else -1) for i in tests]
    closed = cyclic_closed_form_masses(H, theta, phi, s, orbit.max_word_length, R, exps)
    rel = np.abs(rep.masses - closed) / np.maximum(closed, 1e-300)
    return {"suite": "shadow-lemma", "mode": "cyclic closed form", "pass": bool(rel.max() <= tol),
            "words": rep.words, "masses": rep.masses.tolist(), "closed_form": closed.tolist(),
            "max_relative_deviation": float(rel.max()), "report": rep.as_dict()}


def shadow_lemma_suite(presentation, theta: Theta, phi: Functional, L: int, L_compare: int | None,
                       R: float, lengths, per_length: int, s: float | None = None, s_offset: float = 0.05,
                       seed: int = 0, dedup_tol: float = 1e-6, cap: int = 5_000_000, threads: int = 1,
                       max_spread: float = 100.0, max_drift: float = 0.25) -> dict:
    """Ratios mu_s(O_R(gamma)) / exp(-delta |gamma|_phi) and their stability as the ball grows.

    delta is the exponent estimate of the smaller ball and s defaults to
    delta + s_offset; the same words are tested in both balls.
    """
    small = enumerate_ball(presentation, L, dedup_tol=dedup_tol, cap=cap, threads=threads)
    est = critical_exponent(small, phi)
    delta = est.delta_hat
    s = delta + s_offset if s is None else s
    tests = sample_by_length(small, lengths, per_length, seed)
    words = [small.word(int(i)) for i in tests]
    rep = shadow_lemma_report(patterson_measure(small, phi, s), small, theta, R, delta, tests)
    out = {"suite": "shadow-lemma", "mode": "ratio stability", "delta_hat": delta, "s": s, "R": R,
           "ball": {"L": L, "size": len(small), "report": rep.as_dict()},
           "rows": [list(r) for r in rep.rows()]}
    ok = rep.spread <= max_spread and rep.empty_shadows == 0
    if L_compare is not None:
        big = enumerate_ball(presentation, L_compare, dedup_tol=dedup_tol, cap=cap, threads=threads)
        rows = [big.index_of_word(w) if big.is_free else big.lookup(presentation.evaluate_word(w)) for w in words]
        rows = [int(r) for r in rows if r is not None and r >= 0]
        rep2 = shadow_lemma_report(patterson_measure(big, phi, s), big, theta, R, delta, rows)
        drift = abs(rep2.spread - rep.spread) / rep.spread
        out["compare_ball"] = {"L": L_compare, "size": len(big), "report": rep2.as_dict()}
        out["spread_drift"] = drift
        ok = ok and rep2.spread <= max_spread and rep2.empty_shadows == 0 and drift < max_drift
    out["pass"] = bool(ok)
    return out


def axioms_suite(orbit: Orbit, theta: Theta, phi: Functional, R_grid, s: float | None = None,
                 s_offset: float = 0.05, h_mode="constant", seed: int = 0, tol: float = 1e-7) -> dict:
    est = critical_exponent(orbit, phi)
    s = est.delta_hat + s_offset if s is None else s
    mu = patterson_measure(orbit, phi, s, h_mode)
    rep = ps_axiom_report(orbit, mu, theta, phi, R_grid, seed=seed, tol=tol)
    checked = ("PS1", "PS2", "PS4", "PS6", "PS7", "PS8")
    ok = all(rep[k].verdict == "pass" for k in checked)
    ok = ok and rep["PS8"].evidence_count >= 10
    ok = ok and rep["PS3"].verdict == NOT_CHECKABLE and rep["PS5"].verdict == NOT_CHECKABLE
    ps5 = rep["PS5"].constants
    ok = ok and ps5.get("instances", 0) >= 100 and ps5.get("transport_identity_max_residual", np.inf) <= tol
    return {"suite": "axioms", "pass": bool(ok), "delta_hat": est.delta_hat, "s": s,
            "axioms": {k: v.as_dict() for k, v in rep.items()}}


def _is_block_sl2(P) -> bool:
    if P.dim != 4:
        return False
    return all(np.array_equal(g[2:, 2:], np.eye(2)) and not g[:2, 2:].any() and not g[2:, :2].any()
               for g in P.generators)


def example59_suite(orbit: Orbit, theta: Theta, margin_floor: float = 0.1, R: float = 3.0,
                    min_chain: int = 5, directions: int = 100, seed: int = 0,
                    diameter_R: float = 2.0, horizon: int = 18) -> dict:
    """Empty regular limit set, conical product directions, non-shrinking shadows."""
    from .groups import block_embed

    P = orbit.presentation
    if not _is_block_sl2(P):
        raise ValueError("the example59 suite needs SL(2) generators embedded block-diagonally in SL(4)")
    if not theta.is_full:
        raise ValueError("the example59 suite works with the full flag manifold of SL(4)")
    flags, _ = limit_set_sample(orbit, theta, margin_floor)

    rng = np.random.default_rng(seed)
    found = contracting = 0
    chain_lengths = []
    for _ in range(directions):
        a = rng.uniform(0.0, np.pi)
        F = product_flag_candidates(np.array([np.cos(a), np.sin(a)]), rng, 1, scale_range=(1e-300, 1e-300))[0]
        ch = conical_witness(embed_flag(PartialFlag(theta, F)), orbit, R, min_chain, theta)
        if ch is not None:
            found += 1
            contracting += int(ch.contracting)
            chain_lengths.append(len(ch))
    frac = found / directions

    A = P.generators[0][:2, :2]
    A_inv = np.linalg.inv(A)
    F = product_flag_candidates(_attracting_line(A), rng, 400, scale_range=(1e-300, 1e-300))
    diam = [flag_set_shadow_diameter(theta, block_embed(np.linalg.matrix_power(A, n)),
                                     block_embed(np.linalg.matrix_power(A_inv, n)), diameter_R, F)[0]
            for n in range(1, horizon + 1)]
    ok = len(flags) == 0 and frac >= 0.9 and contracting == 0 and min(diam) > 0.3
    return {"suite": "example59", "pass": bool(ok),
            "regular_limit_set": {"margin_floor": margin_floor, "flags": len(flags)},
            "conical": {"R": R, "min_chain": min_chain, "directions": directions, "found": found,
                        "fraction": frac, "contracting": contracting,
                        "shortest_chain": min(chain_lengths) if chain_lengths else None},
            "shadow_diameters": {"R": diameter_R, "n": list(range(1, horizon + 1)), "diameters": diam}}
