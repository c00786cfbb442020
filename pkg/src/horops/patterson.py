"""phi-lengths, critical exponents, Poincare sums and atomic Patterson measures.

Measures live on orbit points gamma o.  Reports push atoms around by group
elements, measure shadow masses and collect empirical constants for the
axioms of a Patterson-Sullivan system at finite scale.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .decompositions import cartan_projection
from .horofunction import Interior, act, cocycle_B, embed_flag, evaluate
from .orbit import Orbit, OrbitElement, regular_flag_frames
from .shadows import (
    STRICTNESS,
    conical_witness,
    endpoint_log_error,
)
from .weyl import Functional, Theta, chamber_margin, weights

NOT_CHECKABLE = "not machine-checkable at finite scale"


class ExponentError(ValueError):
    """The orbit is too small to estimate a growth rate."""


class MeasureUnderflowError(ArithmeticError):
    """Every atom weight underflowed."""


def phi_length(phi: Functional, gamma) -> float:
    """phi(kappa(gamma)) for a matrix or an OrbitElement."""
    if isinstance(gamma, OrbitElement):
        return float(phi(gamma.kappa))
    return float(phi(cartan_projection(np.asarray(gamma, dtype=float))))


# critical exponent ---------------------------------------------------------


@dataclass(frozen=True)
class ExponentEstimate:
    delta_hat: float
    shell_slopes: np.ndarray
    confidence_band: tuple[float, float]
    window: tuple[float, float]
    samples: int
    bisection: float | None = None

    def __post_init__(self):
        lo, hi = self.confidence_band
        if not lo <= self.delta_hat <= hi:
            raise ValueError("ExponentEstimate: delta_hat outside its band")

    def as_dict(self) -> dict:
        return {
            "delta_hat": self.delta_hat,
            "confidence_band": list(self.confidence_band),
            "window": list(self.window),
            "samples": self.samples,
            "shell_slopes": self.shell_slopes.tolist(),
            "bisection_cross_check": self.bisection,
        }


def unbiased_radius(orbit: Orbit, phi: Functional) -> float:
    """Largest T for which the word ball is taken to cover the phi-ball.

    Capped by L times the least generator phi-length, and by the least
    phi-length on the outermost shell: words beyond the ball are assumed to be
    at least that long, which fails first near cusps.
    """
    gens = np.flatnonzero(orbit.length == 1)
    outer = orbit.shell(orbit.max_word_length)
    if gens.size == 0 or outer.size == 0:
        return 0.0
    by_generators = orbit.max_word_length * float(np.min(phi(orbit.kappa[gens])))
    by_shell = float(np.min(phi(orbit.kappa[outer])))
    return min(by_generators, by_shell)


def _log_counts(lengths_sorted: np.ndarray, T: np.ndarray) -> np.ndarray:
    return np.log(np.searchsorted(lengths_sorted, T, side="right"))


def critical_exponent(orbit: Orbit, phi: Functional, samples: int = 64, cross_check: bool = True) -> ExponentEstimate:
    """Slope of log #{phi kappa <= T} against T over the tail of the unbiased range.

    The main window is [T_max / 2, T_max]; the band comes from regressions on
    its two halves.  shell_slopes are finite-difference slopes between
    consecutive multiples of the minimal generator growth.
    """
    T_max = unbiased_radius(orbit, phi)
    if len(orbit) < 3 or T_max <= 0:
        raise ExponentError("no unbiased window: orbit too small")
    lens = np.sort(phi(orbit.kappa))
    lo_T = T_max / 2.0
    T = np.linspace(lo_T, T_max, samples)
    logN = _log_counts(lens, T)
    if np.ptp(logN) == 0 and np.searchsorted(lens, T_max, side="right") < 3:
        raise ExponentError("no unbiased window: orbit too small")
    slope = float(np.polyfit(T, logN, 1)[0])
    half = samples // 2
    subs = [float(np.polyfit(T[:half], logN[:half], 1)[0]), float(np.polyfit(T[half:], logN[half:], 1)[0])]
    band = (min([slope] + subs), max([slope] + subs))
    step = T_max / orbit.max_word_length
    grid = step * np.arange(1, orbit.max_word_length + 1)
    lg = _log_counts(lens, grid)
    shell_slopes = np.diff(lg) / step
    bis = poincare_abscissa(orbit, phi) if cross_check else None
    return ExponentEstimate(slope, shell_slopes, band, (lo_T, T_max), samples, bis)


def _shell_sums(orbit: Orbit, phi: Functional, s: float) -> np.ndarray:
    lens = phi(orbit.kappa)
    return np.bincount(orbit.length, weights=np.exp(-s * lens), minlength=orbit.max_word_length + 1)


def poincare_partial_sum(orbit: Orbit, phi: Functional, s: float) -> tuple[float, np.ndarray]:
    """Sum of exp(-s phi kappa(gamma)) over the ball and shell-to-shell tail ratios."""
    shells = _shell_sums(orbit, phi, s)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratios = shells[2:] / shells[1:-1]
    return float(shells.sum()), ratios


def poincare_abscissa(orbit: Orbit, phi: Functional, tail: int = 3, tol: float = 1e-10) -> float:
    """Bisection on s for the outer shell ratios of the Poincare partial sum to equal 1."""
    if orbit.max_word_length < tail + 2:
        raise ExponentError("no unbiased window: too few shells for the Poincare bisection")

    def excess(s):
        _, r = poincare_partial_sum(orbit, phi, s)
        return float(np.mean(np.log(r[-tail:])))

    lo, hi = 0.0, 1.0
    while excess(hi) > 0:
        hi *= 2.0
        if hi > 1e6:
            raise ExponentError("Poincare bisection did not bracket the abscissa")
    if excess(lo) < 0:
        return 0.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if excess(mid) > 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


# atomic measures -----------------------------------------------------------


@dataclass(frozen=True)
class AtomicMeasure:
    """Weighted orbit points; ``atoms`` are orbit row indices."""

    orbit: Orbit = field(repr=False)
    atoms: np.ndarray
    log_weights: np.ndarray
    s: float
    phi: Functional
    h_mode: str = "constant"
    epsilon: float = 0.0
    normalized: bool = True

    @property
    def weights(self) -> np.ndarray:
        return np.exp(self.log_weights)

    def point(self, j: int) -> Interior:
        i = int(self.atoms[j])
        return Interior(self.orbit.matrices[i], self.orbit.inverses[i])

    def mass(self, mask) -> float:
        return float(np.sum(self.weights[np.asarray(mask)]))

    def log_h(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        if self.h_mode == "constant":
            return np.zeros_like(t)
        return self.epsilon * np.log1p(t)


def _parse_h_mode(h_mode) -> tuple[str, float]:
    if isinstance(h_mode, tuple):
        name, eps = h_mode
        if name != "polynomial":
            raise ValueError(f"unknown h_mode {h_mode!r}")
        return "polynomial", float(eps)
    if h_mode == "constant":
        return "constant", 0.0
    if isinstance(h_mode, str) and h_mode.startswith("polynomial"):
        eps = float(h_mode[len("polynomial"):].strip("()") or 0.0)
        return "polynomial", eps
    raise ValueError(f"unknown h_mode {h_mode!r}; use 'constant' or 'polynomial(eps)'")


def patterson_measure(orbit: Orbit, phi: Functional, s: float, h_mode="constant") -> AtomicMeasure:
    """mu_s with weights proportional to h(phi kappa(gamma)) exp(-s phi kappa(gamma))."""
    if not s > 0:
        raise ValueError("patterson_measure: s must be positive")
    if len(orbit) == 0:
        raise ValueError("patterson_measure: empty orbit")
    mode, eps = _parse_h_mode(h_mode)
    t = phi(orbit.kappa)
    logh = eps * np.log1p(np.maximum(t, 0.0)) if mode == "polynomial" else np.zeros_like(t)
    raw = logh - s * t
    top = raw.max()
    w = np.exp(raw - top)
    Z = w.sum()
    if not np.isfinite(top) or Z == 0.0:
        raise MeasureUnderflowError("patterson_measure: total weight underflow")
    return AtomicMeasure(orbit, np.arange(len(orbit)), raw - top - np.log(Z), float(s), phi, mode, eps)


# quasi-invariance ----------------------------------------------------------


def _test_index(orbit: Orbit, gamma) -> int:
    if isinstance(gamma, (int, np.integer)):
        return int(gamma)
    if isinstance(gamma, str):
        i = orbit.index_of_word(orbit.presentation.parse_word(gamma)) if orbit.is_free else -1
        if i < 0:
            i = orbit.lookup(orbit.presentation.evaluate_word(orbit.presentation.parse_word(gamma)))
        if i is None or i < 0:
            raise KeyError(f"word {gamma!r} is not in the ball")
        return int(i)
    i = orbit.lookup(np.asarray(gamma, dtype=float))
    if i is None:
        raise KeyError("test element is not in the ball")
    return i


def _preimage_rows(orbit: Orbit, i: int, rows) -> np.ndarray:
    """Rows of gamma_i^-1 gamma_r in the ball, -1 when outside."""
    if orbit.is_free:
        u = [c ^ 1 for c in reversed(orbit.word(i))]
        return orbit.left_multiply(u, rows)
    out = np.full(len(rows), -1, dtype=np.int64)
    prods = orbit.inverses[i] @ orbit.matrices[rows]
    for j, g in enumerate(prods):
        k = orbit.lookup(g)
        out[j] = -1 if k is None else k
    return out


@dataclass(frozen=True)
class QuasiInvarianceReport:
    test_words: list[str]
    shells: np.ndarray
    max_log_deviation: np.ndarray  # (tests, shells)
    truncation_loss: np.ndarray  # lost mass / total mass per test
    verdict: str

    def as_dict(self) -> dict:
        return {
            "verdict": self.verdict,
            "tests": [
                {
                    "word": w,
                    "max_log_deviation_per_shell": {int(n): _finite(v) for n, v in zip(self.shells, row)},
                    "truncation_loss": float(loss),
                }
                for w, row, loss in zip(self.test_words, self.max_log_deviation, self.truncation_loss)
            ],
        }


def _finite(v):
    return None if not np.isfinite(v) else float(v)


def quasi_invariance_report(mu: AtomicMeasure, test_elements, theta: Theta, max_loss: float = 0.5) -> QuasiInvarianceReport:
    """Compare gamma_* mu with mu on matched atoms.

    At the atom gamma' o the log density of gamma_* mu against mu is
    log w(gamma^-1 gamma') - log w(gamma'); it is compared with
    -s phi(B_theta(gamma^-1, gamma' o)).  Atoms whose preimage leaves the ball
    are skipped and their mass is counted as truncation loss.
    """
    orbit = mu.orbit
    shells = np.arange(orbit.max_word_length + 1)
    pos = np.full(len(orbit), -1, dtype=np.int64)
    pos[mu.atoms] = np.arange(len(mu.atoms))
    words, devs, losses = [], [], []
    lw = mu.log_weights
    for gamma in test_elements:
        i = _test_index(orbit, gamma)
        words.append(orbit.word_label(i))
        pre = _preimage_rows(orbit, i, mu.atoms)
        ok = pre >= 0
        ok[ok] &= pos[pre[ok]] >= 0
        lost = float(np.sum(mu.weights[~ok]))
        losses.append(lost / float(np.sum(mu.weights)))
        rows = mu.atoms[ok]
        # B_theta(gamma^-1, gamma' o) through the interior formula
        B = orbit.kappa[pre[ok]] - orbit.kappa[rows]
        observed = lw[pos[pre[ok]]] - lw[pos[rows]]
        dev = np.abs(observed + mu.s * mu.phi(B))
        row = np.full(len(shells), np.nan)
        ls = orbit.length[rows]
        for n in shells:
            sel = ls == n
            if np.any(sel):
                row[n] = dev[sel].max()
        devs.append(row)
    loss_arr = np.array(losses)
    verdict = "ball too small" if np.any(loss_arr > max_loss) else "ok"
    return QuasiInvarianceReport(words, shells, np.array(devs).reshape(len(words), len(shells)), loss_arr, verdict)


# shadow lemma --------------------------------------------------------------


def atom_shadow_margins(orbit: Orbit, i: int, theta: Theta, R: float, rows=None) -> np.ndarray:
    """Shadow margins of the atoms gamma' o against O_R^theta(gamma_i).

    B_theta(gamma^-1, gamma' o) = pi_theta(kappa(gamma^-1 gamma') - kappa(gamma')),
    with kappa(gamma^-1 gamma') from the ball whenever possible.
    """
    rows = np.arange(len(orbit)) if rows is None else np.asarray(rows)
    rel = orbit.relative_kappa(i, rows)
    wk = weights(theta, orbit.kappa[i])
    wB = weights(theta, rel - orbit.kappa[rows])
    return np.min(R - wk - wB, axis=-1)


@dataclass(frozen=True)
class ShadowLemmaReport:
    R: float
    delta: float
    words: list[str]
    phi_lengths: np.ndarray
    masses: np.ndarray
    ratios: np.ndarray

    @property
    def spread(self) -> float:
        r = self.ratios[self.ratios > 0]
        return float(r.max() / r.min()) if r.size else np.inf

    @property
    def constant(self) -> float:
        r = self.ratios[self.ratios > 0]
        return float(max(r.max(), 1.0 / r.min())) if r.size else np.inf

    @property
    def empty_shadows(self) -> int:
        return int(np.sum(self.masses == 0))

    def as_dict(self) -> dict:
        r = self.ratios[self.ratios > 0]
        return {
            "R": self.R,
            "delta": self.delta,
            "tests": len(self.words),
            "empty_shadows": self.empty_shadows,
            "ratio_min": float(r.min()) if r.size else None,
            "ratio_max": float(r.max()) if r.size else None,
            "ratio_median": float(np.median(r)) if r.size else None,
            "spread": self.spread,
            "implied_C": self.constant,
        }

    def rows(self):
        for w, t, m, r in zip(self.words, self.phi_lengths, self.masses, self.ratios):
            yield w, float(t), float(m), float(r)


def shadow_lemma_report(mu: AtomicMeasure, orbit: Orbit, theta: Theta, R: float, delta: float, tests) -> ShadowLemmaReport:
    """mu(O_R(gamma)) against exp(-delta |gamma|_phi) for each test element."""
    if mu.orbit is not orbit:
        raise ValueError("shadow_lemma_report: measure and orbit differ")
    w = mu.weights
    words, lens, masses = [], [], []
    for gamma in tests:
        i = _test_index(orbit, gamma)
        m = atom_shadow_margins(orbit, i, theta, R, mu.atoms)
        words.append(orbit.word_label(i))
        lens.append(float(mu.phi(orbit.kappa[i])))
        masses.append(float(np.sum(w[m > STRICTNESS])))
    lens = np.array(lens)
    masses = np.array(masses)
    return ShadowLemmaReport(R, float(delta), words, lens, masses, masses / np.exp(-delta * lens))


def sample_by_length(orbit: Orbit, lengths, per_length: int, seed: int = 0) -> np.ndarray:
    """Deterministic sample of row indices, ``per_length`` from each word length."""
    rng = np.random.default_rng(seed)
    out = []
    for n in lengths:
        rows = orbit.shell(n)
        if rows.size:
            out.append(np.sort(rng.choice(rows, size=min(per_length, rows.size), replace=False)))
    return np.concatenate(out) if out else np.array([], dtype=int)


# PS axioms -----------------------------------------------------------------


@dataclass
class AxiomVerdict:
    verdict: str
    evidence_count: int
    constants: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {"verdict": self.verdict, "evidence_count": self.evidence_count, "constants": self.constants}


def _pass(ok: bool) -> str:
    return "pass" if ok else "fail"


def ps_axiom_report(orbit: Orbit, mu: AtomicMeasure, theta: Theta, phi: Functional, R_grid,
                    tests_per_shell: int = 6, drift_shells=(6, 10), chains: int = 10,
                    transport_checks: int = 100, seed: int = 0, tol: float = 1e-7) -> dict[str, AxiomVerdict]:
    """Finite-scale checks of the axioms of a Patterson-Sullivan system.

    The cocycle is sigma(gamma, x) = phi(B_theta(gamma, x)) and
    ||gamma||_sigma = phi(kappa(gamma)).  Atoms of ``mu`` are the test points.
    """
    R_grid = sorted(float(r) for r in R_grid)
    R = R_grid[len(R_grid) // 2]
    L = orbit.max_word_length
    tests = [int(i) for i in sample_by_length(orbit, range(1, L + 1), tests_per_shell, seed)]
    atoms = mu.atoms
    K = orbit.kappa[atoms]
    # omega_k B_theta(gamma^-1, gamma' o) for every test gamma and atom gamma'
    wB = {i: weights(theta, orbit.relative_kappa(i, atoms) - K) for i in tests}
    wk = {i: weights(theta, orbit.kappa[i]) for i in tests}
    phi_w = np.array([phi.weight_coeffs.get(k, 0.0) for k in theta.indices])
    out: dict[str, AxiomVerdict] = {}

    # PS1: |sigma(gamma, x)| <= c(gamma) with c from subadditivity of omega_k kappa
    worst = 0.0
    viol = count = 0
    max_bound = 0.0
    for i in tests:
        inv_word = [c ^ 1 for c in reversed(orbit.word(i))]
        j = orbit.index_of_word(inv_word) if orbit.is_free else orbit.lookup(orbit.inverses[i])
        if j is None or j < 0:
            continue
        # B_theta(gamma, gamma' o) = pi(kappa(gamma gamma') - kappa(gamma'))
        vals = np.abs(phi(orbit.relative_kappa(j, atoms) - K))
        cw = np.maximum(wk[i], weights(theta, orbit.kappa[j]))
        bound = float(np.abs(phi_w) @ cw)
        viol += int(np.sum(vals > bound + tol))
        count += len(vals)
        worst = max(worst, float(vals.max()))
        max_bound = max(max_bound, bound)
    out["PS1"] = AxiomVerdict(_pass(viol == 0), count, {"max_abs_sigma": worst, "violations": viol, "max_bound": max_bound})

    # PS2: on own-shadow atoms, | ||gamma|| + sigma(gamma^-1, x) | <= R sum |c_alpha|
    viol = count = 0
    worst = 0.0
    members = {}
    for i in tests:
        margin = np.min(R - wk[i] - wB[i], axis=-1)
        members[i] = margin > STRICTNESS
        if not np.any(members[i]):
            continue
        dev = np.abs((wk[i] + wB[i][members[i]]) @ phi_w)
        viol += int(np.sum(dev > R * phi.l1 + tol))
        count += int(members[i].sum())
        worst = max(worst, float(dev.max()))
    out["PS2"] = AxiomVerdict(_pass(viol == 0), count, {"max_deviation": worst, "bound": R * phi.l1, "violations": viol})

    # PS4: finitely many elements below every phi-length; lengths escape with word length
    lens = phi(orbit.kappa)
    shells = np.arange(1, L + 1)
    mins = np.array([lens[orbit.length == n].min() for n in shells])
    tail = shells >= max(2, L // 2)
    slope = float(np.polyfit(shells[tail], mins[tail], 1)[0]) if tail.sum() >= 2 else 0.0
    out["PS4"] = AxiomVerdict(_pass(slope > 0 and bool(np.all(np.isfinite(lens)))), len(orbit),
                              {"min_phi_length_per_shell": mins.tolist(), "tail_slope": slope})

    # PS6: nested shadows in R
    viol = count = 0
    for i in tests:
        worst_k = np.max(wk[i] + wB[i], axis=-1)
        prev = None
        for r in R_grid:
            mem = r - worst_k > STRICTNESS
            if prev is not None:
                viol += int(np.sum(prev & ~mem))
                count += int(prev.sum())
            prev = mem
    out["PS6"] = AxiomVerdict(_pass(viol == 0), count, {"violations": viol})

    out["PS7"] = _ps7(orbit, theta, phi, tests, members, wk, wB, drift_shells)
    out["PS8"] = _ps8(orbit, theta, R, chains, seed)
    out["PS3"] = AxiomVerdict(NOT_CHECKABLE, 0, {})
    out["PS5"] = AxiomVerdict(NOT_CHECKABLE, transport_checks, _transport_spot_check(orbit, theta, transport_checks, seed))
    return out


def _ps7(orbit, theta, phi, tests, members, wk, wB, drift_shells) -> AxiomVerdict:
    """Intersecting pairs alpha, beta with |alpha| <= |beta|: empirical R' and C per shell of beta."""
    lens = phi(orbit.kappa)
    per_shell_C: dict[int, float] = {}
    per_shell_R: dict[int, float] = {}
    pairs = 0
    for b in tests:
        mb = members[b]
        if not np.any(mb):
            continue
        for a in tests:
            if a == b or lens[a] > lens[b] or not np.any(members[a] & mb):
                continue
            pairs += 1
            r_needed = float(np.max(wk[a] + wB[a][mb]))
            rel = orbit.relative_kappa(a, np.array([b]))[0]
            C = abs(lens[b] - (lens[a] + float(phi(rel))))
            n = int(orbit.length[b])
            per_shell_C[n] = max(per_shell_C.get(n, 0.0), C)
            per_shell_R[n] = max(per_shell_R.get(n, 0.0), r_needed)
    s0, s1 = drift_shells
    consts = {
        "pairs": pairs,
        "C_per_shell": {str(k): v for k, v in sorted(per_shell_C.items())},
        "R_prime_per_shell": {str(k): v for k, v in sorted(per_shell_R.items())},
    }
    if s0 in per_shell_C and s1 in per_shell_C and per_shell_C[s0] > 0:
        drift = abs(per_shell_C[s1] - per_shell_C[s0]) / per_shell_C[s0]
        consts["C_drift"] = drift
        verdict = _pass(drift < 0.25)
    else:
        consts["C_drift"] = None
        verdict = "insufficient data"
    return AxiomVerdict(verdict, pairs, consts)


def _ps8(orbit: Orbit, theta: Theta, R: float, n_chains: int, seed: int, candidate_error: float = 1e-3) -> AxiomVerdict:
    """Contracting chains toward limit flags; shadow diameters along each chain must decay.

    Limit flags of mid-length elements serve both as chain targets and as the
    candidate set whose probe-metric diameter inside each shadow is measured.
    Only elements whose endpoint evaluations are resolved in double precision
    are used as candidates.
    """
    from .decompositions import PartialFlag
    from .shadows import flag_set_shadow_diameter

    L = orbit.max_word_length
    rows = np.flatnonzero((orbit.length >= max(1, L // 2)) & (orbit.length <= max(1, L - 3)))
    margin = chamber_margin(orbit.kappa[rows], theta)
    err = endpoint_log_error(theta, orbit.kappa[rows])
    rows = rows[(margin > 1e-6) & (err < candidate_error)]
    if rows.size == 0:
        return AxiomVerdict("insufficient data", 0, {})
    frames = regular_flag_frames(orbit.matrices[rows], orbit.inverses[rows])
    order = np.random.default_rng(seed).permutation(rows.size)
    found = decayed = 0
    records = []
    for j in order:
        if found >= n_chains:
            break
        xi = embed_flag(PartialFlag(theta, frames[j]))
        chain = conical_witness(xi, orbit, R, min_chain=3, theta=theta)
        if chain is None or not chain.contracting:
            continue
        found += 1
        diams = np.array([
            flag_set_shadow_diameter(theta, orbit.matrices[i], orbit.inverses[i], R, frames)[0] for i in chain.indices
        ])
        ok = bool(diams[-1] < diams[0] and diams[-1] <= diams[: max(1, len(diams) // 2)].min())
        decayed += int(ok)
        records.append({"target": orbit.word_label(int(rows[j])), "diameters": diams.tolist(), "decays": ok})
    verdict = _pass(found >= n_chains and decayed == found)
    return AxiomVerdict(verdict, found, {"chains_decaying": decayed, "candidates": int(rows.size), "chains": records})


def _transport_spot_check(orbit: Orbit, theta: Theta, n: int, seed: int) -> dict:
    """Representative transport: evaluate(g . p, g h) = evaluate(p, h) - B_theta(g, p)."""
    from .decompositions import random_flag
    from .linalg import random_sl

    rng = np.random.default_rng(seed)
    worst = 0.0
    d = orbit.d
    for _ in range(n):
        p = embed_flag(random_flag(theta, rng))
        g = orbit.matrices[int(rng.integers(0, min(len(orbit), 1 + 4 * 3**3)))]
        h = random_sl(d, rng)
        lhs = evaluate(act(g, p), g @ h, theta)
        rhs = evaluate(p, h, theta) - cocycle_B(theta, g, p)
        worst = max(worst, float(np.abs(lhs - rhs).max()))
    return {"transport_identity_max_residual": worst, "instances": n, "ok": bool(worst <= 1e-7)}
