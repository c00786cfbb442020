"""Shadows in the compactification, symmetric-space shadows and limit detection."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import linalg
from .decompositions import (
    PartialFlag,
    cartan_projection,
    iwasawa_cocycle_partial,
)
from .horofunction import (
    HorofunctionPoint,
    _values_at_probes,
    evaluate,
    probe_set,
)
from .weyl import Theta, chamber_margin, opposition_involution, partial_projection, weight_norm_constant, weights

STRICTNESS = 1e-9
MEMBER, NON_MEMBER, MARGINAL = "member", "non-member", "marginal"


@dataclass(frozen=True)
class ShadowSpec:
    """The shadow O_R^theta(g)."""

    g: np.ndarray
    R: float
    theta: Theta
    g_inv: np.ndarray | None = None
    label: str = ""

    def __post_init__(self):
        if not self.R > 0:
            raise ValueError("ShadowSpec: R must be positive")
        g = np.asarray(self.g, dtype=float)
        object.__setattr__(self, "g", g)
        object.__setattr__(
            self, "g_inv", np.linalg.inv(g) if self.g_inv is None else np.asarray(self.g_inv, dtype=float)
        )

    @property
    def kappa_weights(self) -> np.ndarray:
        return weights(self.theta, cartan_projection(self.g, self.g_inv))


def shadow_margin(s: ShadowSpec, p) -> float:
    """min over k in theta of ``R - omega_k kappa(g) - omega_k B_theta(g^-1, p)``.

    Positive exactly when p lies in the (open) shadow.
    """
    B = evaluate(p, s.g, s.theta, h_inv=s.g_inv)
    return float(np.min(s.R - s.kappa_weights - weights(s.theta, B)))


def shadow_margins_boundary(s: ShadowSpec, points) -> np.ndarray:
    return np.array([shadow_margin(s, p) for p in points])


def classify(margin: float, band: float = STRICTNESS) -> str:
    if margin > band:
        return MEMBER
    if margin < -band:
        return NON_MEMBER
    return MARGINAL


def shadow_verdict(s: ShadowSpec, p) -> str:
    return classify(shadow_margin(s, p))


def shadow_membership(s: ShadowSpec, p, marginal_is_member: bool = False) -> bool:
    v = shadow_verdict(s, p)
    return v == MEMBER or (marginal_is_member and v == MARGINAL)


def interior_shadow_margins(theta: Theta, g, g_inv, R: float, mats, invs, kappas=None) -> np.ndarray:
    """Margins of many interior points ``gamma' o`` for one shadow, vectorized.

    Uses ``B_theta(g^-1, gamma' o) = pi_theta(kappa(g^-1 gamma') - kappa(gamma'))``.
    """
    mats = np.asarray(mats, dtype=float)
    invs = np.asarray(invs, dtype=float)
    if kappas is None:
        kappas = cartan_projection(mats, invs)
    rel = cartan_projection(g_inv @ mats, invs @ g)
    kg = weights(theta, cartan_projection(g, g_inv))
    B = weights(theta, rel - kappas)
    return np.min(R - kg - B, axis=-1)


def boundary_shadow_margins(theta: Theta, p: HorofunctionPoint, mats, invs, R: float, kappas=None) -> np.ndarray:
    """Margins of one boundary point against the shadows of many elements."""
    mats = np.asarray(mats, dtype=float)
    invs = np.asarray(invs, dtype=float)
    if kappas is None:
        kappas = cartan_projection(mats, invs)
    B = evaluate(p, mats, theta, h_inv=invs)
    return np.min(R - weights(theta, kappas) - weights(theta, B), axis=-1)


def shadow_diameter(s: ShadowSpec, candidates, probe_depth: int = 6) -> float:
    """Largest probe-metric distance between candidates that lie in the shadow."""
    members = [p for p in candidates if shadow_membership(s, p)]
    if len(members) < 2:
        return 0.0
    mats, invs, radii = probe_set(s.theta.d)
    vals = np.stack([_values_at_probes(p, s.theta, mats, invs) for p in members])
    hs = np.array([0.0 if isinstance(p, HorofunctionPoint) else 1.0 / (1.0 + np.linalg.norm(cartan_projection(p.g, p.g_inv))) for p in members])
    r = np.concatenate([[0.0], radii])
    diff = np.linalg.norm(vals[:, None] - vals[None, :], axis=-1)
    d0 = np.zeros(diff.shape[:2])
    for n in range(1, probe_depth + 1):
        d0 += 2.0 ** (-n) * diff[..., r <= n].max(axis=-1)
    total = d0 + hs[:, None] + hs[None, :]
    np.fill_diagonal(total, 0.0)
    return float(total.max())


def _cayley(S):
    n = S.shape[-1]
    eye = np.eye(n)
    return np.linalg.solve(eye - 0.5 * S, eye + 0.5 * S)


def flag_candidates(center: PartialFlag, rng: np.random.Generator, count: int = 200,
                    scale_range=(1e-8, 1.0), n_uniform: int = 20) -> list[PartialFlag]:
    """Flags scattered around ``center`` at many scales, plus uniform ones.

    Each skew generator entry gets its own log-uniform scale, so the cloud
    contains flags that move some subspaces a lot and others hardly at all.
    """
    d = center.d
    lo, hi = np.log(scale_range[0]), np.log(scale_range[1])
    out = []
    for _ in range(count):
        A = rng.standard_normal((d, d)) * np.exp(rng.uniform(lo, hi, size=(d, d)))
        S = np.triu(A, 1)
        S = S - S.T
        out.append(PartialFlag(center.theta, center.frame @ _cayley(S)))
    for _ in range(n_uniform):
        out.append(PartialFlag(center.theta, linalg.random_special_orthogonal(d, rng)))
    return out


# symmetric-space shadows ---------------------------------------------------


@dataclass(frozen=True)
class OptimizerSettings:
    multistart: int = 32
    budget: int = 2000
    initial_step: float = 0.5
    min_step: float = 1e-7
    seed: int = 0


@dataclass(frozen=True)
class SymmetricShadowResult:
    verdict: str
    minimum: float
    lower_bound: float
    evaluations: int
    argmin: np.ndarray = field(repr=False)

    @property
    def member(self) -> bool:
        return self.verdict == MEMBER


def _coweight_basis(d: int) -> np.ndarray:
    """Rows c_j with alpha_i(c_j) = delta_ij, so H = sum t_j c_j is dominant iff t >= 0."""
    B = np.zeros((d - 1, d))
    for j in range(1, d):
        B[j - 1, :j] = 1.0
        B[j - 1] -= j / d
    return B


def _fiber_generators(theta: Theta) -> list[np.ndarray]:
    gens = []
    for lo, hi in theta.blocks():
        for i in range(lo, hi):
            for j in range(i + 1, hi):
                E = np.zeros((theta.d, theta.d))
                E[i, j], E[j, i] = -1.0, 1.0
                gens.append(E)
    return gens


def cone_distance_lower_bound(theta: Theta, g, x: PartialFlag, g_inv=None) -> float:
    """Certified lower bound for dist(g o, {k e^H o : k P_theta = x, H dominant}).

    With ``D = B_theta(g^-1, x) + pi_theta kappa(g)`` every point of the cone
    satisfies ``|omega_k D| <= 2 c_k dist``, where c_k bounds omega_k on unit
    vectors.
    """
    g = np.asarray(g, dtype=float)
    g_inv = np.linalg.inv(g) if g_inv is None else g_inv
    D = iwasawa_cocycle_partial(theta, g_inv, x) + partial_projection(theta, cartan_projection(g, g_inv))
    w = weights(theta, D)
    c = np.array([weight_norm_constant(theta.d, k) for k in theta.indices])
    return float(np.max(np.abs(w) / (2.0 * c)))


def symmetric_shadow_search(theta: Theta, g, R: float, x: PartialFlag, opt: OptimizerSettings = OptimizerSettings(),
                            g_inv=None) -> SymmetricShadowResult:
    """Decide whether x lies in the symmetric-space shadow of B(g o, R).

    Minimizes ``|kappa(e^{-H} k(m)^-1 g)|`` over dominant H and the fiber of
    frames representing x by a batched compass search with multistart.  A
    minimum below R certifies membership; the Lipschitz lower bound certifies
    non-membership; otherwise the verdict is "unknown".
    """
    g = np.asarray(g, dtype=float)
    g_inv = np.linalg.inv(g) if g_inv is None else np.asarray(g_inv, dtype=float)
    d = theta.d
    lower = cone_distance_lower_bound(theta, g, x, g_inv)
    if lower >= R:
        return SymmetricShadowResult(NON_MEMBER, np.inf, lower, 0, np.array([]))
    C = _coweight_basis(d)
    fib = _fiber_generators(theta)
    n_t, n_m = d - 1, len(fib)
    n = n_t + n_m
    rng = np.random.default_rng(opt.seed)
    base = x.frame.T @ g  # k^-1 g for the reference frame
    base_inv = g_inv @ x.frame

    def objective(P):
        t = np.maximum(P[:, :n_t], 0.0)
        H = t @ C
        if n_m:
            S = np.einsum("nj,jab->nab", P[:, n_t:], np.array(fib))
            Km = _cayley(S)
        else:
            Km = np.broadcast_to(np.eye(d), (len(P), d, d))
        KmT = np.swapaxes(Km, -1, -2)
        M = np.exp(-H)[:, :, None] * (KmT @ base)
        Minv = (base_inv @ Km) * np.exp(H)[:, None, :]
        return np.linalg.norm(cartan_projection(M, Minv), axis=-1)

    kg = cartan_projection(g, g_inv)
    t0 = np.maximum(-np.diff(kg), 0.0)
    starts = np.zeros((opt.multistart, n))
    starts[0, :n_t] = t0
    if opt.multistart > 1:
        scale = max(1.0, float(np.linalg.norm(kg)))
        starts[1:, :n_t] = t0 * rng.uniform(0.0, 2.0, size=(opt.multistart - 1, n_t)) + rng.exponential(
            0.3 * scale / n_t, size=(opt.multistart - 1, n_t)
        )
        if n_m:
            starts[1:, n_t:] = rng.uniform(-2.0, 2.0, size=(opt.multistart - 1, n_m))
    P = starts.copy()
    f = objective(P)
    step = np.full(opt.multistart, opt.initial_step)
    evals = np.ones(opt.multistart, dtype=int)
    dirs = np.concatenate([np.eye(n), -np.eye(n)])
    while True:
        active = (step > opt.min_step) & (evals + len(dirs) <= opt.budget)
        if not np.any(active) or f.min() < R * (1 - 1e-6) - 1e-9:
            break
        ids = np.flatnonzero(active)
        trial = P[ids, None, :] + step[ids, None, None] * dirs[None]
        trial[..., :n_t] = np.maximum(trial[..., :n_t], 0.0)
        ft = objective(trial.reshape(-1, n)).reshape(len(ids), len(dirs))
        evals[ids] += len(dirs)
        best = ft.argmin(axis=1)
        improved = ft[np.arange(len(ids)), best] < f[ids]
        P[ids[improved]] = trial[np.flatnonzero(improved), best[improved]]
        f[ids[improved]] = ft[np.flatnonzero(improved), best[improved]]
        step[ids[~improved]] *= 0.5
    i = int(np.argmin(f))
    fmin = float(f[i])
    if fmin < R - STRICTNESS:
        verdict = MEMBER
    elif fmin - R <= STRICTNESS and lower >= R - STRICTNESS:
        verdict = MARGINAL
    else:
        verdict = "unknown"
    return SymmetricShadowResult(verdict, fmin, lower, int(evals.sum()), P[i])


def symmetric_shadow_membership(theta: Theta, g, R: float, x: PartialFlag, opt: OptimizerSettings = OptimizerSettings()) -> bool:
    """True only when membership is certified by an explicit cone point."""
    return symmetric_shadow_search(theta, g, R, x, opt).verdict == MEMBER


def comparison_radius(theta: Theta, R: float) -> float:
    """Radius r(R) with O_R(o, g o) contained in the compactification shadow O_r(g)."""
    return 2.0 * max(weight_norm_constant(theta.d, k) for k in theta.indices) * R


# transversality and conical limits ----------------------------------------


def transverse_gaps(x: PartialFlag, y: PartialFlag) -> dict[int, float]:
    if y.theta != x.theta.istar():
        raise ValueError(f"transverse_pair_check: y must have type {x.theta.istar()}, got {y.theta}")
    d = x.d
    return {k: linalg.subspace_gap(x.subspace(k), y.subspace(d - k)) for k in x.theta.indices}


def transverse_pair_check(x: PartialFlag, y: PartialFlag, tol: float = 1e-6) -> bool:
    return all(v > tol for v in transverse_gaps(x, y).values())


@dataclass(frozen=True)
class ConicalChain:
    indices: np.ndarray
    word_lengths: np.ndarray
    margins: np.ndarray
    chamber_margins: np.ndarray
    contracting: bool

    def __len__(self):
        return len(self.indices)


def conical_witness(xi, orbit, R: float, min_chain: int, theta: Theta | None = None,
                    contract_threshold: float = 1.0) -> ConicalChain | None:
    """Greedy chain of orbit elements with increasing word length whose R-shadows contain xi.

    At each word length the member with the largest chamber margin is kept.
    The chain is marked contracting when its chamber margins trend upward and
    end above ``contract_threshold``.  ``None`` means no chain was found in
    the ball, which is not a proof that xi is not conical.
    """
    theta = xi.theta if theta is None else theta
    m = boundary_shadow_margins(theta, xi, orbit.matrices, orbit.inverses, R, orbit.kappa)
    cm = chamber_margin(orbit.kappa, theta)
    members = np.flatnonzero((m > STRICTNESS) & (orbit.length > 0))
    chain = []
    for n in np.unique(orbit.length[members]):
        sel = members[orbit.length[members] == n]
        chain.append(int(sel[np.argmax(cm[sel])]))
    if len(chain) < min_chain:
        return None
    idx = np.array(chain)
    cms = cm[idx]
    slope = np.polyfit(np.arange(len(idx)), cms, 1)[0] if len(idx) > 1 else 0.0
    contracting = bool(slope > 0 and cms[-1] > contract_threshold and np.all(cms[len(cms) // 2 :] > STRICTNESS))
    return ConicalChain(idx, orbit.length[idx], m[idx], cms, contracting)


@dataclass(frozen=True)
class TranslateResult:
    R_prime: float
    constant: float
    checked: int
    violations: int


def translation_constant(g, theta: Theta, g_inv=None) -> float:
    """C(g) = max over k in theta of max(omega_k kappa(g), omega_k kappa(g^-1))."""
    g = np.asarray(g, dtype=float)
    g_inv = np.linalg.inv(g) if g_inv is None else g_inv
    a = weights(theta, cartan_projection(g, g_inv))
    b = weights(theta, cartan_projection(g_inv, g))
    return float(max(a.max(), b.max(), 0.0))


def shadow_translate_radius(g, R: float, theta: Theta, sample=(), g_inv=None) -> TranslateResult:
    """R' = R + 2 C(g) so that g O_R(h) lies in O_R'(gh); checked on ``sample``.

    ``sample`` is an iterable of ``(h, points)`` pairs.
    """
    from .horofunction import act

    g = np.asarray(g, dtype=float)
    g_inv = np.linalg.inv(g) if g_inv is None else np.asarray(g_inv, dtype=float)
    C = translation_constant(g, theta, g_inv)
    Rp = R + 2.0 * C
    checked = violations = 0
    for h, points in sample:
        h = np.asarray(h, dtype=float)
        h_inv = np.linalg.inv(h)
        src = ShadowSpec(h, R, theta, h_inv)
        dst = ShadowSpec(g @ h, Rp, theta, h_inv @ g_inv)
        for p in points:
            if shadow_membership(src, p):
                checked += 1
                if not shadow_membership(dst, act(g, p, g_inv), marginal_is_member=True):
                    violations += 1
    return TranslateResult(Rp, C, checked, violations)


def shadow_report(s: ShadowSpec, candidates, probe_depth: int = 6, bins: int = 10) -> dict:
    """JSON-ready summary of a shadow against a candidate set."""
    margins = np.array([shadow_margin(s, p) for p in candidates])
    hist, edges = np.histogram(margins, bins=bins)
    return {
        "g_word": s.label,
        "R": s.R,
        "theta": list(s.theta.indices),
        "members": int(np.sum(margins > STRICTNESS)),
        "margin_histogram": {"counts": hist.tolist(), "edges": edges.tolist()},
        "diameter_estimate": shadow_diameter(s, candidates, probe_depth),
    }


def endpoint_shadow_margins(theta: Theta, mats, invs, R: float, frames=None, kappas=None) -> np.ndarray:
    """Margins of iota(U_theta(g)) in O_R^theta(g) for a stack of regular elements.

    Evaluated through the exterior powers, independently of how the frames
    were obtained; every margin should be positive for R > 0.
    """
    from .orbit import regular_flag_frames

    mats = np.asarray(mats, dtype=float)
    invs = np.asarray(invs, dtype=float)
    if frames is None:
        frames = regular_flag_frames(mats, invs)
    if kappas is None:
        kappas = cartan_projection(mats, invs)
    cols = []
    for k in theta.indices:
        v = linalg.wedge_of_columns(frames[..., :, :k])
        Lk = linalg.exterior_power_stable(invs, k, mats)
        cols.append(np.log(np.linalg.norm(np.einsum("nij,nj->ni", Lk, v), axis=-1)))
    wB = np.stack(cols, axis=-1)
    return np.min(R - weights(theta, kappas) - wB, axis=-1)


def endpoint_log_error(theta: Theta, kappas) -> np.ndarray:
    """Estimated absolute error of the log-norms used by endpoint_shadow_margins.

    The attracting line of g is mapped by Lambda^k(g^-1) to a vector of norm
    exp(-omega_k kappa(g)) computed from entries of size exp(omega_k kappa(g^-1)),
    so the relative error is about eps * exp(omega_k kappa(g) + omega_k kappa(g^-1)).
    """
    kappas = np.asarray(kappas, dtype=float)
    spread = weights(theta, kappas) + weights(theta, opposition_involution(kappas))
    return 64 * np.finfo(float).eps * np.exp(spread.max(axis=-1))


def flag_line_weights(theta: Theta, frames, h, h_inv) -> np.ndarray:
    """omega_k of iota(x) at h o for many flags and many h, shape (h, flags, theta).

    For the rank-one representative of a flag the value is
    log || Lambda^k(h^-1) v_k || with v_k the wedge line of the k-subspace.
    """
    frames = np.asarray(frames, dtype=float)
    h = np.asarray(h, dtype=float).reshape(-1, theta.d, theta.d)
    h_inv = np.asarray(h_inv, dtype=float).reshape(-1, theta.d, theta.d)
    cols = []
    for k in theta.indices:
        V = linalg.wedge_of_columns(frames[..., :, :k])
        Lk = linalg.exterior_power_stable(h_inv, k, h)
        with np.errstate(divide="ignore"):
            cols.append(np.log(np.linalg.norm(np.einsum("mij,nj->mni", Lk, V), axis=-1)))
    return np.stack(cols, axis=-1)


def flag_set_shadow_diameter(theta: Theta, g, g_inv, R: float, frames, probe_depth: int = 6,
                             chunk: int = 64, probes=None) -> tuple[float, int]:
    """Probe-metric diameter of the flags (given by frames) lying in O_R(g).

    Returns ``(diameter, members)``; fewer than two members give diameter 0.
    """
    from .horofunction import probe_set
    from .weyl import from_weights

    g = np.asarray(g, dtype=float)
    g_inv = np.asarray(g_inv, dtype=float)
    # omega_k B_theta(g^-1, x) is the value of iota(x) at g o
    wB = flag_line_weights(theta, frames, g, g_inv)[0]
    wk = weights(theta, cartan_projection(g, g_inv))
    mem = np.min(R - wk - wB, axis=-1) > STRICTNESS
    m = int(mem.sum())
    if m < 2:
        return 0.0, m
    mats, invs, radii = probe_set(theta.d) if probes is None else probes
    vals = from_weights(theta, flag_line_weights(theta, np.asarray(frames)[mem], mats, invs))
    V = np.concatenate([np.zeros((1,) + vals.shape[1:]), vals], axis=0).transpose(1, 0, 2)
    r = np.concatenate([[0.0], radii])
    best = 0.0
    for a in range(0, m, chunk):
        diff = np.linalg.norm(V[a : a + chunk, None] - V[None], axis=-1)
        d0 = np.zeros(diff.shape[:2])
        for n in range(1, probe_depth + 1):
            d0 += 2.0 ** (-n) * diff[..., r <= n].max(axis=-1)
        best = max(best, float(d0.max()))
    return best, m
