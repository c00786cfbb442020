"""The vector-valued horofunction compactification and its boundary points.

A boundary point of type theta is stored as a tuple of endomorphisms
``T_k`` of the exterior powers ``Lambda^k R^d`` (k in theta), each of operator
norm one.  Its value at ``h o`` has fundamental-weight coordinates
``omega_k = log || Lambda^k(h^-1) T_k ||``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import erfinv
from scipy.stats import qmc

from . import linalg
from .decompositions import (
    PartialFlag,
    act_on_flag,
    cartan_projection,
    flag_projection,
    IrregularElementError,
)
from .weyl import Theta, from_weights, partial_projection, weight_norm_constant

NORM_TOL = 1e-8
UNDERFLOW = 1e-300
CONVERGENCE_TOL = 1e-4
RANK_ONE_TOL = 1e-8
PROBE_COUNT = 64
PROBE_SEED = 7
PROBE_RADII = (1.0, 2.0, 4.0)


class DegenerateEvaluationError(ArithmeticError):
    """A representative is annihilated (numerically) at the evaluation point."""


@dataclass(frozen=True)
class Interior:
    """The point ``g o`` of the symmetric space."""

    g: np.ndarray
    g_inv: np.ndarray | None = None

    def __post_init__(self):
        g = np.asarray(self.g, dtype=float)
        object.__setattr__(self, "g", g)
        if self.g_inv is None:
            object.__setattr__(self, "g_inv", np.linalg.inv(g))
        else:
            object.__setattr__(self, "g_inv", np.asarray(self.g_inv, dtype=float))

    @property
    def d(self) -> int:
        return self.g.shape[0]


@dataclass(frozen=True)
class HorofunctionPoint:
    """Boundary point of type theta, represented by ``{k: T_k}``."""

    theta: Theta
    reps: dict
    flag_tag: PartialFlag | None = None
    provenance: str | None = None

    def __post_init__(self):
        reps = {}
        for k in self.theta.indices:
            if k not in self.reps:
                raise ValueError(f"HorofunctionPoint: missing representative for k={k}")
            T = np.asarray(self.reps[k], dtype=float)
            n = len(linalg.wedge_basis(self.theta.d, k))
            if T.shape != (n, n):
                raise ValueError(f"representative for k={k} must be {n}x{n}")
            norm = linalg.singular_values(T)[0]
            if abs(norm - 1.0) > NORM_TOL:
                raise ValueError(f"representative for k={k} has operator norm {norm}, expected 1")
            reps[k] = T
        object.__setattr__(self, "reps", reps)

    @property
    def d(self) -> int:
        return self.theta.d

    def rank_one_defect(self) -> dict[int, float]:
        """sigma_2 / sigma_1 of every representative."""
        out = {}
        for k, T in self.reps.items():
            s = linalg.singular_values(T)
            out[k] = float(s[1] / s[0]) if len(s) > 1 else 0.0
        return out

    def to_json(self) -> dict:
        out = {
            "theta": list(self.theta.indices),
            "alphas": [{"k": k, "T_matrix_rowmajor": self.reps[k].ravel().tolist()} for k in self.theta.indices],
        }
        if self.flag_tag is not None:
            out["flag_tag"] = {
                "theta": list(self.flag_tag.theta.indices),
                "frame_rowmajor": self.flag_tag.frame.ravel().tolist(),
            }
        if self.provenance is not None:
            out["provenance"] = self.provenance
        return out

    @classmethod
    def from_json(cls, obj) -> "HorofunctionPoint":
        if isinstance(obj, str):
            obj = json.loads(obj)
        d = None
        for a in obj["alphas"]:
            n = int(round(np.sqrt(len(a["T_matrix_rowmajor"]))))
            for dd in range(2, 16):
                if len(linalg.wedge_basis(dd, a["k"])) == n and a["k"] < dd:
                    d = dd if d is None else d
                    break
        tag = None
        if obj.get("flag_tag"):
            ft = obj["flag_tag"]
            dd = int(round(np.sqrt(len(ft["frame_rowmajor"]))))
            d = dd
            tag = PartialFlag(Theta(dd, tuple(ft["theta"])), np.reshape(ft["frame_rowmajor"], (dd, dd)))
        if d is None:
            raise ValueError("cannot infer the dimension from the representatives")
        reps = {}
        for a in obj["alphas"]:
            n = len(linalg.wedge_basis(d, a["k"]))
            reps[a["k"]] = np.reshape(a["T_matrix_rowmajor"], (n, n))
        return cls(Theta(d, tuple(obj["theta"])), reps, tag, obj.get("provenance"))


def busemann_raw(g, h, g_inv=None, h_inv=None) -> np.ndarray:
    """b_{g o}(h o) = kappa(h^-1 g) - kappa(g)."""
    g = np.asarray(g, dtype=float)
    h = np.asarray(h, dtype=float)
    g_inv = np.linalg.inv(g) if g_inv is None else np.asarray(g_inv, dtype=float)
    h_inv = np.linalg.inv(h) if h_inv is None else np.asarray(h_inv, dtype=float)
    return cartan_projection(h_inv @ g, g_inv @ h) - cartan_projection(g, g_inv)


def _log_volume(M) -> np.ndarray:
    """log of the k-volume spanned by the columns of a (stack of) d x k matrices."""
    R = np.linalg.qr(M, mode="r")
    with np.errstate(divide="ignore"):
        return np.log(np.abs(np.diagonal(R, axis1=-2, axis2=-1))).sum(axis=-1)


def _flag_weights(p: HorofunctionPoint, h, h_inv) -> np.ndarray:
    # T_k is rank one onto a decomposable line, so the norm is a k-volume;
    # for 2k > d the Hodge dual volume of h^T on the complement is used
    F = p.flag_tag.frame
    d = p.d
    cols = []
    for k in p.theta.indices:
        if 2 * k <= d:
            cols.append(_log_volume(h_inv @ F[:, :k]))
        else:
            cols.append(_log_volume(np.swapaxes(h, -1, -2) @ F[:, k:]))
    out = np.stack(cols, axis=-1)
    if np.any(out < np.log(UNDERFLOW)):
        raise DegenerateEvaluationError("flag line annihilated at the evaluation point")
    return out


def _boundary_weights(p: HorofunctionPoint, h, h_inv, use_frame: bool = True) -> np.ndarray:
    """log || Lambda^k(h^-1) T_k || for k in theta, batched over h."""
    if use_frame and p.provenance == "flag" and p.flag_tag is not None:
        return _flag_weights(p, h, h_inv)
    cols = []
    for k in p.theta.indices:
        L = linalg.exterior_power_stable(h_inv, k, h)
        M = L @ p.reps[k]
        s = linalg.singular_values(M)[..., 0]
        if np.any(s < UNDERFLOW):
            raise DegenerateEvaluationError(f"representative for k={k} annihilated at the evaluation point")
        cols.append(np.log(s))
    return np.stack(cols, axis=-1)


def evaluate(p, h, theta: Theta | None = None, h_inv=None, route: str = "auto") -> np.ndarray:
    """Value of the point ``p`` at ``h o`` as a vector of a_theta.

    Interior points give ``pi_theta b_x(h o)``.  ``h`` may be a stack.
    Embedded flags are evaluated through k-volumes unless ``route`` is
    ``"exterior"``, which always goes through the exterior-power matrices.
    """
    if route not in ("auto", "exterior"):
        raise ValueError(f"unknown evaluation route {route!r}")
    h = np.asarray(h, dtype=float)
    h_inv = np.linalg.inv(h) if h_inv is None else np.asarray(h_inv, dtype=float)
    if isinstance(p, HorofunctionPoint):
        if theta is not None and theta != p.theta:
            raise ValueError(f"point has type {p.theta}, evaluation requested for {theta}")
        theta = p.theta
        out = from_weights(theta, _boundary_weights(p, h, h_inv, use_frame=route == "auto"))
    elif not isinstance(p, Interior):
        raise TypeError("evaluate expects an Interior or HorofunctionPoint")
    elif theta is None:
        raise ValueError("theta is required to evaluate an interior point")
    else:
        out = partial_projection(theta, busemann_raw(p.g, h, p.g_inv, h_inv))
    # every point vanishes at the basepoint; remove rounding there
    at_o = np.all(h == np.eye(h.shape[-1]), axis=(-2, -1))
    return np.where(at_o[..., None], 0.0, out)


def cocycle_B(theta: Theta, g, p, g_inv=None) -> np.ndarray:
    """B_theta(g, p), the value of ``p`` at ``g^-1 o``."""
    g = np.asarray(g, dtype=float)
    g_inv = np.linalg.inv(g) if g_inv is None else np.asarray(g_inv, dtype=float)
    return evaluate(p, g_inv, theta, h_inv=g)


def act(g, p, g_inv=None):
    """``g . p``; for boundary points the representatives are pushed by Lambda^k(g)."""
    g = np.asarray(g, dtype=float)
    g_inv = np.linalg.inv(g) if g_inv is None else np.asarray(g_inv, dtype=float)
    if isinstance(p, Interior):
        return Interior(g @ p.g, p.g_inv @ g_inv)
    reps = {}
    for k, T in p.reps.items():
        M = linalg.exterior_power_stable(g, k, g_inv) @ T
        n = linalg.singular_values(M)[0]
        if n < UNDERFLOW:
            raise DegenerateEvaluationError(f"representative for k={k} annihilated by the action")
        reps[k] = M / n
    tag = act_on_flag(g, p.flag_tag) if p.flag_tag is not None else None
    return HorofunctionPoint(p.theta, reps, tag, p.provenance)


def embed_flag(x: PartialFlag) -> HorofunctionPoint:
    """iota(x): rank-one projections onto the wedge lines of the flag."""
    reps = {}
    for k in x.theta.indices:
        v = x.line(k)
        reps[k] = np.outer(v, v)
    return HorofunctionPoint(x.theta, reps, x, "flag")


@dataclass(frozen=True)
class LimitDiagnostics:
    increments: dict
    rank_one_defect: dict
    converged: bool
    tail_increment: float

    def as_dict(self) -> dict:
        return {
            "increments": {k: v.tolist() for k, v in self.increments.items()},
            "rank_one_defect": self.rank_one_defect,
            "converged": self.converged,
            "tail_increment": self.tail_increment,
        }


class NonConvergenceError(RuntimeError):
    pass


def orbit_limit(seq, theta: Theta, seq_inv=None, label: str | None = None, strict: bool = False):
    """Boundary point represented by the normalized exterior powers of the last element.

    Returns ``(point, diagnostics)``.  Increments are measured up to sign since
    the representatives are only defined up to the action of K.
    """
    seq = np.asarray(seq, dtype=float)
    if seq.ndim != 3 or len(seq) < 2:
        raise ValueError("orbit_limit: need a stack of at least two matrices")
    seq_inv = np.linalg.inv(seq) if seq_inv is None else np.asarray(seq_inv, dtype=float)
    increments = {}
    reps = {}
    for k in theta.indices:
        L = linalg.exterior_power_stable(seq, k, seq_inv)
        L = L / linalg.singular_values(L)[:, 0][:, None, None]
        diff = np.minimum(
            np.abs(L[1:] - L[:-1]).max(axis=(-2, -1)),
            np.abs(L[1:] + L[:-1]).max(axis=(-2, -1)),
        )
        increments[k] = diff
        reps[k] = L[-1]
    tail = max(float(v[-1]) for v in increments.values())
    converged = tail <= CONVERGENCE_TOL
    if strict and not converged:
        raise NonConvergenceError(f"tail increment {tail:.3g} exceeds {CONVERGENCE_TOL:g}")
    point = HorofunctionPoint(theta, reps, None, label)
    defect = point.rank_one_defect()
    tag = None
    if all(v <= RANK_ONE_TOL for v in defect.values()):
        try:
            from .orbit import regular_flag_frames

            frame = regular_flag_frames(seq[-1:], seq_inv[-1:])[0]
            flag_projection(seq[-1], theta, margin_tol=1e-6)
            tag = PartialFlag(theta, frame)
        except IrregularElementError:
            tag = None
    point = HorofunctionPoint(theta, reps, tag, label)
    return point, LimitDiagnostics(increments, defect, converged, tail)


@lru_cache(maxsize=None)
def _probe_data(d: int, count: int, seed: int):
    """Probe matrices k exp(t H_j), their inverses and their distances to o."""
    rays = []
    for j in range(1, d):
        H = np.full(d, -j / d)
        H[:j] += 1.0
        rays.append(H / np.linalg.norm(H))
    per_k = -(-count // (len(PROBE_RADII) * len(rays)))
    n_k = 1 << max(0, int(np.ceil(np.log2(per_k))))
    sob = qmc.Sobol(d * d, scramble=True, seed=seed).random(n_k)
    gauss = np.sqrt(2.0) * erfinv(2.0 * np.clip(sob, 1e-12, 1 - 1e-12) - 1.0)
    ks = linalg.random_special_orthogonal_from(gauss.reshape(n_k, d, d))
    mats, invs, radii = [], [], []
    for i in range(per_k):
        for t in PROBE_RADII:
            for H in rays:
                mats.append((ks[i] * np.exp(t * H)) @ ks[i].T)
                invs.append((ks[i] * np.exp(-t * H)) @ ks[i].T)
                radii.append(t)
    mats, invs, radii = np.array(mats[:count]), np.array(invs[:count]), np.array(radii[:count])
    for a in (mats, invs, radii):
        a.setflags(write=False)
    return mats, invs, radii


def probe_set(d: int, count: int = PROBE_COUNT, seed: int = PROBE_SEED):
    """Fixed deterministic probes ``(matrices, inverses, distances to o)``."""
    return _probe_data(d, count, seed)


def _values_at_probes(p, theta, mats, invs):
    vals = evaluate(p, mats, theta, h_inv=invs)
    return np.concatenate([np.zeros((1, theta.d)), vals])


def _dist0(va, vb, radii, depth):
    diff = np.linalg.norm(va - vb, axis=-1)
    r = np.concatenate([[0.0], radii])
    total = 0.0
    for n in range(1, depth + 1):
        total += 2.0 ** (-n) * diff[r <= n].max()
    return total


def compactification_distance(p, q, theta: Theta, probe_depth: int = 6, probes=None) -> float:
    """Truncated, probe-based version of the metric on the compactification."""
    if probe_depth < 1:
        raise ValueError("probe_depth must be >= 1")
    mats, invs, radii = probe_set(theta.d) if probes is None else probes
    va = _values_at_probes(p, theta, mats, invs)
    vb = _values_at_probes(q, theta, mats, invs)
    d0 = _dist0(va, vb, radii, probe_depth)
    hp = _h(p)
    hq = _h(q)
    if isinstance(p, Interior) and isinstance(q, Interior):
        dx = float(np.linalg.norm(cartan_projection(p.g_inv @ q.g, q.g_inv @ p.g)))
        return min(dx, hp + hq) + d0
    return hp + hq + d0


def _h(p) -> float:
    if isinstance(p, Interior):
        return 1.0 / (1.0 + float(np.linalg.norm(cartan_projection(p.g, p.g_inv))))
    return 0.0


def probe_values(p, theta: Theta, probes=None) -> np.ndarray:
    """Evaluations at the probe set (basepoint first); used for point comparison."""
    mats, invs, _ = probe_set(theta.d) if probes is None else probes
    return _values_at_probes(p, theta, mats, invs)


def same_point(p, q, theta: Theta, tol: float = 1e-6) -> bool:
    """Equality up to evaluation on the probe set."""
    return bool(np.abs(probe_values(p, theta) - probe_values(q, theta)).max() <= tol)


def lipschitz_lhs_rhs(g, h1, h2, theta: Theta):
    """Both sides of the Lipschitz inequality for b_x over the weights in theta."""
    b1 = busemann_raw(g, h1)
    b2 = busemann_raw(g, h2)
    diff = b1 - b2
    k12 = cartan_projection(np.linalg.solve(h1, h2))
    ks = np.array(theta.indices)
    cums_d = np.cumsum(diff, axis=-1)[..., ks - 1]
    cums_k = np.cumsum(k12, axis=-1)[..., ks - 1]
    return np.abs(cums_d).sum(axis=-1), 2.0 * np.abs(cums_k).sum(axis=-1)


def weight_lipschitz_constant(theta: Theta) -> float:
    """max over k in theta of sup |omega_k(H)| / |H|."""
    return max(weight_norm_constant(theta.d, k) for k in theta.indices)
