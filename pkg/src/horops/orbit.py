"""Breadth-first enumeration of word balls in finitely generated matrix groups.

Letters are integers: ``2 j`` is generator ``j`` and ``2 j + 1`` its inverse.
Every stored element carries its exact inverse (the product of generator
inverses in reverse order), which keeps the small singular values and the
upper flag subspaces accurate for long words.
"""

from __future__ import annotations

import csv
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import linalg
from .decompositions import DET_TOL, cartan_projection
from .weyl import Functional, Theta, chamber_margin

DEFAULT_CAP = 5_000_000
_FINGERPRINT_SEED = 20240611
_REPROJECT_MAX_ENTRY = 1e2


class CapExceededError(RuntimeError):
    """The ball would hold more elements than the configured hard cap."""


@dataclass(frozen=True)
class GroupPresentation:
    """Generators of a subgroup of SL(d, R); inverses are added formally."""

    generators: tuple[np.ndarray, ...]
    labels: tuple[str, ...] = ()
    name: str = "group"

    def __post_init__(self):
        gens = tuple(np.array(g, dtype=float) for g in self.generators)
        if not gens:
            raise ValueError("GroupPresentation: need at least one generator")
        d = gens[0].shape[0]
        for g in gens:
            if g.shape != (d, d):
                raise ValueError("GroupPresentation: generators must share a square shape")
            if abs(np.linalg.det(g) - 1.0) > DET_TOL * max(1.0, np.abs(g).max() ** d):
                raise ValueError(f"GroupPresentation: generator has det {np.linalg.det(g)} != 1")
        labels = tuple(self.labels) or tuple("abcdefghijklmnopqrstuvwxyz"[: len(gens)])
        if len(labels) != len(gens) or len(set(labels)) != len(labels):
            raise ValueError("GroupPresentation: need one distinct label per generator")
        if any(not lab.islower() for lab in labels):
            raise ValueError("GroupPresentation: labels must be lower case (inverses print upper case)")
        object.__setattr__(self, "generators", gens)
        object.__setattr__(self, "labels", labels)

    @property
    def dim(self) -> int:
        return self.generators[0].shape[0]

    @property
    def n_letters(self) -> int:
        return 2 * len(self.generators)

    def letter_matrices(self) -> tuple[np.ndarray, np.ndarray]:
        """Stacks ``(L, L^-1)`` indexed by letter."""
        mats, invs = [], []
        for g in self.generators:
            gi = _exact_inverse(g)
            mats += [g, gi]
            invs += [gi, g]
        return np.array(mats), np.array(invs)

    def letter_label(self, c: int) -> str:
        lab = self.labels[c // 2]
        return lab.upper() if c % 2 else lab

    def parse_word(self, text: str) -> tuple[int, ...]:
        if text in ("", "e"):
            return ()
        out = []
        for tok in text.split("."):
            if tok.lower() not in self.labels:
                raise ValueError(f"unknown generator label {tok!r}")
            out.append(2 * self.labels.index(tok.lower()) + (1 if tok.isupper() else 0))
        return tuple(out)

    def evaluate_word(self, word) -> np.ndarray:
        mats, _ = self.letter_matrices()
        g = np.eye(self.dim)
        for c in word:
            g = g @ mats[c]
        return g


def _exact_inverse(g):
    if g.shape == (2, 2):
        return np.array([[g[1, 1], -g[0, 1]], [-g[1, 0], g[0, 0]]])
    return np.linalg.inv(g)


def _fingerprint_weights(d: int) -> np.ndarray:
    return np.random.default_rng(_FINGERPRINT_SEED + d).uniform(0.5, 1.5, size=(d, d))


def fingerprint(mats: np.ndarray) -> np.ndarray:
    mats = np.asarray(mats, dtype=float)
    return np.einsum("...ij,ij->...", mats, _fingerprint_weights(mats.shape[-1]))


def _reproject(mats: np.ndarray) -> np.ndarray:
    # determinants of large matrices are dominated by cancellation error, so only
    # moderately sized products are rescaled
    small = np.abs(mats).max(axis=(-2, -1)) < _REPROJECT_MAX_ENTRY
    if np.any(small):
        det = np.linalg.det(mats[small])
        ok = det > 0
        sub = mats[small]
        sub[ok] /= (det[ok] ** (1.0 / mats.shape[-1]))[:, None, None]
        mats[small] = sub
    return mats


def first_occurrence_mask(keys: np.ndarray, tol: float, same) -> np.ndarray:
    """Mask keeping the first item of every cluster of near-duplicates.

    ``keys`` are scalar fingerprints; items whose keys differ by more than
    ``tol`` are never compared.  ``same(i, reps)`` returns a boolean array
    telling which of the representative indices ``reps`` item ``i`` equals.
    Items are swept in key order and attached to the first matching cluster
    representative in the key window; each cluster keeps its lowest index.
    """
    n = len(keys)
    keep = np.ones(n, dtype=bool)
    if n < 2:
        return keep
    order = np.argsort(keys, kind="stable")
    sk = keys[order]
    if not np.any(np.diff(sk) <= tol):
        return keep
    cluster = np.arange(n)
    reps: list[int] = []
    rep_keys: list[float] = []
    lo = 0
    for pos in range(n):
        i = int(order[pos])
        k = sk[pos]
        while lo < len(reps) and rep_keys[lo] < k - tol:
            lo += 1
        joined = False
        if lo < len(reps):
            cand = np.array(reps[lo:])
            hit = np.flatnonzero(same(i, cand))
            if hit.size:
                cluster[i] = cluster[cand[hit[0]]]
                joined = True
        if not joined:
            reps.append(i)
            rep_keys.append(k)
    best = {}
    for i in range(n):
        c = int(cluster[i])
        best[c] = min(best.get(c, i), i)
    keep[:] = False
    keep[list(best.values())] = True
    return keep


def free_reduce(word) -> list[int]:
    """Cancel adjacent letter pairs ``c, c ^ 1`` (a generator and its inverse)."""
    out: list[int] = []
    for c in word:
        c = int(c)
        if out and out[-1] == c ^ 1:
            out.pop()
        else:
            out.append(c)
    return out


@dataclass
class Orbit:
    """Struct-of-arrays store for an enumerated ball.

    Rows are ordered by (word length, lexicographic word in letter order).
    """

    presentation: GroupPresentation
    matrices: np.ndarray
    inverses: np.ndarray
    parent: np.ndarray
    letter: np.ndarray
    length: np.ndarray
    kappa: np.ndarray
    max_word_length: int
    dedup_tol: float
    theta: Theta | None = None
    phi: Functional | None = None
    _sorted_fp: tuple | None = field(default=None, repr=False)
    _words: np.ndarray | None = field(default=None, repr=False)
    _children: np.ndarray | None = field(default=None, repr=False)

    def __len__(self):
        return len(self.length)

    @property
    def d(self) -> int:
        return self.presentation.dim

    @property
    def theta_margin(self) -> np.ndarray:
        if self.theta is None:
            raise ValueError("orbit has no configured theta")
        return chamber_margin(self.kappa, self.theta)

    @property
    def phi_length(self) -> np.ndarray:
        if self.phi is None:
            raise ValueError("orbit has no configured functional")
        return self.phi(self.kappa)

    def annotate(self, theta: Theta | None = None, phi: Functional | None = None) -> "Orbit":
        out = Orbit(**{k: getattr(self, k) for k in self.__dataclass_fields__ if not k.startswith("_")})
        out.theta = theta if theta is not None else self.theta
        out.phi = phi if phi is not None else self.phi
        out._sorted_fp, out._words, out._children = self._sorted_fp, self._words, self._children
        return out

    def word(self, i: int) -> tuple[int, ...]:
        out = []
        i = int(i)
        while self.parent[i] >= 0:
            out.append(int(self.letter[i]))
            i = int(self.parent[i])
        return tuple(reversed(out))

    def word_label(self, i: int) -> str:
        w = self.word(i)
        return ".".join(self.presentation.letter_label(c) for c in w) if w else "e"

    def shell(self, n: int) -> np.ndarray:
        return np.flatnonzero(self.length == n)

    @property
    def is_free(self) -> bool:
        """True when no word was merged, i.e. the ball is a full free-group tree."""
        n = self.presentation.n_letters
        expected = [1] + [n * (n - 1) ** (k - 1) for k in range(1, self.max_word_length + 1)]
        counts = np.bincount(self.length, minlength=self.max_word_length + 1)
        return bool(np.array_equal(counts, expected))

    def word_array(self) -> np.ndarray:
        """Words as rows of letters, padded with -1."""
        if self._words is None:
            L = max(int(self.length.max()), 1)
            W = np.full((len(self), L), -1, dtype=np.int64)
            for n in range(1, L + 1):
                rows = self.shell(n)
                W[rows, : n - 1] = W[self.parent[rows], : n - 1]
                W[rows, n - 1] = self.letter[rows]
            self._words = W
        return self._words

    def child_table(self) -> np.ndarray:
        """``child[i, c]`` is the row of word(i).c, or -1 when not stored."""
        if self._children is None:
            C = np.full((len(self), self.presentation.n_letters), -1, dtype=np.int64)
            rows = np.flatnonzero(self.parent >= 0)
            C[self.parent[rows], self.letter[rows]] = rows
            self._children = C
        return self._children

    def index_of_word(self, word) -> int:
        """Row of a reduced word, or -1 when it is not stored."""
        C = self.child_table()
        i = 0
        for c in word:
            i = int(C[i, int(c)])
            if i < 0:
                return -1
        return i

    def left_multiply(self, u, rows=None) -> np.ndarray:
        """Rows of ``u . word(r)`` by free reduction; -1 outside the ball.

        Only meaningful for free presentations (``is_free``).  With
        ``g = u^-1``, nodes on the path of g map to inverse suffixes of g and
        every other node maps to child[result(parent), letter], so the whole
        ball is handled shell by shell.
        """
        u = free_reduce(u)
        g = [c ^ 1 for c in reversed(u)]
        C = self.child_table()
        # path of g: depth -> (node, row of the inverse suffix)
        path = {}
        node = 0
        for j, c in enumerate(g):
            node = int(C[node, c])
            if node < 0:
                break
            path[j + 1] = (node, self.index_of_word([x ^ 1 for x in reversed(g[j + 1:])]))
        res = np.full(len(self), -1, dtype=np.int64)
        res[0] = self.index_of_word([int(c) for c in u])
        for n in range(1, int(self.length.max()) + 1):
            rows_n = self.shell(n)
            par = res[self.parent[rows_n]]
            ok = par >= 0
            out = np.full(len(rows_n), -1, dtype=np.int64)
            out[ok] = C[par[ok], self.letter[rows_n][ok]]
            res[rows_n] = out
            if n in path:
                res[path[n][0]] = path[n][1]
        return res if rows is None else res[np.asarray(rows, dtype=np.int64)]

    def relative_kappa(self, i: int, rows) -> np.ndarray:
        """kappa(gamma_i^-1 gamma_r) for r in rows.

        Read off the stored Cartan projections by word reduction when the ball
        is free, which avoids the cancellation in the matrix product; matrix
        products are used otherwise and outside the ball.
        """
        rows = np.asarray(rows, dtype=np.int64)
        out = np.empty((len(rows), self.d))
        idx = np.full(len(rows), -1, dtype=np.int64)
        if self.is_free:
            u = [c ^ 1 for c in reversed(self.word(i))]
            idx = self.left_multiply(u, rows)
        found = idx >= 0
        out[found] = self.kappa[idx[found]]
        miss = rows[~found]
        if miss.size:
            out[~found] = cartan_projection(self.inverses[i] @ self.matrices[miss], self.inverses[miss] @ self.matrices[i])
        return out

    def __getitem__(self, i: int) -> "OrbitElement":
        i = int(i)
        return OrbitElement(
            index=i,
            matrix=self.matrices[i],
            inverse=self.inverses[i],
            word=self.word(i),
            label=self.word_label(i),
            kappa=self.kappa[i],
            theta_margin=float(self.theta_margin[i]) if self.theta is not None else None,
            phi_length=float(self.phi(self.kappa[i])) if self.phi is not None else None,
        )

    def __iter__(self):
        return (self[i] for i in range(len(self)))

    def lookup(self, g, tol: float | None = None) -> int | None:
        """Index of the element equal to ``g`` within the dedup tolerance."""
        tol = self.dedup_tol if tol is None else tol
        if self._sorted_fp is None:
            fp = fingerprint(self.matrices)
            order = np.argsort(fp, kind="stable")
            self._sorted_fp = (fp[order], order)
        sfp, order = self._sorted_fp
        w = _fingerprint_weights(self.d)
        f = float(fingerprint(g))
        lo, hi = np.searchsorted(sfp, [f - tol * w.sum(), f + tol * w.sum()], side="left")
        hi = np.searchsorted(sfp, f + tol * w.sum(), side="right")
        best = None
        for j in order[lo:hi]:
            if np.abs(self.matrices[j] - g).max() <= tol:
                best = j if best is None else min(best, j)
        return None if best is None else int(best)

    def to_csv(self, path) -> None:
        d = self.d
        margin = self.theta_margin if self.theta is not None else np.full(len(self), np.nan)
        phil = self.phi_length if self.phi is not None else np.full(len(self), np.nan)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["word", "word_length"] + [f"kappa_{i + 1}" for i in range(d)] + ["theta_margin", "phi_length"])
            for i in range(len(self)):
                w.writerow(
                    [self.word_label(i), int(self.length[i])]
                    + [repr(float(v)) for v in self.kappa[i]]
                    + [repr(float(margin[i])), repr(float(phil[i]))]
                )


@dataclass(frozen=True)
class OrbitElement:
    index: int
    matrix: np.ndarray
    inverse: np.ndarray
    word: tuple[int, ...]
    label: str
    kappa: np.ndarray
    theta_margin: float | None
    phi_length: float | None

    @property
    def word_length(self) -> int:
        return len(self.word)


def _expand(frontier_m, frontier_i, frontier_last, mats, invs, start, stop):
    """Children of frontier rows [start, stop), ordered by (parent, letter)."""
    n_letters = len(mats)
    fm = frontier_m[start:stop]
    fi = frontier_i[start:stop]
    last = frontier_last[start:stop]
    inv_letter = np.arange(n_letters) ^ 1
    allowed = last[:, None] != inv_letter[None, :]
    child_m = np.einsum("nij,cjk->ncik", fm, mats)
    child_i = np.einsum("cij,njk->ncik", invs, fi)
    par, let = np.nonzero(allowed)
    return (
        _reproject(child_m[par, let]),
        _reproject(child_i[par, let]),
        par + start,
        let,
    )


def enumerate_ball(
    presentation: GroupPresentation,
    max_word_length: int,
    dedup_tol: float = 1e-6,
    cap: int = DEFAULT_CAP,
    threads: int = 1,
    theta: Theta | None = None,
    phi: Functional | None = None,
) -> Orbit:
    """All group elements of word length <= ``max_word_length``.

    Words whose matrices coincide (entrywise within ``dedup_tol``) with an
    element already found are dropped and not expanded further, so every
    stored word is the shortest, then lexicographically first, one.
    """
    if max_word_length < 0:
        raise ValueError("max_word_length must be >= 0")
    if dedup_tol <= 0:
        raise ValueError("dedup_tol must be positive")
    d = presentation.dim
    mats, invs = presentation.letter_matrices()
    w = _fingerprint_weights(d)
    key_tol = dedup_tol * w.sum()

    all_m = [np.eye(d)[None]]
    all_i = [np.eye(d)[None]]
    parent = [np.array([-1])]
    letter = [np.array([-1])]
    length = [np.array([0])]
    total = 1
    seen_fp = np.array([float(fingerprint(np.eye(d)))])
    seen_idx = np.array([0])
    store_m = np.eye(d)[None]

    front_m, front_i, front_last, front_idx = all_m[0], all_i[0], np.array([-1]), np.array([0])
    for n in range(1, max_word_length + 1):
        if len(front_m) == 0:
            break
        chunks = _chunks(len(front_m), threads)
        if threads > 1 and len(chunks) > 1:
            with ThreadPoolExecutor(max_workers=threads) as ex:
                parts = list(ex.map(lambda ab: _expand(front_m, front_i, front_last, mats, invs, *ab), chunks))
        else:
            parts = [_expand(front_m, front_i, front_last, mats, invs, a, b) for a, b in chunks]
        cm = np.concatenate([p[0] for p in parts])
        ci = np.concatenate([p[1] for p in parts])
        cpar = np.concatenate([p[2] for p in parts])
        clet = np.concatenate([p[3] for p in parts])

        fp = fingerprint(cm)
        # against earlier shells
        lo = np.searchsorted(seen_fp, fp - key_tol, side="left")
        hi = np.searchsorted(seen_fp, fp + key_tol, side="right")
        keep = np.ones(len(cm), dtype=bool)
        for j in np.flatnonzero(hi > lo):
            cand = seen_idx[lo[j] : hi[j]]
            if np.any(np.abs(store_m[cand] - cm[j]).max(axis=(-2, -1)) <= dedup_tol):
                keep[j] = False
        # within the shell, the first child in (parent, letter) order wins
        sub = np.flatnonzero(keep)
        inner = first_occurrence_mask(
            fp[sub],
            key_tol,
            lambda a, reps: np.abs(cm[sub[reps]] - cm[sub[a]]).max(axis=(-2, -1)) <= dedup_tol,
        )
        keep[sub[~inner]] = False

        cm, ci, cpar, clet = cm[keep], ci[keep], cpar[keep], clet[keep]
        if total + len(cm) > cap:
            raise CapExceededError(f"ball of radius {max_word_length} exceeds cap {cap} at length {n}")
        new_idx = np.arange(total, total + len(cm))
        all_m.append(cm)
        all_i.append(ci)
        parent.append(front_idx[cpar])
        letter.append(clet)
        length.append(np.full(len(cm), n))
        total += len(cm)

        if n < max_word_length:
            store_m = np.concatenate([store_m, cm])
            merged_fp = np.concatenate([seen_fp, fp[keep]])
            merged_idx = np.concatenate([seen_idx, new_idx])
            order = np.argsort(merged_fp, kind="stable")
            seen_fp, seen_idx = merged_fp[order], merged_idx[order]
        front_m, front_i, front_last, front_idx = cm, ci, clet, new_idx

    M = np.concatenate(all_m)
    Minv = np.concatenate(all_i)
    kappa = cartan_projection(M, Minv)
    return Orbit(
        presentation=presentation,
        matrices=M,
        inverses=Minv,
        parent=np.concatenate(parent),
        letter=np.concatenate(letter),
        length=np.concatenate(length),
        kappa=kappa,
        max_word_length=max_word_length,
        dedup_tol=dedup_tol,
        theta=theta,
        phi=phi,
    )


def _chunks(n: int, threads: int) -> list[tuple[int, int]]:
    size = max(1, min(50_000, -(-n // max(1, threads))))
    return [(a, min(n, a + size)) for a in range(0, n, size)] or [(0, 0)]


@dataclass(frozen=True)
class RegularityReport:
    theta: Theta
    shells: np.ndarray
    min_margin: np.ndarray
    mean_margin: np.ndarray
    tail_slope: float
    regular: bool

    def as_dict(self) -> dict:
        return {
            "theta": list(self.theta.indices),
            "shells": self.shells.tolist(),
            "min_margin": self.min_margin.tolist(),
            "mean_margin": self.mean_margin.tolist(),
            "tail_slope": self.tail_slope,
            "margins_diverge": self.regular,
        }


def regularity_report(orbit: Orbit, theta: Theta, slope_tol: float = 1e-6) -> RegularityReport:
    """Per-shell chamber margins and a divergence verdict from the tail slope."""
    if len(orbit) == 0:
        raise ValueError("regularity_report: empty orbit")
    margin = chamber_margin(orbit.kappa, theta)
    shells = np.unique(orbit.length)
    mins = np.array([margin[orbit.length == n].min() for n in shells])
    means = np.array([margin[orbit.length == n].mean() for n in shells])
    tail = shells >= shells.max() / 2.0
    if tail.sum() >= 2:
        slope = float(np.polyfit(shells[tail], mins[tail], 1)[0])
    else:
        slope = 0.0
    return RegularityReport(theta, shells, mins, means, slope, slope > slope_tol)


def regular_flag_frames(matrices, inverses) -> np.ndarray:
    """Frames representing U_Delta(g) for a stack of elements with known inverses.

    The top-k left singular subspace of g is the orthogonal complement of the
    top-(d-k) left singular subspace of g^{-T}.  Each subspace is read off
    whichever factor resolves it with the smaller rounding error, then the
    pieces are glued by a QR pass in reverse order.
    """
    from .decompositions import kak

    A = np.asarray(matrices, dtype=float)
    B = np.swapaxes(np.asarray(inverses, dtype=float), -1, -2)
    d = A.shape[-1]
    U1 = kak(A).left_k
    U2 = kak(B).left_k
    H = cartan_projection(A, np.asarray(inverses, dtype=float))
    # error of the top-m part from g ~ exp(H_1 - H_m); of the rest from g^-T ~ exp(H_{m+1} - H_d)
    costs = []
    for m in range(0, d + 1):
        c1 = H[..., 0] - H[..., m - 1] if m >= 1 else np.zeros(H.shape[:-1])
        c2 = H[..., m] - H[..., -1] if m <= d - 1 else np.zeros(H.shape[:-1])
        costs.append(np.maximum(c1, c2))
    m_best = np.argmin(np.stack(costs, axis=-1), axis=-1)
    frames = np.empty_like(A)
    for m in np.unique(m_best):
        sel = m_best == m
        pieces = [U2[sel][..., :, : d - m], U1[sel][..., :, :m][..., ::-1]]
        M = np.concatenate(pieces, axis=-1)
        Q, _ = linalg.qr_positive(M, check=False)
        # first d-k columns of M span the complement of the k-th subspace
        F = Q[..., ::-1]
        # align signs with the direct left singular vectors where they come from g
        s = np.sign(np.einsum("nik,nik->nk", F, U1[sel]))
        s[s == 0] = 1.0
        frames[sel] = F * s[:, None, :]
    return frames


def limit_set_sample(orbit: Orbit, theta: Theta, margin_floor: float, merge_tol: float = 1e-6):
    """U_theta(gamma) for every gamma with chamber margin above the floor.

    Returns ``(flags, indices)``; flags within ``merge_tol`` flag distance are
    merged, the shortest word surviving.
    """
    from .decompositions import PartialFlag

    margin = chamber_margin(orbit.kappa, theta)
    idx = np.flatnonzero(margin > margin_floor)
    if idx.size == 0:
        return [], np.array([], dtype=int)
    frames = regular_flag_frames(orbit.matrices[idx], orbit.inverses[idx])
    projs = np.stack([frames[:, :, :k] @ np.swapaxes(frames[:, :, :k], -1, -2) for k in theta.indices], axis=1)
    wts = np.random.default_rng(_FINGERPRINT_SEED).uniform(0.5, 1.5, size=projs.shape[1:])
    keys = np.einsum("nkij,kij->n", projs, wts)
    key_tol = merge_tol * np.abs(wts).sum()
    keep = first_occurrence_mask(keys, key_tol, lambda a, reps: _proj_close(projs[a], projs[reps], merge_tol))
    flags = [PartialFlag(theta, frames[j]) for j in np.flatnonzero(keep)]
    return flags, idx[keep]


def _proj_close(P, Qs, tol):
    """Which of the projector tuples ``Qs`` lie within spectral distance tol of ``P``."""
    diff = Qs - P[None]
    frob = np.sqrt((diff**2).sum(axis=(-2, -1))).max(axis=-1)
    out = frob <= tol
    unsure = np.flatnonzero(~out & (frob <= np.sqrt(2 * P.shape[-1]) * tol))
    if unsure.size:
        # differences of projectors are symmetric: spectral norm = largest |eigenvalue|
        spec = np.abs(np.linalg.eigvalsh(diff[unsure])).max(axis=(-2, -1))
        out[unsure] = spec <= tol
    return out
