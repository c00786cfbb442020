"""Dense linear algebra for small real matrices.

Everything here accepts either a single ``(n, n)`` array or a stack
``(..., n, n)`` and works batch-wise, because the orbit engine pushes
hundreds of thousands of small matrices through the same routines.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from itertools import combinations

import numpy as np

JACOBI_TOL = 1e-14
JACOBI_MAX_SWEEPS = 60
SINGULAR_TOL = 1e-12


@dataclass(frozen=True)
class SvdResult:
    """``M = left_factor @ diag(singular_values) @ right_factor.T``."""

    left_factor: np.ndarray
    singular_values: np.ndarray
    right_factor: np.ndarray

    def reconstruct(self) -> np.ndarray:
        return (self.left_factor * self.singular_values[..., None, :]) @ np.swapaxes(
            self.right_factor, -1, -2
        )


def _as_square_stack(M, name="M"):
    A = np.asarray(M, dtype=float)
    if A.ndim < 2 or A.shape[-1] != A.shape[-2]:
        raise ValueError(f"{name} must be square, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise ValueError(f"{name} has non-finite entries")
    return A


def _jacobi_columns(G: np.ndarray, V: np.ndarray | None):
    """One-sided Jacobi: rotate column pairs of G (in place) until orthogonal."""
    n = G.shape[-1]
    for _ in range(JACOBI_MAX_SWEEPS):
        worst = 0.0
        for p in range(n - 1):
            for q in range(p + 1, n):
                gp = G[..., :, p]
                gq = G[..., :, q]
                alpha = np.einsum("...i,...i->...", gp, gp)
                beta = np.einsum("...i,...i->...", gq, gq)
                gamma = np.einsum("...i,...i->...", gp, gq)
                scale = np.sqrt(alpha * beta)
                with np.errstate(divide="ignore", invalid="ignore"):
                    ratio = np.where(scale > 0, np.abs(gamma) / scale, 0.0)
                if ratio.size:
                    worst = max(worst, float(ratio.max()))
                active = ratio > 0
                if not np.any(active):
                    continue
                safe_gamma = np.where(active, gamma, 1.0)
                zeta = (beta - alpha) / (2.0 * safe_gamma)
                sign = np.where(zeta >= 0, 1.0, -1.0)
                t = sign / (np.abs(zeta) + np.hypot(1.0, zeta))
                c = 1.0 / np.hypot(1.0, t)
                s = c * t
                c = np.where(active, c, 1.0)[..., None]
                s = np.where(active, s, 0.0)[..., None]
                new_p = c * gp - s * gq
                new_q = s * gp + c * gq
                G[..., :, p] = new_p
                G[..., :, q] = new_q
                if V is not None:
                    vp = V[..., :, p].copy()
                    vq = V[..., :, q]
                    V[..., :, p] = c * vp - s * vq
                    V[..., :, q] = s * vp + c * vq
        if worst <= JACOBI_TOL:
            break
    return G, V


def singular_values(M) -> np.ndarray:
    """Singular values only, non-increasing along the last axis."""
    A = _as_square_stack(M)
    G, _ = _jacobi_columns(A.copy(), None)
    s = np.linalg.norm(G, axis=-2)
    return -np.sort(-s, axis=-1)


def svd(M) -> SvdResult:
    A = _as_square_stack(M)
    n = A.shape[-1]
    V = np.broadcast_to(np.eye(n), A.shape).copy()
    G, V = _jacobi_columns(A.copy(), V)
    s = np.linalg.norm(G, axis=-2)
    # stable sort keeps index order on ties
    order = np.argsort(-s, axis=-1, kind="stable")
    s = np.take_along_axis(s, order, axis=-1)
    G = np.take_along_axis(G, order[..., None, :], axis=-1)
    V = np.take_along_axis(V, order[..., None, :], axis=-1)
    with np.errstate(divide="ignore", invalid="ignore"):
        U = np.where(s[..., None, :] > 0, G / s[..., None, :], 0.0)
    # small singular values give inaccurate columns; re-orthonormalize in order
    Q, R = _householder(U)
    sign = np.where(np.diagonal(R, axis1=-2, axis2=-1) < 0, -1.0, 1.0)
    U = Q * sign[..., None, :]
    return SvdResult(U, s, V)


def _householder(A: np.ndarray):
    """Householder QR of a stack, no sign normalization."""
    R = A.copy()
    n = R.shape[-1]
    Q = np.broadcast_to(np.eye(n), R.shape).copy()
    for k in range(n - 1):
        x = R[..., k:, k]
        norm_x = np.linalg.norm(x, axis=-1)
        sign = np.where(x[..., 0] >= 0, 1.0, -1.0)
        v = x.copy()
        v[..., 0] += sign * norm_x
        norm_v = np.linalg.norm(v, axis=-1)
        with np.errstate(divide="ignore", invalid="ignore"):
            v = np.where(norm_v[..., None] > 0, v / norm_v[..., None], 0.0)
        R[..., k:, :] -= 2.0 * v[..., :, None] * np.einsum("...i,...ij->...j", v, R[..., k:, :])[..., None, :]
        Q[..., :, k:] -= 2.0 * np.einsum("...ij,...j->...i", Q[..., :, k:], v)[..., :, None] * v[..., None, :]
    return Q, np.triu(R)


def qr_positive(M, check: bool = True):
    """Factor ``M = Q @ R`` with Q orthogonal and R upper triangular, diag(R) > 0.

    Deterministic: the same input always yields bit-identical factors.
    """
    A = _as_square_stack(M)
    if check:
        smin = singular_values(A)[..., -1]
        if np.any(smin < SINGULAR_TOL):
            raise ValueError("qr_positive: matrix is numerically singular")
    Q, R = _householder(A)
    d = np.diagonal(R, axis1=-2, axis2=-1)
    sign = np.where(d < 0, -1.0, 1.0)
    return Q * sign[..., None, :], R * sign[..., :, None]


@lru_cache(maxsize=None)
def wedge_basis(d: int, k: int) -> tuple[tuple[int, ...], ...]:
    """Index subsets of size k, lexicographic, smallest index first."""
    return tuple(combinations(range(d), k))


def exterior_power(M, k: int) -> np.ndarray:
    """Matrix of ``k``-th exterior power in the lexicographic wedge basis.

    Entry ``(I, J)`` is the minor with rows ``I`` and columns ``J``.
    """
    A = np.asarray(M, dtype=float)
    d = A.shape[-1]
    if not 1 <= k <= d - 1:
        raise ValueError(f"exterior power degree {k} out of range for d={d}")
    if k == 1:
        return A.copy()
    idx = np.array(wedge_basis(d, k))
    rows = idx[:, None, :, None]
    cols = idx[None, :, None, :]
    sub = A[..., rows, cols]
    return np.linalg.det(sub)


def wedge_of_columns(B) -> np.ndarray:
    """Coordinates of ``b_1 ^ ... ^ b_k`` for the columns of B (d x k)."""
    B = np.asarray(B, dtype=float)
    d, k = B.shape[-2], B.shape[-1]
    idx = np.array(wedge_basis(d, k))
    return np.linalg.det(B[..., idx, :])


def subspace_gap(A, B) -> float:
    """Smallest singular value of ``[A | B]``; zero iff the spans meet."""
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    if A.ndim != 2 or B.ndim != 2 or A.shape[0] != B.shape[0]:
        raise ValueError("subspace_gap: bases must share the ambient dimension")
    if A.shape[1] + B.shape[1] != A.shape[0]:
        raise ValueError("subspace_gap: dimensions must add up to the ambient dimension")
    return float(singular_values(np.hstack([A, B]))[-1])


def complete_basis(A, tol: float = 1e-8) -> np.ndarray:
    """Extend orthonormal columns to an orthonormal basis.

    Gram-Schmidt over e_1, ..., e_d in order, so the completion is deterministic.
    """
    A = np.asarray(A, dtype=float)
    d, k = A.shape
    cols = [A[:, j] for j in range(k)]
    for i in range(d):
        if len(cols) == d:
            break
        v = np.zeros(d)
        v[i] = 1.0
        for _ in range(2):
            for c in cols:
                v = v - (c @ v) * c
        nv = np.linalg.norm(v)
        if nv > tol:
            cols.append(v / nv)
    return np.column_stack(cols)


def random_special_orthogonal(d: int, rng: np.random.Generator, size=None) -> np.ndarray:
    shape = (d, d) if size is None else (size, d, d)
    return random_special_orthogonal_from(rng.standard_normal(shape))


def random_special_orthogonal_from(gaussian) -> np.ndarray:
    """Haar-distributed rotations from standard Gaussian matrices (positive QR)."""
    Q, _ = qr_positive(gaussian, check=False)
    det = np.linalg.det(Q)
    Q[..., :, 0] *= np.where(det < 0, -1.0, 1.0)[..., None]
    return Q


def random_sl(d: int, rng: np.random.Generator, size=None, spread: float = 1.0) -> np.ndarray:
    """Random elements of SL(d, R): ``k1 @ exp(H) @ k2`` with H traceless of scale ``spread``."""
    n = 1 if size is None else size
    H = rng.normal(scale=spread, size=(n, d))
    H -= H.mean(axis=1, keepdims=True)
    k1 = random_special_orthogonal(d, rng, n)
    k2 = random_special_orthogonal(d, rng, n)
    g = (k1 * np.exp(H)[:, None, :]) @ k2
    return g[0] if size is None else g


def project_to_sl(M) -> np.ndarray:
    """Rescale by the positive d-th root of the determinant."""
    A = np.asarray(M, dtype=float)
    d = A.shape[-1]
    det = np.linalg.det(A)
    if np.any(det <= 0):
        raise ValueError("project_to_sl: determinant must be positive")
    return A / (det ** (1.0 / d))[..., None, None]


@lru_cache(maxsize=None)
def hodge_matrix(d: int, k: int) -> np.ndarray:
    """Signed permutation S with ``S e_I = sgn(I, I^c) e_{I^c}`` from degree k to d - k."""
    src = wedge_basis(d, k)
    dst = {I: j for j, I in enumerate(wedge_basis(d, d - k))}
    S = np.zeros((len(dst), len(src)))
    for i, I in enumerate(src):
        comp = tuple(j for j in range(d) if j not in I)
        perm = I + comp
        inversions = sum(1 for a in range(d) for b in range(a + 1, d) if perm[a] > perm[b])
        S[dst[comp], i] = -1.0 if inversions % 2 else 1.0
    S.setflags(write=False)
    return S


def exterior_power_stable(M, k: int, M_inv=None) -> np.ndarray:
    """``exterior_power(M, k)`` for det M = 1, avoiding cancellation when possible.

    Minors of size k > d/2 of a badly conditioned matrix cancel heavily.  With
    the inverse at hand they are read off the complementary minors of
    ``M^{-T}`` through the Hodge star, which involves no cancellation beyond
    that of the smaller degree.
    """
    A = np.asarray(M, dtype=float)
    d = A.shape[-1]
    if M_inv is None or 2 * k <= d:
        return exterior_power(A, k)
    S = hodge_matrix(d, k)
    inv_t = np.swapaxes(np.asarray(M_inv, dtype=float), -1, -2)
    return S.T @ exterior_power(inv_t, d - k) @ S
