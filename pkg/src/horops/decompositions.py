"""Cartan (KAK) and Iwasawa decompositions, flags and flag projections."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import linalg
from .weyl import Theta, chamber_margin, partial_projection

DET_TOL = 1e-9
FLAG_TOL = 1e-9


class IrregularElementError(ValueError):
    """Raised when U_theta(g) is requested for an element too close to the chamber walls."""


def as_group_element(g, tol: float = DET_TOL) -> np.ndarray:
    """Validate a matrix (or stack) as an element of SL(d, R)."""
    A = linalg._as_square_stack(g, "g")
    det = np.linalg.det(A)
    if np.any(np.abs(det - 1.0) > tol * np.maximum(1.0, np.abs(det))):
        raise ValueError(f"matrix is not in SL(d,R): det = {det}")
    return A


def _adjugate2(A):
    out = np.empty_like(A)
    out[..., 0, 0] = A[..., 1, 1]
    out[..., 1, 1] = A[..., 0, 0]
    out[..., 0, 1] = -A[..., 0, 1]
    out[..., 1, 0] = -A[..., 1, 0]
    return out


def _cartan_2x2(A):
    a, b, c, e = A[..., 0, 0], A[..., 0, 1], A[..., 1, 0], A[..., 1, 1]
    det = a * e - b * c
    # the entrywise determinant is pure cancellation noise for large matrices
    big = np.abs(A).max(axis=(-2, -1)) > 1e4
    det = np.where(big, 1.0, det)
    if np.any(det <= 0):
        raise ValueError("cartan_projection: matrix is not invertible")
    # sigma1^2 + sigma2^2 - 2 sigma1 sigma2 = (a - e)^2 + (b + c)^2, free of cancellation
    h = np.arcsinh(0.5 * np.sqrt(((a - e) ** 2 + (b + c) ** 2) / det))
    return np.stack([h, -h], axis=-1)


def cartan_projection(g, g_inv=None) -> np.ndarray:
    """Log singular values of ``g``, non-increasing, re-centred to sum zero.

    Small singular values of a badly conditioned matrix carry absolute rather
    than relative error.  When the inverse is known exactly (products of
    generator inverses) the lower half of the coordinates is read off the top
    singular values of the inverse instead.  For d = 2 a closed form in the
    entries is used.
    """
    A = np.asarray(g, dtype=float)
    d = A.shape[-1]
    if d == 2:
        return _cartan_2x2(A)
    s = linalg.singular_values(A)
    half = d // 2
    upper = s[..., : max(half, 1)] if g_inv is not None else s
    if np.any(upper[..., -1] <= 0):
        raise ValueError("cartan_projection: matrix is not invertible")
    with np.errstate(divide="ignore"):
        H = np.log(s)
    if g_inv is not None:
        s_inv = linalg.singular_values(np.asarray(g_inv, dtype=float))
        lower = -np.log(s_inv[..., :half])[..., ::-1]
        H[..., d - half:] = lower
        if d % 2:
            H[..., half] = 0.0
            H[..., half] = -H.sum(axis=-1)
    return H - H.mean(axis=-1, keepdims=True)


@dataclass(frozen=True)
class KakDecomposition:
    """``g = left_k @ diag(exp(kappa)) @ right_k``."""

    left_k: np.ndarray
    kappa: np.ndarray
    right_k: np.ndarray

    def reconstruct(self) -> np.ndarray:
        return (self.left_k * np.exp(self.kappa)[..., None, :]) @ self.right_k


def kak(g) -> KakDecomposition:
    res = linalg.svd(g)
    U = res.left_factor.copy()
    Vt = np.swapaxes(res.right_factor, -1, -2).copy()
    # det(U) det(V) = 1 for det g > 0; flip a matching column/row pair when both are -1
    flip = np.linalg.det(U) < 0
    U[..., :, -1] *= np.where(flip, -1.0, 1.0)[..., None]
    Vt[..., -1, :] *= np.where(flip, -1.0, 1.0)[..., None]
    H = np.log(res.singular_values)
    H = H - H.mean(axis=-1, keepdims=True)
    return KakDecomposition(U, H, Vt)


def longest_weyl_element(d: int) -> np.ndarray:
    """Antidiagonal permutation, sign-adjusted to determinant +1."""
    w = np.fliplr(np.eye(d))
    if np.linalg.det(w) < 0:
        w[:, 0] *= -1
    return w


@dataclass(frozen=True)
class PartialFlag:
    """Point of the flag manifold of type theta.

    ``frame`` is an orthogonal matrix whose first k columns span the
    k-dimensional subspace for every k in theta; it is one representative
    k in K with ``x = k P_theta``.
    """

    theta: Theta
    frame: np.ndarray

    def __post_init__(self):
        F = np.asarray(self.frame, dtype=float)
        d = self.theta.d
        if F.shape != (d, d):
            raise ValueError(f"PartialFlag: frame must be {d}x{d}")
        if np.abs(F.T @ F - np.eye(d)).max() > FLAG_TOL:
            raise ValueError("PartialFlag: frame is not orthogonal")
        object.__setattr__(self, "frame", F)

    @property
    def d(self) -> int:
        return self.theta.d

    def subspace(self, k: int) -> np.ndarray:
        if k not in self.theta:
            raise KeyError(f"flag of type {self.theta} has no {k}-dimensional subspace")
        return self.frame[:, :k]

    @property
    def subspaces(self) -> dict[int, np.ndarray]:
        return {k: self.frame[:, :k] for k in self.theta}

    def projector(self, k: int) -> np.ndarray:
        B = self.subspace(k)
        return B @ B.T

    def line(self, k: int) -> np.ndarray:
        """Unit vector spanning the top wedge line of the k-subspace."""
        return linalg.wedge_of_columns(self.frame[:, :k])

    def coarsen(self, theta: Theta) -> "PartialFlag":
        if not set(theta.indices) <= set(self.theta.indices):
            raise ValueError(f"cannot coarsen type {self.theta} to {theta}")
        return PartialFlag(theta, self.frame)

    def with_frame_completion(self) -> np.ndarray:
        return self.frame

    @classmethod
    def standard(cls, theta: Theta) -> "PartialFlag":
        return cls(theta, np.eye(theta.d))

    @classmethod
    def from_subspaces(cls, theta: Theta, bases: dict[int, np.ndarray]) -> "PartialFlag":
        """Build a flag from (not necessarily orthonormal) nested bases."""
        d = theta.d
        cols = np.zeros((d, 0))
        prev = 0
        for k in theta.indices:
            B = np.asarray(bases[k], dtype=float)
            if B.shape != (d, k):
                raise ValueError(f"basis for dimension {k} must be {d}x{k}")
            Qb = linalg.svd(np.hstack([B, np.zeros((d, d - k))])).left_factor[:, :k]
            if cols.shape[1] and np.linalg.norm(cols - Qb @ (Qb.T @ cols)) > 1e-7:
                raise ValueError("from_subspaces: subspaces are not nested")
            resid = Qb - cols @ (cols.T @ Qb)
            U = linalg.svd(np.hstack([resid, np.zeros((d, d - k))])).left_factor
            cols = np.hstack([cols, U[:, : k - prev]])
            prev = k
        return cls(theta, linalg.complete_basis(cols))

    def __repr__(self):
        return f"PartialFlag(theta={self.theta}, frame=\n{self.frame})"


def act_on_flag(g, x: PartialFlag) -> PartialFlag:
    """The flag ``g . x``, re-orthonormalized by positive QR."""
    Q, _ = linalg.qr_positive(np.asarray(g, dtype=float) @ x.frame)
    return PartialFlag(x.theta, Q)


def flag_distance(x: PartialFlag, y: PartialFlag) -> float:
    """max over k of the spectral distance between orthogonal projectors."""
    if x.theta != y.theta:
        raise ValueError("flag_distance: flags of different type")
    return max(float(linalg.singular_values(x.projector(k) - y.projector(k))[0]) for k in x.theta)


def flag_projection(g, theta: Theta, margin_tol: float = 1e-6) -> PartialFlag:
    """U_theta(g): span of the first k left singular vectors, k in theta."""
    dec = kak(g)
    margin = chamber_margin(dec.kappa, theta)
    if margin <= margin_tol:
        raise IrregularElementError(
            f"chamber margin {float(margin):.3g} <= {margin_tol:g}; U_theta(g) is not defined"
        )
    return PartialFlag(theta, dec.left_k)


def flag_frames(mats) -> tuple[np.ndarray, np.ndarray]:
    """Batched KAK left factors and log singular values for a stack."""
    dec = kak(mats)
    return dec.left_k, dec.kappa


def _frame_of(x):
    return x.frame if isinstance(x, PartialFlag) else np.asarray(x, dtype=float)


def iwasawa_cocycle_full(g, x) -> np.ndarray:
    """B(g, x) with ``g k in K exp(B) N``; x is a full flag or its frame."""
    if isinstance(x, PartialFlag) and not x.theta.is_full:
        raise ValueError("iwasawa_cocycle_full needs a full flag; use iwasawa_cocycle_partial")
    _, R = linalg.qr_positive(np.asarray(g, dtype=float) @ _frame_of(x), check=False)
    return np.log(np.diagonal(R, axis1=-2, axis2=-1))


def iwasawa_cocycle_partial(theta: Theta, g, x) -> np.ndarray:
    """pi_theta of the full cocycle on the lift given by the flag's frame."""
    if isinstance(x, PartialFlag) and not set(theta.indices) <= set(x.theta.indices):
        raise ValueError(f"flag of type {x.theta} does not determine a flag of type {theta}")
    _, R = linalg.qr_positive(np.asarray(g, dtype=float) @ _frame_of(x), check=False)
    return partial_projection(theta, np.log(np.diagonal(R, axis1=-2, axis2=-1)))


def symmetric_distance(g, h) -> float:
    """dist_X(g o, h o) = |kappa(g^-1 h)| (Euclidean norm on a)."""
    g = np.asarray(g, dtype=float)
    h = np.asarray(h, dtype=float)
    return np.linalg.norm(cartan_projection(np.linalg.solve(g, h)), axis=-1)


def stabilizer_element(theta: Theta, rng: np.random.Generator) -> np.ndarray:
    """Random block-diagonal orthogonal matrix in K cap P_theta (det +1)."""
    d = theta.d
    m = np.zeros((d, d))
    for lo, hi in theta.blocks():
        b = hi - lo
        Q, _ = linalg.qr_positive(rng.standard_normal((b, b)), check=False)
        if rng.random() < 0.5:
            Q[:, 0] *= -1
        m[lo:hi, lo:hi] = Q
    if np.linalg.det(m) < 0:
        m[:, 0] *= -1
    return m


def random_flag(theta: Theta, rng: np.random.Generator) -> PartialFlag:
    return PartialFlag(theta, linalg.random_special_orthogonal(theta.d, rng))
