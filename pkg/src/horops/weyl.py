"""Root data of SL(d, R) in log-singular-value coordinates.

A Cartan vector is a length-``d`` float array with zero coordinate sum.
Simple roots and fundamental weights are indexed ``1 .. d-1``:

    alpha_k(H) = H_k - H_{k+1},      omega_k(H) = H_1 + ... + H_k.

All functions broadcast over leading axes of ``H``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, Mapping

import numpy as np

MAX_WEIGHT_CONDITION = 1e3


def cartan_vector(coords) -> np.ndarray:
    """Copy of ``coords`` re-centred onto the traceless hyperplane."""
    H = np.array(coords, dtype=float)
    return H - H.mean(axis=-1, keepdims=True)


@dataclass(frozen=True)
class Theta:
    """Non-empty subset of simple roots of SL(d, R), stored as sorted indices."""

    d: int
    indices: tuple[int, ...]

    def __post_init__(self):
        idx = tuple(sorted(set(int(i) for i in self.indices)))
        if self.d < 2:
            raise ValueError("Theta: need d >= 2")
        if not idx:
            raise ValueError("Theta: subset must be non-empty")
        if idx[0] < 1 or idx[-1] > self.d - 1:
            raise ValueError(f"Theta: indices must lie in 1..{self.d - 1}, got {idx}")
        object.__setattr__(self, "indices", idx)

    @classmethod
    def full(cls, d: int) -> "Theta":
        return cls(d, tuple(range(1, d)))

    def __iter__(self):
        return iter(self.indices)

    def __len__(self):
        return len(self.indices)

    def __contains__(self, k):
        return k in self.indices

    @property
    def is_full(self) -> bool:
        return len(self.indices) == self.d - 1

    def blocks(self) -> list[tuple[int, int]]:
        """Half-open coordinate ranges on which vectors of a_theta are constant."""
        cuts = (0,) + self.indices + (self.d,)
        return [(cuts[i], cuts[i + 1]) for i in range(len(cuts) - 1)]

    def istar(self) -> "Theta":
        return istar_theta(self)

    def union(self, other: "Theta") -> "Theta":
        return Theta(self.d, self.indices + other.indices)

    def __str__(self):
        return "{" + ",".join(str(i) for i in self.indices) + "}"


@dataclass(frozen=True)
class Functional:
    """Linear functional ``sum_k c_k omega_k`` on a_theta."""

    weight_coeffs: Mapping[int, float] = field(default_factory=dict)

    def __post_init__(self):
        coeffs = {int(k): float(v) for k, v in dict(self.weight_coeffs).items()}
        if not coeffs:
            raise ValueError("Functional: need at least one coefficient")
        if not all(np.isfinite(v) for v in coeffs.values()):
            raise ValueError("Functional: coefficients must be finite")
        object.__setattr__(self, "weight_coeffs", dict(sorted(coeffs.items())))

    def __call__(self, H) -> np.ndarray | float:
        H = np.asarray(H, dtype=float)
        total = 0.0
        for k, c in self.weight_coeffs.items():
            total = total + c * fundamental_weight(k, H)
        return total

    def support(self, d: int) -> Theta:
        return Theta(d, tuple(self.weight_coeffs))

    @property
    def l1(self) -> float:
        return float(sum(abs(c) for c in self.weight_coeffs.values()))

    def __hash__(self):
        return hash(tuple(self.weight_coeffs.items()))


def _check_index(k: int, d: int):
    if not 1 <= k <= d - 1:
        raise ValueError(f"root index {k} out of range 1..{d - 1}")


def simple_root(k: int, H) -> np.ndarray | float:
    H = np.asarray(H, dtype=float)
    _check_index(k, H.shape[-1])
    return H[..., k - 1] - H[..., k]


def fundamental_weight(k: int, H) -> np.ndarray | float:
    H = np.asarray(H, dtype=float)
    _check_index(k, H.shape[-1])
    return H[..., :k].sum(axis=-1)


def weights(theta: Theta, H) -> np.ndarray:
    """``(omega_k(H))_{k in theta}`` stacked along a new last axis."""
    cums = np.cumsum(np.asarray(H, dtype=float), axis=-1)
    return cums[..., [k - 1 for k in theta.indices]]


def roots(theta: Theta, H) -> np.ndarray:
    H = np.asarray(H, dtype=float)
    i = np.array(theta.indices)
    return H[..., i - 1] - H[..., i]


@lru_cache(maxsize=None)
def weight_basis_condition(theta: Theta) -> float:
    """Condition number of omega restricted to a_theta in the coweight basis."""
    d = theta.d
    ks = theta.indices
    M = np.array([[min(i, k) - i * k / d for k in ks] for i in ks])
    cond = float(np.linalg.cond(M))
    if cond >= MAX_WEIGHT_CONDITION:
        raise AssertionError(f"weight basis for theta={theta} is ill-conditioned: {cond:.3g}")
    return cond


def partial_projection(theta: Theta, H) -> np.ndarray:
    """Project onto a_theta keeping omega_k fixed for k in theta.

    a_theta consists of vectors constant on the blocks cut out by theta, and
    matching the partial sums at every cut forces the block averages of H.
    """
    weight_basis_condition(theta)
    H = np.asarray(H, dtype=float)
    out = np.empty_like(H)
    for lo, hi in theta.blocks():
        out[..., lo:hi] = H[..., lo:hi].mean(axis=-1, keepdims=True)
    return out


def from_weights(theta: Theta, w) -> np.ndarray:
    """The vector of a_theta whose omega_k-values (k in theta) are ``w``."""
    w = np.asarray(w, dtype=float)
    if w.shape[-1] != len(theta):
        raise ValueError("from_weights: need one value per root in theta")
    out = np.empty(w.shape[:-1] + (theta.d,))
    prev_k, prev_w = 0, np.zeros(w.shape[:-1])
    for j, (lo, hi) in enumerate(theta.blocks()):
        cur_w = w[..., j] if j < len(theta) else np.zeros(w.shape[:-1])
        out[..., lo:hi] = ((cur_w - prev_w) / (hi - prev_k))[..., None]
        prev_k, prev_w = hi, cur_w
    return out


def opposition_involution(H) -> np.ndarray:
    H = np.asarray(H, dtype=float)
    return -H[..., ::-1]


def istar_theta(theta: Theta) -> Theta:
    return Theta(theta.d, tuple(theta.d - k for k in theta.indices))


def chamber_margin(H, theta: Theta) -> np.ndarray | float:
    """min over k in theta of alpha_k(H)."""
    return roots(theta, H).min(axis=-1)


def is_dominant(H, tol: float = 1e-12) -> bool:
    return bool(np.all(np.diff(np.asarray(H, dtype=float), axis=-1) <= tol))


def norm(H) -> np.ndarray | float:
    return np.linalg.norm(np.asarray(H, dtype=float), axis=-1)


def weight_norm_constant(d: int, k: int) -> float:
    """max of omega_k over unit traceless vectors, ``sqrt(k (d - k) / d)``."""
    return float(np.sqrt(k * (d - k) / d))


def parse_theta(d: int, indices: Iterable[int] | Theta) -> Theta:
    if isinstance(indices, Theta):
        if indices.d != d:
            raise ValueError("theta dimension mismatch")
        return indices
    return Theta(d, tuple(indices))
