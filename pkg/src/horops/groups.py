"""Built-in example groups."""

from __future__ import annotations

import numpy as np

from .orbit import GroupPresentation
from .weyl import Functional, Theta

SCHOTTKY_T = 1.2


def hyperbolic_pair(t: float = SCHOTTKY_T) -> tuple[np.ndarray, np.ndarray]:
    """Two hyperbolic elements of SL(2, R) with perpendicular axes through o."""
    a = np.array([[np.cosh(t), np.sinh(t)], [np.sinh(t), np.cosh(t)]])
    b = np.diag([np.exp(t), np.exp(-t)])
    return a, b


def symmetric_square(A) -> np.ndarray:
    """Sym^2 of a 2x2 matrix in the orthonormal basis (x^2, sqrt2 xy, y^2)."""
    a, b, c, d = np.asarray(A, dtype=float).ravel()
    r = np.sqrt(2.0)
    return np.array(
        [
            [a * a, r * a * b, b * b],
            [r * a * c, a * d + b * c, r * b * d],
            [c * c, r * c * d, d * d],
        ]
    )


def block_embed(A, d: int = 4) -> np.ndarray:
    """``diag(A, I)`` in SL(d, R)."""
    A = np.asarray(A, dtype=float)
    out = np.eye(d)
    out[: A.shape[0], : A.shape[0]] = A
    return out


PUNCTURED_TORUS = (
    np.array([[1.0, 1.0], [1.0, 2.0]]),
    np.array([[1.0, -1.0], [-1.0, 2.0]]),
)


def cyclic(d: int = 3) -> GroupPresentation:
    H = np.linspace(1.0, -1.0, d) * 0.9 + np.linspace(0.0, 0.3, d)
    H = H - H.mean()
    return GroupPresentation((np.diag(np.exp(H)),), ("g",), "cyclic")


def schottky(t: float = SCHOTTKY_T) -> GroupPresentation:
    return GroupPresentation(hyperbolic_pair(t), ("a", "b"), "schottky")


def punctured_torus() -> GroupPresentation:
    """Free generators of a once-punctured torus lattice (commutator trace -2)."""
    return GroupPresentation(PUNCTURED_TORUS, ("a", "b"), "punctured-torus")


def example59() -> GroupPresentation:
    """Gamma_0 x {id} inside SL(2) x SL(2), block-diagonally in SL(4)."""
    return GroupPresentation(tuple(block_embed(A) for A in PUNCTURED_TORUS), ("a", "b"), "example59")


def sym2_schottky(t: float = SCHOTTKY_T) -> GroupPresentation:
    return GroupPresentation(tuple(symmetric_square(A) for A in hyperbolic_pair(t)), ("a", "b"), "sym2-schottky")


def modular() -> GroupPresentation:
    """SL(2, Z) with generators S, T; many relations, used to exercise dedup."""
    S = np.array([[0.0, -1.0], [1.0, 0.0]])
    T = np.array([[1.0, 1.0], [0.0, 1.0]])
    return GroupPresentation((S, T), ("s", "t"), "modular")


BUILTIN = {
    "cyclic": (cyclic, (1, 2), {1: 1.0}),
    "schottky": (schottky, (1,), {1: 1.0}),
    "punctured-torus": (punctured_torus, (1,), {1: 1.0}),
    "example59": (example59, (1, 2, 3), {1: 1.0}),
    "sym2-schottky": (sym2_schottky, (1, 2), {1: 1.0, 2: 1.0}),
    "modular": (modular, (1,), {1: 1.0}),
}


def builtin(name: str):
    """``(presentation, theta, phi)`` for a built-in example."""
    if name not in BUILTIN:
        raise KeyError(f"unknown built-in group {name!r}; choose from {sorted(BUILTIN)}")
    factory, idx, coeffs = BUILTIN[name]
    P = factory()
    return P, Theta(P.dim, idx), Functional(coeffs)


def product_flag_candidates(first_line, rng: np.random.Generator, count: int = 200,
                            scale_range=(1e-12, 1.0)) -> np.ndarray:
    """Frames of full flags in R^4 = R^2 + R^2 built from a pair of lines.

    The flag is (u, u + w, u + R^2_second, R^4) with u a line of the first
    block scattered around ``first_line`` at log-uniform angular scales and w
    a uniformly random line of the second block, i.e. a point of the product
    of the two circles seen inside the full flag manifold of SL(4, R).
    """
    base = np.arctan2(first_line[1], first_line[0])
    lo, hi = np.log(scale_range[0]), np.log(scale_range[1])
    eps = np.exp(rng.uniform(lo, hi, size=count)) * rng.choice([-1.0, 1.0], size=count)
    a = base + eps
    b = rng.uniform(0.0, np.pi, size=count)
    F = np.zeros((count, 4, 4))
    F[:, 0, 0], F[:, 1, 0] = np.cos(a), np.sin(a)
    F[:, 2, 1], F[:, 3, 1] = np.cos(b), np.sin(b)
    F[:, 2, 2], F[:, 3, 2] = -np.sin(b), np.cos(b)
    F[:, 0, 3], F[:, 1, 3] = -np.sin(a), np.cos(a)
    # orientation: det of this frame is -1, flip the last column
    F[:, :, 3] *= np.sign(np.linalg.det(F))[:, None]
    return F
