"""Hermitian-matrix model of Minkowski 4-space and the SU(1,1) isometry layer.

Minkowski 4-space R^4_1 (signature -+++) is identified with 2x2 Hermitian
matrices via

    X = x0*E0 + x1*E1 + x2*E2 + x3*E3
      = [[x0+x3, x1+i*x2], [x1-i*x2, x0-x3]],

under which the quadratic form is <X,X> = -det X.  The unit de Sitter
3-space sits inside as the Hermitian matrices of determinant -1, swept out
by F E3 F* for F in SL(2,C).

All 2x2 matrices are numpy complex arrays.  Points of the extended complex
plane are python complex numbers, with infinity represented by
``complex(inf, 0)`` (any non-finite complex is treated as the point at
infinity).
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "E0", "E1", "E2", "E3", "IDENTITY", "INF",
    "MinkowskiVec", "mink_to_herm", "herm_to_mink", "minkowski_product",
    "is_hermitian", "mat", "mobius_apply", "mobius_normalize",
    "su11_residuals", "su11_membership", "isometry_apply",
]

E0 = np.eye(2, dtype=complex)
E1 = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
E2 = np.array([[0.0, 1.0j], [-1.0j, 0.0]], dtype=complex)
E3 = np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex)
IDENTITY = E0

INF = complex(math.inf, 0.0)


def mat(a, b, c, d) -> np.ndarray:
    """2x2 complex matrix [[a, b], [c, d]]."""
    return np.array([[a, b], [c, d]], dtype=complex)


def is_inf(z: complex) -> bool:
    return not (math.isfinite(z.real) and math.isfinite(z.imag))


@dataclass(frozen=True)
class MinkowskiVec:
    """Point/vector of R^4_1 with coordinates (x0, x1, x2, x3), x0 timelike."""

    x0: float
    x1: float
    x2: float
    x3: float

    def as_array(self) -> np.ndarray:
        return np.array([self.x0, self.x1, self.x2, self.x3])

    def spatial_norm_sq(self) -> float:
        return self.x1 ** 2 + self.x2 ** 2 + self.x3 ** 2


def minkowski_product(v: MinkowskiVec, w: MinkowskiVec) -> float:
    """Signature (-+++) inner product."""
    return -v.x0 * w.x0 + v.x1 * w.x1 + v.x2 * w.x2 + v.x3 * w.x3


def mink_to_herm(v: MinkowskiVec) -> np.ndarray:
    """Hermitian matrix sum x_k E_k of a Minkowski vector."""
    return v.x0 * E0 + v.x1 * E1 + v.x2 * E2 + v.x3 * E3


def hermiticity_defect(X: np.ndarray) -> float:
    return float(np.max(np.abs(X - X.conj().T)))


def is_hermitian(X: np.ndarray, tol: float = 1e-10) -> bool:
    return hermiticity_defect(X) <= tol


def herm_to_mink(X: np.ndarray, tol: float = 1e-10) -> MinkowskiVec:
    """Inverse of mink_to_herm.  Rejects matrices that are not Hermitian.

    The coordinates are x0 = Re(X00+X11)/2, x3 = Re(X00-X11)/2,
    x1 = Re X01, x2 = Im X01.
    """
    defect = hermiticity_defect(X)
    scale = max(1.0, float(np.max(np.abs(X))))
    if defect > tol * scale:
        raise ValueError(
            f"matrix is not Hermitian (defect {defect:.3e}, tol {tol * scale:.3e})")
    x0 = (X[0, 0].real + X[1, 1].real) / 2.0
    x3 = (X[0, 0].real - X[1, 1].real) / 2.0
    x1 = X[0, 1].real
    x2 = X[0, 1].imag
    return MinkowskiVec(x0, x1, x2, x3)


def mobius_apply(A: np.ndarray, z: complex) -> complex:
    """Fractional linear action A * z = (a z + b)/(c z + d) on C u {inf}.

    Works projectively on a homogeneous pair, so A * inf = a/c and poles map
    to inf without special-casing by the caller.  det A must be nonzero.
    """
    a, b = A[0, 0], A[0, 1]
    c, d = A[1, 0], A[1, 1]
    det = a * d - b * c
    if det == 0:
        raise ValueError("mobius_apply requires det A != 0")
    if is_inf(z):
        num, den = a, c
    else:
        num, den = a * z + b, c * z + d
    if den == 0:
        return INF
    w = num / den
    if is_inf(w):
        return INF
    return w


def mobius_normalize(A: np.ndarray) -> np.ndarray:
    """Scale A to det 1 (one of the two SL(2,C) lifts)."""
    det = A[0, 0] * A[1, 1] - A[0, 1] * A[1, 0]
    if det == 0:
        raise ValueError("singular matrix")
    return A / cmath.sqrt(det)


def su11_residuals(A: np.ndarray) -> tuple[float, float]:
    """Scale-normalized SU(1,1) residuals (form defect, determinant defect).

    Returns (||A E3 A* - E3||_F, |det A - 1|), both divided by
    max(1, ||A||_F^2).  The normalization keeps the residual meaningful for
    matrices with very large entries (e.g. monodromies with trace ~ 1e13),
    where the raw residual is dominated by float64 cancellation; for
    matrices of norm O(1) it agrees with the absolute residual up to a
    small constant factor.
    """
    norm_sq = float(np.linalg.norm(A)) ** 2
    scale = max(1.0, norm_sq)
    form = float(np.linalg.norm(A @ E3 @ A.conj().T - E3)) / scale
    det = A[0, 0] * A[1, 1] - A[0, 1] * A[1, 0]
    det_defect = abs(det - 1.0) / scale
    return form, det_defect


def su11_membership(A: np.ndarray, tol: float = 1e-9) -> bool:
    """True if A preserves the Hermitian form E3 and has det 1, within tol."""
    form, det_defect = su11_residuals(A)
    return form <= tol and det_defect <= tol


def isometry_apply(a: np.ndarray, X: np.ndarray) -> np.ndarray:
    """Isometric SL(2,C) action X -> a X a* on Hermitian matrices."""
    return a @ X @ a.conj().T
