"""Conjugacy classification inside SU(1,1).

Elements of SU(1,1) have real trace and fall into three conjugacy types,
detected by |trace| against 2.  Up to conjugation within the group every
element equals (a sign times) one of three one-parameter canonical forms:
a rotation diag(e^{is}, e^{-is}), a null rotation with unit parameter, or
a boost.  This module classifies a matrix, produces the canonical
representative, and constructs an explicit conjugator inside SU(1,1).

The unit-disk picture: SU(1,1) acts on the disk by Mobius maps.  Rotations
fix a point inside the disk, null rotations fix one boundary point, boosts
fix two boundary points.  The Cayley-type change of frame ``sl2r_to_su11``
identifies the group with SL(2,R) acting on the upper half plane.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np

from .algebra import su11_membership, su11_residuals

__all__ = [
    "Elliptic",
    "Parabolic",
    "Hyperbolic",
    "classify",
    "canonical_matrix",
    "conjugate_to_canonical",
    "sl2r_to_su11",
    "su11_to_sl2r",
    "psu_representative",
]


# frame change between SL(2,R) (upper half plane) and SU(1,1) (unit disk):
# A real matrix X maps to _R_INV @ X @ _R and back with _R @ A @ _R_INV.
_R = 0.5 * np.array([[1.0, 1.0], [1.0j, -1.0j]])
_R_INV = np.array([[1.0, -1.0j], [1.0, 1.0j]])


def sl2r_to_su11(X: np.ndarray) -> np.ndarray:
    """Conjugate a real unimodular matrix into the unit-disk frame."""
    return _R_INV @ np.asarray(X, dtype=complex) @ _R


def su11_to_sl2r(A: np.ndarray) -> np.ndarray:
    """Inverse frame change; the result of a genuine member is real."""
    return _R @ np.asarray(A, dtype=complex) @ _R_INV


@dataclass(frozen=True)
class Elliptic:
    """Conjugate to diag(e^{is}, e^{-is}); rotation angle s in (-pi, pi].

    s = 0 is the identity and s = pi is minus the identity; both are
    central.  The sign of s distinguishes an element from its inverse.
    """

    s: float
    kind = "elliptic"


@dataclass(frozen=True)
class Parabolic:
    """Conjugate to sign_outer times the unit null rotation with parameter
    sign_t.  The null rotation with parameter t is
    [[1+it, -it], [it, 1-it]]; conjugation rescales |t| freely but fixes
    both signs, so t is normalized to +-1."""

    sign_outer: int
    sign_t: int
    kind = "parabolic"


@dataclass(frozen=True)
class Hyperbolic:
    """Conjugate to sign_outer times the boost [[cosh t, sinh t],
    [sinh t, cosh t]] with t > 0 (a boost and its inverse are conjugate,
    so the sign of t carries no information)."""

    sign_outer: int
    t: float
    kind = "hyperbolic"


Su11Class = Elliptic | Parabolic | Hyperbolic


def canonical_matrix(c: Su11Class) -> np.ndarray:
    if isinstance(c, Elliptic):
        return np.diag([cmath.exp(1j * c.s), cmath.exp(-1j * c.s)])
    if isinstance(c, Parabolic):
        t = float(c.sign_t)
        return c.sign_outer * np.array(
            [[1 + 1j * t, -1j * t], [1j * t, 1 - 1j * t]])
    if isinstance(c, Hyperbolic):
        ch, sh = math.cosh(c.t), math.sinh(c.t)
        return c.sign_outer * np.array([[ch, sh], [sh, ch]], dtype=complex)
    raise TypeError(f"not a conjugacy class: {c!r}")


def classify(A: np.ndarray, tol: float = 1e-9) -> Su11Class:
    """Conjugacy class of a matrix in SU(1,1).

    Raises ValueError if the matrix is not (numerically) a member.  The
    borderline |trace| = 2 is resolved within ``tol`` in favor of the
    parabolic type unless the matrix is within ``tol`` of a central
    element, which classifies as elliptic with s = 0 or pi.
    """
    A = np.asarray(A, dtype=complex)
    if not su11_membership(A, tol=max(tol, 1e-9)):
        form, det_defect = su11_residuals(A)
        raise ValueError(
            "matrix is not in SU(1,1): "
            f"form residual {form:.2e}, det defect {det_defect:.2e}")
    tr = np.trace(A).real

    if abs(abs(tr) - 2.0) <= tol:
        sign = 1 if tr > 0 else -1
        scale = max(1.0, float(np.abs(A).max()))
        if np.abs(A - sign * np.eye(2)).max() <= tol * scale:
            return Elliptic(0.0 if sign > 0 else math.pi)
        half = sign * A  # trace-normalized to +2
        sign_t = 1 if half[0, 0].imag >= 0 else -1
        return Parabolic(sign, sign_t)

    if abs(tr) < 2.0:
        # fixed point inside the disk corresponds to the eigenvector with
        # |first component| < |second component|; its eigenvalue is e^{-is}
        vals, vecs = np.linalg.eig(A)
        k = 0 if abs(vecs[0, 0]) < abs(vecs[1, 0]) else 1
        s = -cmath.phase(vals[k])
        return Elliptic(s)

    sign = 1 if tr > 0 else -1
    return Hyperbolic(sign, math.acosh(abs(tr) / 2.0))


def psu_representative(A: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    """The representative of {A, -A} with nonnegative real trace.

    A covered surface only sees the image of its monodromy in the quotient
    by the center, so reported matrices are normalized this way.  A trace
    of zero is resolved by requiring a nonnegative imaginary part of the
    upper left entry.
    """
    A = np.asarray(A, dtype=complex)
    tr = np.trace(A)
    scale = max(1.0, float(np.abs(A).max()))
    if tr.real < -tol * scale:
        return -A
    if abs(tr.real) <= tol * scale and A[0, 0].imag < 0:
        return -A
    return A


def _intertwiner_basis(At: np.ndarray, Ct: np.ndarray) -> list[np.ndarray]:
    """Two real matrices spanning {W : W @ At = Ct @ W} (numerically)."""
    L = np.zeros((4, 4))
    for i in range(2):
        for j in range(2):
            row = 2 * i + j
            for k in range(2):
                L[row, 2 * i + k] += At[k, j]
                L[row, 2 * k + j] -= Ct[i, k]
    _, _, vt = np.linalg.svd(L)
    return [vt[3].reshape(2, 2), vt[2].reshape(2, 2)]


def conjugate_to_canonical(
    A: np.ndarray, tol: float = 1e-9
) -> tuple[Su11Class, np.ndarray]:
    """Classify and return (class, P) with P @ A @ inv(P) canonical and
    P itself in SU(1,1).

    Works in the SL(2,R) frame where the matrices are real: the solutions
    of the intertwining equation form a real 2-plane, and the determinant
    does not vanish on all of it when the canonical target carries the
    correct signs, so a positive-determinant point can be normalized into
    the group.
    """
    c = classify(A, tol=tol)
    C = canonical_matrix(c)
    A = np.asarray(A, dtype=complex)

    if isinstance(c, Elliptic) and (c.s == 0.0 or c.s == math.pi):
        return c, np.eye(2, dtype=complex)

    At = np.real(su11_to_sl2r(A))
    Ct = np.real(su11_to_sl2r(C))
    U, V = _intertwiner_basis(At, Ct)

    candidates = [U, V]
    for t0 in (0.0, 1.0, -1.0, 2.0, -2.0, 0.5, -0.5):
        candidates.append(U + t0 * V)
    rng = np.random.default_rng(171)
    for _ in range(32):
        a, b = rng.normal(size=2)
        candidates.append(a * U + b * V)

    scale_c = max(1.0, float(np.abs(C).max()))
    best = None
    for W in candidates:
        d = float(np.linalg.det(W))
        norm2 = float(np.square(W).sum())
        if norm2 == 0 or d <= 1e-12 * norm2:
            continue
        W = W / math.sqrt(d)
        P = sl2r_to_su11(W)
        resid = float(np.abs(P @ A @ np.linalg.inv(P) - C).max()) / scale_c
        if best is None or resid < best[0]:
            best = (resid, P)
        if resid < 1e-8:
            return c, P
    if best is not None and best[0] < 1e-6:
        return c, best[1]
    raise ArithmeticError(
        f"could not build an SU(1,1) conjugator for class {c!r}")
