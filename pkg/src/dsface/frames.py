"""Null lifts of spacelike constant mean curvature 1 faces.

A face in the de Sitter quadric is produced from holomorphic data as
f = F e3 F* where the lift F solves

    dF = F [[g, -g^2], [1, -g]] omega

for a meromorphic function g (the secondary Gauss map) and a holomorphic
1-form omega.  Two constructions of F are provided:

* ``small_lift``: the closed-form lift from the two Gauss maps (the
  hyperbolic one and the secondary one), valid wherever both are
  unbranched.  Its determinant is identically 1.
* ``integrate_frame``: direct adaptive integration of the connection
  along a path, with the branch state of g and omega advanced in
  lockstep, for data given as (g, omega).

Everything returns expression trees from :mod:`dsface.expr`, so lifts
can be evaluated on grids with principal branches or continued along
paths with full branch tracking.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .expr import (
    ContinuedFn,
    Expr,
    SingularPathError,
    TwoDifferential,
    VAR_Z,
    add,
    compose,
    const,
    differentiate,
    div,
    mul,
    neg,
    power,
    schwarzian,
    sqrt,
    sub,
)

__all__ = [
    "FrameEntries",
    "SurfaceData",
    "connection_form",
    "small_lift",
    "dual_data",
    "maxface_integrand",
    "lorentz_square",
    "FrameResult",
    "integrate_frame",
]


# a 2x2 matrix of expression trees, row major
FrameEntries = tuple[Expr, Expr, Expr, Expr]


def connection_form(g: Expr, omega: Expr) -> FrameEntries:
    """Entries of [[g, -g^2], [1, -g]] * omega, the right logarithmic
    derivative of the null lift."""
    return (
        mul(g, omega),
        neg(mul(mul(g, g), omega)),
        omega,
        neg(mul(g, omega)),
    )


def small_lift(hyperbolic_gauss: Expr, secondary_gauss: Expr) -> FrameEntries:
    """Closed-form null lift from the two Gauss maps.

    With G the hyperbolic and g the secondary Gauss map, set
    a = sqrt(dG/dg), b = -g a; the lift is

        F = [[G da/dG - a, G db/dG - b], [da/dG, db/dG]]

    and det F = a^2 dg/dG = 1 identically.  The corresponding 1-form is
    omega = Q / dg where Q is the common Hopf differential.  Subtrees
    are shared between the entries and their derivatives, so continuing
    all four entries along one path keeps a consistent branch choice.
    """
    G, g = hyperbolic_gauss, secondary_gauss
    dG, dg = differentiate(G), differentiate(g)
    a = sqrt(div(dG, dg))
    b = neg(mul(g, a))
    a_G = div(differentiate(a), dG)
    b_G = div(differentiate(b), dG)
    return (
        sub(mul(G, a_G), a),
        sub(mul(G, b_G), b),
        a_G,
        b_G,
    )


def dual_data(g: Expr, omega: Expr) -> tuple[Expr, Expr]:
    """Data (1/g, -g^2 omega) of the lift i F e1.

    Conjugating the connection by e1 = [[0,1],[1,0]] swaps the roles of
    the two columns; the resulting surface is the antipodal image
    -f = (iFe1) e3 (iFe1)*.
    """
    return div(const(1), g), neg(mul(mul(g, g), omega))


def maxface_integrand(g: Expr, omega: Expr) -> tuple[Expr, Expr, Expr]:
    """Component integrands (-2g, 1+g^2, i(1-g^2)) omega of the null
    curve whose real part is the associated maximal surface in
    Lorentz 3-space.  The tangent is null for ``lorentz_square``."""
    gg = mul(g, g)
    return (
        mul(const(-2), mul(g, omega)),
        mul(add(const(1), gg), omega),
        mul(const(1j), mul(sub(const(1), gg), omega)),
    )


def lorentz_square(v) -> complex:
    """Bilinear square -v0^2 + v1^2 + v2^2 (no conjugation) of a complex
    3-vector; the null-curve integrand has square zero."""
    v0, v1, v2 = v
    return -v0 * v0 + v1 * v1 + v2 * v2


# ---------------------------------------------------------------------------
# frame integration for (g, omega) data


@dataclass
class FrameResult:
    """Outcome of a path integration of the lift."""

    frame: np.ndarray
    det_drift: float
    steps: int
    gauss_fn: ContinuedFn
    omega_fn: ContinuedFn


# Dormand-Prince 5(4) tableau
_C = (0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0)
_A = (
    (),
    (1 / 5,),
    (3 / 40, 9 / 40),
    (44 / 45, -56 / 15, 32 / 9),
    (19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729),
    (9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656),
    (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84),
)
_B5 = (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0)
_B4 = (5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200,
       187 / 2100, 1 / 40)


def _connection_value(gv: complex, wv: complex) -> np.ndarray:
    return np.array([[gv * wv, -gv * gv * wv], [wv, -gv * wv]])


def integrate_frame(
    g: Expr,
    omega: Expr,
    waypoints,
    frame_start: np.ndarray | None = None,
    rel_tol: float = 1e-10,
    max_steps: int = 100_000,
    gauss_fn: ContinuedFn | None = None,
    omega_fn: ContinuedFn | None = None,
) -> FrameResult:
    """Integrate dF = F [[g, -g^2],[1, -g]] omega along a polyline.

    ``waypoints`` is a sequence of complex points; integration starts at
    the first with ``frame_start`` (identity by default) and proceeds
    segment by segment with adaptive Dormand-Prince 5(4) steps.  The
    branch state of g and omega advances with each accepted step, so
    multivalued data is followed around loops correctly.  Trackers from
    an earlier integration can be passed as ``gauss_fn``/``omega_fn`` to
    resume their branch sheet; they must sit at the first waypoint and
    are advanced in place.

    The connection is trace free, so det F is a constant of motion; its
    relative drift is monitored and returned, never corrected.  Raises
    SingularPathError if the path runs into a pole or branch point and
    ArithmeticError if the step budget is exhausted.
    """
    pts = [complex(w) for w in waypoints]
    if len(pts) < 2:
        raise ValueError("need at least two waypoints")
    F = np.eye(2, dtype=complex) if frame_start is None else \
        np.asarray(frame_start, dtype=complex).copy()
    det0 = complex(np.linalg.det(F))
    det_scale = max(1.0, abs(det0))

    g_fn = ContinuedFn(g, pts[0]) if gauss_fn is None else gauss_fn
    w_fn = ContinuedFn(omega, pts[0]) if omega_fn is None else omega_fn
    for fn in (g_fn, w_fn):
        if fn.z != pts[0]:
            raise ValueError(
                "resumed branch tracker is not at the path start")
    steps = 0
    drift = 0.0

    for a_pt, b_pt in zip(pts[:-1], pts[1:]):
        seg = b_pt - a_pt
        length = abs(seg)
        if length == 0:
            continue
        u = seg / length
        s = 0.0
        h = length / 16.0
        while s < length:
            if length - s <= 1e-13 * length:
                break  # roundoff remainder of the accumulated steps
            h = min(h, length - s)
            if h < 1e-14 * max(1.0, length):
                raise SingularPathError(
                    f"step size underflow near z = {a_pt + s * u}")
            z_base = a_pt + s * u
            k = []
            for i in range(7):
                zi = z_base + _C[i] * h * u
                Fi = F.copy()
                for j, aij in enumerate(_A[i]):
                    if aij:
                        Fi = Fi + (h * u * aij) * k[j]
                eta = _connection_value(g_fn.value_at(zi),
                                        w_fn.value_at(zi))
                k.append(Fi @ eta)
            F5 = F.copy()
            F4 = F.copy()
            for i in range(7):
                if _B5[i]:
                    F5 = F5 + (h * u * _B5[i]) * k[i]
                if _B4[i]:
                    F4 = F4 + (h * u * _B4[i]) * k[i]
            scale = max(1.0, float(np.abs(F5).max()))
            err = float(np.abs(F5 - F4).max()) / scale
            if err <= rel_tol:
                F = F5
                s += h
                g_fn.advance(a_pt + s * u)
                w_fn.advance(a_pt + s * u)
                drift = max(drift, abs(np.linalg.det(F) - det0) / det_scale)
                steps += 1
                if steps > max_steps:
                    raise ArithmeticError(
                        f"frame integration exceeded {max_steps} steps")
            factor = 0.9 * (rel_tol / (err + 1e-300)) ** 0.2
            h *= min(5.0, max(0.2, factor))
        # land the trackers exactly on the waypoint so a follow-up
        # integration can resume them (a_pt + length*u is an ulp off)
        g_fn.advance(b_pt)
        w_fn.advance(b_pt)

    return FrameResult(F, drift, steps, g_fn, w_fn)


# ---------------------------------------------------------------------------
# data container


@dataclass(frozen=True)
class SurfaceData:
    """Holomorphic input data for one face, in one of three packagings.

    * both Gauss maps ("gauss-pair"): the lift is the closed form from
      ``small_lift`` and omega = Q / dg with Q the Hopf differential
      (S(g) - S(G))/2 dz^2;
    * secondary Gauss map and 1-form ("gauss-omega"): no closed-form
      lift, frames come from ``integrate_frame``;
    * an explicit lift ("frame"): g, omega and the hyperbolic Gauss map
      are read off the logarithmic derivative F^{-1} dF and the column
      derivative ratio dF11/dF21.

    ``omega`` always stores the coefficient of the form against dz.
    """

    variant: str  # "gauss-pair" | "gauss-omega" | "frame"
    hyperbolic_gauss: Expr | None
    secondary_gauss: Expr
    omega: Expr
    lift: FrameEntries | None

    @classmethod
    def from_gauss_pair(cls, hyperbolic_gauss: Expr,
                        secondary_gauss: Expr) -> "SurfaceData":
        G, g = hyperbolic_gauss, secondary_gauss
        qhat = mul(const(0.5), sub(schwarzian(g), schwarzian(G)))
        omega = div(qhat, differentiate(g))
        return cls("gauss-pair", G, g, omega, small_lift(G, g))

    @classmethod
    def from_secondary(cls, secondary_gauss: Expr,
                       omega: Expr) -> "SurfaceData":
        return cls("gauss-omega", None, secondary_gauss, omega, None)

    @classmethod
    def from_lift(cls, entries: FrameEntries) -> "SurfaceData":
        f11, f12, f21, f22 = entries
        d11, d21 = differentiate(f11), differentiate(f21)
        # eta = F^{-1} dF with det F = 1: g = eta11/eta21, omega = eta21
        eta11 = sub(mul(f22, d11), mul(f12, d21))
        eta21 = sub(mul(f11, d21), mul(f21, d11))
        return cls("frame", div(d11, d21), div(eta11, eta21), eta21,
                   entries)

    def hopf(self) -> TwoDifferential:
        """The Hopf differential Q = omega dg as a 2-differential."""
        return TwoDifferential(
            mul(self.omega, differentiate(self.secondary_gauss)))

    def localized(self, puncture) -> "SurfaceData":
        """The same data in a chart centered on the puncture (z = 0
        there); pass the infinite puncture as algebra.INF.  Loops and
        order counts at the puncture then read counterclockwise
        around 0."""
        from .algebra import is_inf

        if is_inf(puncture):
            chart = div(const(1), VAR_Z)
            jac = neg(power(VAR_Z, -2))
        else:
            p = complex(puncture)
            if p == 0:
                return self
            chart = add(VAR_Z, const(p))
            jac = const(1)
        if self.variant == "gauss-pair":
            return SurfaceData.from_gauss_pair(
                compose(self.hyperbolic_gauss, chart),
                compose(self.secondary_gauss, chart))
        if self.variant == "frame":
            return SurfaceData.from_lift(
                tuple(compose(e, chart) for e in self.lift))
        return SurfaceData.from_secondary(
            compose(self.secondary_gauss, chart),
            mul(compose(self.omega, chart), jac))
