"""Degree-count audit for faces with finitely many regular ends.

On a genus-h compact surface with n points removed, a face whose
hyperbolic Gauss map G extends meromorphically satisfies, under
completeness hypotheses, the topological degree bound

    2 deg G >= -chi + 2 n,        chi = 2 - 2 h,

with equality exactly when every end is embedded.  The bound has a
pointwise shadow at each end: the local multiplicity m of G obeys
m >= ord Q + 3 against the pole order of the Hopf differential, and an
embedded end winds exactly once around the vertical axis of the
stereographic chart.  This module audits all three layers: the global
count from (deg G, genus, n), the per-end order balance from a
classified end report, and the loop winding measured directly on the
face.  A failed bound is reported as a verdict, never raised: it is
evidence that a completeness or regularity hypothesis fails (the
3-ended deformation families do exactly this), which is precisely what
an audit should surface.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np

from .algebra import E3
from .expr import (
    ContinuedFn,
    Expr,
    NotRationalError,
    const,
    differentiate,
    eval_principal,
    rational_degree,
    sub,
)
from .frames import SurfaceData, integrate_frame
from .monodromy import EndReport

__all__ = [
    "EndAudit",
    "GlobalReport",
    "osserman_check",
    "local_order_check",
    "audit_end",
    "winding_number",
    "gauss_degree",
]


@dataclass(frozen=True)
class EndAudit:
    """Per-end entry of a GlobalReport.

    ``local_status`` is the outcome of the order balance m >= ord Q + 3
    ("equality" | "strict" | "violated", or "unknown" when the
    classification could not pin the orders down); ``winding`` is the
    measured loop winding when one was requested, else None.
    """

    puncture: complex
    ord_q: int | None
    ramification: int | None
    local_status: str
    winding: int | None


@dataclass(frozen=True)
class GlobalReport:
    """Outcome of the global degree-count audit.

    ``lhs`` is twice the degree of the hyperbolic Gauss map, ``rhs``
    the topological demand -chi + 2 n; the verdict compares them.
    ``ends`` optionally carries the per-end audits that back the count.
    """

    deg_gauss: int
    genus: int
    euler_char: int
    n_ends: int
    lhs: int
    rhs: int
    verdict: str  # equality | strict | violated
    ends: tuple[EndAudit, ...] = ()


def osserman_check(deg_gauss: int, genus: int, n_ends: int,
                   ends: tuple[EndAudit, ...] = ()) -> GlobalReport:
    """Audit the degree bound 2 deg G >= -chi + 2 n.

    Verdicts: "equality" when the count is tight (every end embedded
    and unbranched), "strict" when the bound holds with slack, and
    "violated" when the degree falls short of the topological demand.
    A violation is information, not an error: it flags that the face
    cannot be complete with regular ends.
    """
    for name, value, floor in (("deg_gauss", deg_gauss, 0),
                               ("genus", genus, 0),
                               ("n_ends", n_ends, 1)):
        if not isinstance(value, (int, np.integer)) or value < floor:
            raise ValueError(f"{name} must be an integer >= {floor}, "
                             f"got {value!r}")
    chi = 2 - 2 * genus
    lhs = 2 * deg_gauss
    rhs = -chi + 2 * n_ends
    if lhs == rhs:
        verdict = "equality"
    elif lhs > rhs:
        verdict = "strict"
    else:
        verdict = "violated"
    return GlobalReport(int(deg_gauss), int(genus), chi, int(n_ends),
                        lhs, rhs, verdict, tuple(ends))


def local_order_check(end) -> str:
    """Status of the order balance m >= ord Q + 3 at one end.

    ``end`` needs attributes ``ord_q`` (order of the Hopf differential
    at the puncture, poles negative) and ``ramification`` (local
    multiplicity m of the hyperbolic Gauss map); a classified EndReport
    fits.  Raises ValueError when either is missing, meaning the
    classification could not determine it.
    """
    ord_q = getattr(end, "ord_q", None)
    m = getattr(end, "ramification", None)
    if ord_q is None or m is None:
        raise ValueError(
            "end report lacks ord_q or ramification; cannot audit the "
            "order balance m >= ord Q + 3")
    bound = ord_q + 3
    if m == bound:
        return "equality"
    return "strict" if m > bound else "violated"


def audit_end(data: SurfaceData, end: EndReport,
              winding_radius: float | None = None,
              samples: int = 512) -> EndAudit:
    """Bundle one classified end into a GlobalReport entry.

    Runs the local order balance (recording "unknown" instead of
    raising when the report lacks the orders) and, when a radius is
    given, measures the loop winding there.
    """
    try:
        status = local_order_check(end)
    except ValueError:
        status = "unknown"
    winding = None
    if winding_radius is not None:
        winding = winding_number(data, end.puncture, winding_radius,
                                 samples=samples)
    return EndAudit(end.puncture, end.ord_q, end.ramification, status,
                    winding)


# ---------------------------------------------------------------------------
# loop winding


def winding_number(
    data: SurfaceData,
    puncture,
    radius: float,
    samples: int = 512,
    frame_start: np.ndarray | None = None,
    axis_tol: float = 1e-9,
) -> int:
    """Winding of the horizontal part of the face around an end.

    The face f = F e3 F^* is evaluated around the circle of ``radius``
    in a chart centered on the puncture.  In the stereographic chart
    the horizontal component X1 + i X2 has the same argument as the
    off-diagonal Hermitian entry f01 (the chart only rescales by the
    positive factor 1/(1 + x0)), so the winding is the accumulated
    argument of f01 over the loop divided by 2 pi.

    The winding is measured about the vertical chart axis, which meets
    the ideal boundary at the directions with hyperbolic Gauss value 0
    and infinity; it detects embeddedness only when the end's own limit
    lies on it.  When the data carries the hyperbolic Gauss map, its
    limit c at the puncture is estimated and, for finite nonzero c, the
    face is moved by the rigid motion translating c to 0 first (the
    Gauss pair (G - c, g) cuts out exactly the translated face).

    A regular end limits along a lightlike direction, which always has
    a nonzero time component, so near the puncture the face sits
    entirely in x0 > 1 or entirely in x0 < -1.  The chart itself needs
    x0 > 1; a loop in the lower half is audited through the time
    reversal f -> -f (the lift transform F -> i F e1), which carries it
    into the chart and negates the horizontal part -- leaving the
    argument accumulation, hence the winding, unchanged.  Ends at
    Gauss value infinity wrap the axis with the opposite orientation,
    so an embedded end measures -1 there; it is the absolute value
    that is chart-independent.

    Checked preconditions: the radius is positive and finite, the loop
    stays on one side (every point x0 > 1 or every point x0 < -1), and
    the horizontal part stays away from the vertical axis.  A
    non-integral accumulation raises too: it means the face does not
    close around the puncture (monodromy not in SU(1,1)) or the loop
    is undersampled.  For (g, omega) data the frame integrates from
    ``frame_start`` (identity by default) at the loop's base point;
    left translations move the chart axis, so in that packaging the
    winding belongs to the face cut out by the initial condition, not
    to the data alone.
    """
    if not (isinstance(radius, (int, float)) and math.isfinite(radius)
            and radius > 0):
        raise ValueError(f"loop radius must be positive and finite, "
                         f"got {radius!r}")
    local = _recentered(data.localized(puncture))
    pts = [radius * cmath.exp(2j * math.pi * k / samples)
           for k in range(samples + 1)]
    horizontal = np.empty(samples + 1, dtype=complex)
    x0 = np.empty(samples + 1)
    for k, frame in enumerate(_loop_frames(local, pts, frame_start)):
        f = frame @ E3 @ frame.conj().T
        x0[k] = (f[0, 0] + f[1, 1]).real / 2
        horizontal[k] = f[0, 1]
    if not np.all(np.isfinite(x0)):
        raise ValueError("face evaluation failed on the loop "
                         "(non-finite frame entries)")
    if np.min(x0) <= 1.0 and not np.max(x0) < -1.0:
        raise ValueError(
            "loop leaves the stereographic chart: x0 range "
            f"[{np.min(x0):.6g}, {np.max(x0):.6g}] is neither above 1 "
            "nor below -1; shrink the radius toward the end")
    scale = float(np.max(np.abs(horizontal)))
    if scale == 0.0 or float(np.min(np.abs(horizontal))) < axis_tol * scale:
        raise ValueError(
            "loop passes through the vertical axis (X1 + i X2 "
            "vanishes); the winding is undefined there")
    turns = float(np.sum(np.angle(horizontal[1:] / horizontal[:-1])))
    turns /= 2 * math.pi
    nearest = round(turns)
    if abs(turns - nearest) > 0.02:
        raise ValueError(
            f"argument accumulation {turns:.4f} around the loop is not "
            "an integer; the face does not close around this puncture "
            "or the loop is undersampled")
    return int(nearest)


def _recentered(local: SurfaceData) -> SurfaceData:
    """Translate the end's Gauss limit onto the chart axis.

    Estimates c = lim G at the puncture (0 in the local chart) and,
    when c is finite and nonzero, rebuilds the data from the pair
    (G - c, g) -- the face moved by the rigid motion that carries the
    end's ideal limit to Gauss value 0.  Limits at 0 or infinity are
    already on the axis; (g, omega) data has no Gauss map to recenter
    and is returned as-is.
    """
    gauss = local.hyperbolic_gauss
    if gauss is None:
        return local
    try:
        c = complex(eval_principal(gauss, 0.0))
    except (ValueError, ZeroDivisionError, OverflowError):
        # branch point or pole at the puncture: estimate from a tiny
        # circle, using the magnitude median to tell poles from zeros
        # (a circle mean averages a pole's phases away to zero)
        fn = ContinuedFn(gauss, 1e-6)
        vals = [fn.advance(1e-6 * cmath.exp(2j * math.pi * k / 16))
                for k in range(1, 17)]
        mags = sorted(abs(v) for v in vals)
        if mags[8] > 1e6 or not all(cmath.isfinite(v) for v in vals):
            return local  # pole: the limit is infinity, on the axis
        c = sum(vals) / len(vals)
    if not cmath.isfinite(c) or abs(c) > 1e6 or abs(c) < 1e-12:
        return local
    return SurfaceData.from_gauss_pair(
        sub(gauss, const(c)), local.secondary_gauss)


def _loop_frames(local: SurfaceData, pts, frame_start):
    """Frames at each loop vertex, branch- or ODE-continued in order."""
    if local.lift is not None:
        if frame_start is not None:
            raise ValueError(
                "frame_start applies only to (g, omega) data; lift "
                "data carries its own frame")
        fns = [ContinuedFn(e, pts[0]) for e in local.lift]
        out = []
        for z in pts:
            vals = [fn.advance(z) for fn in fns]
            out.append(np.array([[vals[0], vals[1]], [vals[2], vals[3]]]))
        return out
    frame = (np.eye(2, dtype=complex) if frame_start is None
             else np.asarray(frame_start, dtype=complex))
    out = [frame]
    res = None
    for a, b in zip(pts[:-1], pts[1:]):
        res = integrate_frame(
            local.secondary_gauss, local.omega, [a, b],
            frame_start=out[-1],
            gauss_fn=None if res is None else res.gauss_fn,
            omega_fn=None if res is None else res.omega_fn)
        out.append(res.frame)
    return out


# ---------------------------------------------------------------------------
# degree of the hyperbolic Gauss map


def gauss_degree(gauss: Expr, seed: int = 7, starts: int = 96,
                 newton_steps: int = 60) -> int:
    """Topological degree of the hyperbolic Gauss map.

    Rational expressions are measured exactly: the maximum of numerator
    and denominator degree after cancelling common roots.  Expressions
    the rational normalizer cannot digest (logarithms, roots) are
    counted numerically instead: Newton iteration from a spread of
    seeded starting points collects the distinct preimages of two
    random target values, and both counts must agree.  The numeric
    route presumes the map is actually single-valued (a face that
    descends); principal-branch evaluation is used throughout.
    """
    try:
        return rational_degree(gauss)
    except NotRationalError:
        pass
    rng = np.random.default_rng(seed)
    deriv = differentiate(gauss)
    counts = []
    targets = []
    for _ in range(2):
        shift = rng.normal(0.0, 0.7, 2)
        target = complex(shift[0] + 0.3, shift[1] + 0.2)
        targets.append(target)
        counts.append(_preimage_count(gauss, deriv, target, rng, starts,
                                      newton_steps))
    if counts[0] != counts[1]:
        raise ValueError(
            f"preimage counts of {targets[0]:.3f} and {targets[1]:.3f} "
            f"disagree ({counts[0]} vs {counts[1]}); the map does not "
            "look like a fixed finite degree at this resolution")
    return counts[0]


def _preimage_count(gauss, deriv, target, rng, starts, newton_steps):
    """Distinct Newton roots of gauss(z) = target from seeded starts."""
    roots: list[complex] = []
    radii = (0.3, 1.0, 3.0, 10.0, 30.0)
    per_ring = max(1, starts // len(radii))
    for radius in radii:
        for k in range(per_ring):
            angle = 2 * math.pi * (k + rng.uniform(0, 1)) / per_ring
            z = radius * cmath.exp(1j * angle)
            z = _newton(gauss, deriv, target, z, newton_steps)
            if z is None:
                continue
            if not any(abs(z - r) <= 1e-6 * max(1.0, abs(r))
                       for r in roots):
                roots.append(z)
    return len(roots)


def _newton(gauss, deriv, target, z, steps):
    for _ in range(steps):
        try:
            num = eval_principal(gauss, z) - target
            den = eval_principal(deriv, z)
        except (ValueError, ZeroDivisionError, OverflowError):
            return None
        if den == 0 or not (cmath.isfinite(num) and cmath.isfinite(den)):
            return None
        step = num / den
        z = z - step
        if abs(z) > 1e9:
            return None
        if abs(step) <= 1e-12 * max(1.0, abs(z)):
            try:
                if abs(eval_principal(gauss, z) - target) <= 1e-8 * (
                        1.0 + abs(target)):
                    return z
            except (ValueError, ZeroDivisionError, OverflowError):
                return None
            return None
    return None
