"""Loop monodromy and end classification.

Around a puncture the null lift changes by a constant right factor,
F -> F M, and the secondary Gauss map by the inverse Mobius action,
g -> M^{-1} * g.  The face descends to the punctured neighborhood
exactly when M lies in SU(1,1), and the conjugacy type of M (elliptic,
parabolic or hyperbolic) governs the shape of the end and of the
singular set |g| = 1 near it.

Monodromy is computed on two routes depending on the data packaging:
closed-form lifts (from a Gauss map pair or explicit frame entries) are
continued around the loop with branch tracking, while (g, omega) data
integrates the frame equation.  Both routes rerun at a different
resolution and report the disagreement as ``check_residual``.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np

from .algebra import su11_residuals
from .expr import (
    Add,
    Const,
    ContinuedFn,
    Div,
    Exp,
    Expr,
    Log,
    Mul,
    Neg,
    Pow,
    Sub,
    Var,
    add,
    const,
    differentiate,
    div,
    eval_principal,
    log as elog,
    mul,
    multivalued_nodes,
    pole_order_at,
    power,
    schwarzian,
    sub,
    VAR_Z,
)
from .frames import SurfaceData, integrate_frame
from .su11 import (
    Elliptic,
    Hyperbolic,
    Parabolic,
    Su11Class,
    classify,
    conjugate_to_canonical,
    psu_representative,
    _R,
)

__all__ = [
    "MonodromyResult",
    "loop_monodromy",
    "IndicialData",
    "indicial_data",
    "Sectors",
    "EveryRay",
    "EndReport",
    "end_classify",
    "CompletenessReport",
    "completeness_probe",
]


@dataclass
class MonodromyResult:
    """Right monodromy factor of the lift around one loop.

    ``matrix`` is the continued factor as computed; ``normalized`` is the
    projective representative with nonnegative real trace (the covered
    face only determines the factor up to sign).  ``descends`` records
    SU(1,1) membership of the factor at the given tolerance; the two
    residuals are scale-normalized as in :func:`algebra.su11_residuals`.
    """

    matrix: np.ndarray
    normalized: np.ndarray
    form_residual: float
    det_residual: float
    descends: bool
    route: str
    check_residual: float


def _circle(center: complex, radius: float, steps: int, base_angle: float):
    return [center + radius * cmath.exp(1j * (base_angle + 2 * math.pi * k / steps))
            for k in range(steps + 1)]


def _closed_form_loop(lift, loop) -> np.ndarray:
    fns = [ContinuedFn(e, loop[0]) for e in lift]
    start = np.array([[fns[0].value, fns[1].value],
                      [fns[2].value, fns[3].value]])
    for z in loop[1:]:
        for fn in fns:
            fn.advance(z)
    end = np.array([[fns[0].value, fns[1].value],
                    [fns[2].value, fns[3].value]])
    return np.linalg.solve(start, end)


def _has_var(e: Expr) -> bool:
    if isinstance(e, Var):
        return True
    if isinstance(e, (Neg, Log, Exp)):
        return _has_var(e.arg)
    if isinstance(e, (Add, Sub, Mul, Div)):
        return _has_var(e.left) or _has_var(e.right)
    if isinstance(e, Pow):
        return _has_var(e.base)
    return False


def _frac_combine(p, q):
    # product of two linear coefficient pairs, quadratic term kept
    return (p[0] * q[0], p[0] * q[1] + p[1] * q[0], p[1] * q[1])


def _frac_trim(c):
    scale = max(abs(c[0]), abs(c[1]), abs(c[2]))
    if scale == 0.0 or abs(c[2]) > 1e-12 * scale:
        return None
    return (c[0], c[1])


def _linear_fraction(e: Expr, core: Expr):
    """(num, den) linear coefficient pairs with e = (n0 + n1 W)/(d0 + d1 W)
    where W is the core subexpression, or None when e is not of that
    shape.  Subtrees free of z count as constants."""
    if e == core:
        return ((0j, 1 + 0j), (1 + 0j, 0j))
    if not _has_var(e):
        v = complex(eval_principal(e, 0.7390851 - 0.3102683j))
        if not np.isfinite(v):
            return None
        return ((v, 0j), (1 + 0j, 0j))
    if isinstance(e, Neg):
        f = _linear_fraction(e.arg, core)
        if f is None:
            return None
        (n0, n1), d = f
        return ((-n0, -n1), d)
    if isinstance(e, (Add, Sub)):
        f1 = _linear_fraction(e.left, core)
        f2 = _linear_fraction(e.right, core)
        if f1 is None or f2 is None:
            return None
        sgn = -1 if isinstance(e, Sub) else 1
        a = _frac_combine(f1[0], f2[1])
        b = _frac_combine(f2[0], f1[1])
        num = _frac_trim(tuple(x + sgn * y for x, y in zip(a, b)))
        den = _frac_trim(_frac_combine(f1[1], f2[1]))
        return None if num is None or den is None else (num, den)
    if isinstance(e, (Mul, Div)):
        f1 = _linear_fraction(e.left, core)
        f2 = _linear_fraction(e.right, core)
        if f1 is None or f2 is None:
            return None
        if isinstance(e, Div):
            f2 = (f2[1], f2[0])
        num = _frac_trim(_frac_combine(f1[0], f2[0]))
        den = _frac_trim(_frac_combine(f1[1], f2[1]))
        return None if num is None or den is None else (num, den)
    if isinstance(e, Pow) and e.integer_exponent:
        k = int(e.exponent.real)
        f = _linear_fraction(e.base, core)
        if f is None:
            return None
        if k < 0:
            f, k = (f[1], f[0]), -k
        out = ((1 + 0j, 0j), (1 + 0j, 0j))
        for _ in range(min(k, 8)):
            num = _frac_trim(_frac_combine(out[0], f[0]))
            den = _frac_trim(_frac_combine(out[1], f[1]))
            if num is None or den is None:
                return None
            out = (num, den)
        return out if k <= 8 else None
    return None


def _loop_winding(base: Expr, center: complex, radius: float,
                  base_angle: float) -> int | None:
    """Winding number of a single-valued expression along the loop."""
    pts = np.array(_circle(center, radius, 1024, base_angle))
    vals = eval_principal(base, pts)
    if not np.all(np.isfinite(vals)) or np.any(vals == 0):
        return None
    turns = np.angle(vals[1:] / vals[:-1])
    if np.abs(turns).max() > 2.5:
        return None
    k = float(np.sum(turns) / (2 * np.pi))
    if abs(k - round(k)) > 1e-3:
        return None
    return int(round(k))


def _equivariance_residual(data: SurfaceData, M: np.ndarray, center: complex,
                           radius: float, base_angle: float) -> float:
    """How well (g, omega) actually transform under the claimed factor.

    Both are continued once around the loop from two base points; g must
    come back as the inverse Mobius action of M and omega must pick up
    the compensating factor (a - c g)^2 of the induced gauge change.
    """
    a, c, d = M[0, 0], M[1, 0], M[1, 1]
    # adjugate inverse: M has unit determinant, and forming the numeric
    # determinant of a strongly hyperbolic factor loses all precision
    Minv = np.array([[M[1, 1], -M[0, 1]], [-M[1, 0], M[0, 0]]])
    # a strong boost stores entries ~e^t whose relevant differences sit
    # ~e^{-t} below them, far under float64 resolution, so comparisons
    # anchored near its fixed points measure nothing but roundoff; each
    # comparison is used only where its cancellation factor is benign
    cond_cap = 1e8
    scores = []
    for phase in (0.9, 1.7, 3.7, 5.3):
        loop = _circle(center, radius, 256, base_angle + phase)
        fg = ContinuedFn(data.secondary_gauss, loop[0])
        fw = ContinuedFn(data.omega, loop[0])
        g0, w0 = fg.value, fw.value
        for p in loop[1:]:
            fg.advance(p)
            fw.advance(p)
        g1, w1 = fg.value, fw.value
        point = []
        num = Minv[0, 0] * g0 + Minv[0, 1]
        den = Minv[1, 0] * g0 + Minv[1, 1]
        big = abs(Minv[0, 0] * g0) + abs(Minv[0, 1]) + \
            abs(Minv[1, 0] * g0) + abs(Minv[1, 1])
        small = max(abs(num), abs(den))
        if small > 0 and np.isfinite(big) and big / small < cond_cap \
                and den != 0:
            g_expect = num / den
            point.append(abs(g1 - g_expect) / max(1.0, abs(g_expect)))
        if w0 != 0 and w1 != 0 and np.isfinite(w0) and np.isfinite(w1):
            ratio_fwd = (a - c * g0) ** 2
            if abs(ratio_fwd) > 0 and \
                    (abs(a) + abs(c * g0)) ** 2 / abs(ratio_fwd) < cond_cap:
                point.append(abs(w1 / w0 - ratio_fwd) /
                             max(1.0, abs(ratio_fwd)))
            else:
                ratio_bwd = (d + c * g1) ** 2
                if abs(ratio_bwd) > 0 and \
                        (abs(d) + abs(c * g1)) ** 2 / abs(ratio_bwd) \
                        < cond_cap:
                    point.append(abs(w0 / w1 - ratio_bwd) /
                                 max(1.0, abs(ratio_bwd)))
        if point:
            scores.append(max(float(x) for x in point))
    if not scores:
        return math.inf
    return max(scores)


def _symbolic_loop_factor(g: Expr, center: complex, radius: float,
                          base_angle: float) -> np.ndarray | None:
    """Monodromy of the developing map read off the expression shape.

    When g is a Mobius function of one multivalued core (a fractional
    power or a log), continuing once around the loop multiplies or
    shifts the core by an exactly known amount, so the induced Mobius
    transformation T with g -> T * g is exact no matter how extreme the
    distortion.  Returns the unit determinant matrix of T^{-1} (the
    monodromy factor up to sign), or None when the shape does not apply.
    The determinant is kept at 1 analytically: for a strong boost,
    normalizing the conjugated product numerically would cancel to zero.
    """
    cores: list[Expr] = []
    for node in multivalued_nodes(g):
        if not any(node == c for c in cores):
            cores.append(node)
    if not cores:
        return np.eye(2, dtype=complex)
    if len(cores) > 1:
        return None
    core = cores[0]
    base = core.arg if isinstance(core, Log) else core.base
    if multivalued_nodes(base):
        return None
    k = _loop_winding(base, center, radius, base_angle)
    if k is None:
        return None
    frac = _linear_fraction(g, core)
    if frac is None:
        return None
    (n0, n1), (d0, d1) = frac
    H = np.array([[n1, n0], [d1, d0]])
    scale = max(abs(n0), abs(n1), abs(d0), abs(d1))
    if abs(np.linalg.det(H)) <= 1e-12 * scale ** 2:
        return None
    if isinstance(core, Log):
        Dinv = np.array([[1.0, -2j * np.pi * k], [0.0, 1.0]], dtype=complex)
    else:
        lam_half = cmath.exp(1j * math.pi * core.exponent * k)
        Dinv = np.array([[1.0 / lam_half, 0.0], [0.0, lam_half]],
                        dtype=complex)
    return H @ Dinv @ np.linalg.inv(H)


def loop_monodromy(
    data: SurfaceData,
    center: complex = 0.0,
    radius: float = 0.5,
    base_angle: float = 0.0,
    steps: int | None = None,
    tol: float = 1e-6,
    frame_start: np.ndarray | None = None,
    route: str = "auto",
) -> MonodromyResult:
    """Monodromy factor for the counterclockwise circle around ``center``.

    The circle must stay inside the domain of the data (no poles of g or
    omega on it).  ``steps`` is the waypoint count of the polygonal loop:
    closed-form routes default to 1024 (values are exact, the polygon
    only drives branch tracking), the integration route to 64 corners
    with the adaptive stepper doing the work in between.

    ``route`` picks how the factor is computed: "closed-form" continues
    an explicit lift around the loop, "symbolic" transports the exactly
    known branch jump of the developing map's multivalued core (the only
    workable option when the frame equation is too stiff to integrate,
    as with strongly hyperbolic data), "ode" integrates the frame
    equation, and "auto" tries them in that order.  The symbolic route
    determines the factor only up to sign, so ``matrix`` equals
    ``normalized`` there, and its ``check_residual`` measures how well
    (g, omega) actually transform under the claimed factor.
    """
    if route not in ("auto", "closed-form", "ode", "symbolic"):
        raise ValueError(f"unknown route {route!r}")
    if route == "closed-form" and data.lift is None:
        raise ValueError("data has no closed-form lift")

    if data.lift is not None and route in ("auto", "closed-form"):
        n = 1024 if steps is None else steps
        loop = _circle(center, radius, n, base_angle)
        M = _closed_form_loop(data.lift, loop)
        M_check = _closed_form_loop(
            data.lift, _circle(center, radius, max(8, n // 2), base_angle))
        route = "closed-form"
    elif route in ("auto", "symbolic"):
        sym = _symbolic_loop_factor(data.secondary_gauss, center, radius,
                                    base_angle)
        if sym is None and route == "symbolic":
            raise ArithmeticError(
                "developing map is not a Mobius function of a single "
                "multivalued core; use the ode or closed-form route")
        if sym is not None:
            M = psu_representative(sym)
            form, det_defect = su11_residuals(M)
            check = _equivariance_residual(data, M, center, radius,
                                           base_angle)
            descends = form <= tol and det_defect <= tol and check <= tol
            return MonodromyResult(M, M, form, det_defect, descends,
                                   "symbolic", check)
        M, M_check, route = _ode_loop(data, center, radius, base_angle,
                                      steps, frame_start)
    else:
        M, M_check, route = _ode_loop(data, center, radius, base_angle,
                                      steps, frame_start)

    scale = max(1.0, float(np.abs(M).max()))
    check = float(np.abs(M - M_check).max()) / scale
    form, det_defect = su11_residuals(M)
    descends = form <= tol and det_defect <= tol
    return MonodromyResult(M, psu_representative(M), form, det_defect,
                           descends, route, check)


def _ode_loop(data, center, radius, base_angle, steps, frame_start):
    n = 64 if steps is None else steps
    loop = _circle(center, radius, n, base_angle)
    res = integrate_frame(data.secondary_gauss, data.omega, loop,
                          frame_start=frame_start, max_steps=4096)
    res2 = integrate_frame(data.secondary_gauss, data.omega, loop,
                           frame_start=frame_start, rel_tol=1e-10 / 16,
                           max_steps=8192)
    if frame_start is None:
        M, M_check = res.frame, res2.frame
    else:
        F0 = np.asarray(frame_start, dtype=complex)
        M = np.linalg.solve(F0, res.frame)
        M_check = np.linalg.solve(F0, res2.frame)
    return M, M_check, "ode"


# ---------------------------------------------------------------------------
# indicial analysis


@dataclass(frozen=True)
class IndicialData:
    """Frobenius data of the second order equation y'' + (S(g)/2) y = 0
    at a puncture with at most a double pole of S(g): with
    alpha = lim z^2 S(g), the indicial roots are (1 +- sqrt(1-2 alpha))/2
    and log terms can appear exactly when the root difference is an
    integer (the resonant case)."""

    alpha: complex
    roots: tuple[complex, complex]
    resonant: bool


def _circle_mean(e: Expr, radius: float, samples: int = 32) -> complex:
    zs = radius * np.exp(2j * np.pi * (np.arange(samples) + 0.318) / samples)
    vals = eval_principal(e, zs)
    return complex(np.mean(vals))


def indicial_data(data: SurfaceData, puncture, tol: float = 1e-8) -> IndicialData:
    """Indicial roots of the developing equation of the secondary Gauss
    map at a puncture (which must be at most a regular singularity).

    The double pole coefficient is the limit of z^2 S(g).  Circle means
    of that product equal the limit up to an even power series in the
    radius, so a Richardson step on a shrinking ladder of radii kills
    the quadratic term; the best consecutive pair wins.  Tiny radii
    alone are not reliable: evaluating S(g) can lose many digits to
    cancellation when g approaches its value at the puncture fast.
    """
    local = data.localized(puncture)
    s_expr = schwarzian(local.secondary_gauss)
    weighted = mul(power(VAR_Z, 2), s_expr)
    radii = [1e-2 * 2.0 ** (-k) for k in range(8)]
    means = []
    for r in radii:
        # branch-continued sampling: S(g) is single-valued, but principal
        # branch values of its raw derivative tree can lose many digits
        # when an inner power grows huge across the cut
        vals, defect = _continued_circle_values(weighted, r, 32)
        if not np.all(np.isfinite(vals)):
            raise ArithmeticError(f"cannot sample z^2 S(g) on circle r={r}")
        if defect > 1e-5 * max(1.0, float(np.abs(vals).max())):
            raise ArithmeticError(
                f"z^2 S(g) is not single-valued on circle r={r} "
                f"(closure defect {defect:.2e})")
        means.append(complex(np.mean(vals)))
    extrap = [(4 * means[k + 1] - means[k]) / 3 for k in range(len(means) - 1)]
    gaps = [abs(extrap[k + 1] - extrap[k]) for k in range(len(extrap) - 1)]
    k = int(np.argmin(gaps))
    alpha = extrap[k + 1]
    if gaps[k] > 1e-5 * max(1.0, abs(alpha)) or not np.isfinite(alpha):
        raise ArithmeticError(
            f"z^2 S(g) does not stabilize near the puncture "
            f"(residual spread {gaps[k]:.2e}); not a regular singular point")
    disc = cmath.sqrt(1 - 2 * alpha)
    # error in alpha propagates to disc with a square root blowup near a
    # double root, so the resonance margin must widen accordingly
    err = max(gaps[k], 1e-13 * max(1.0, abs(alpha)))
    if abs(disc) ** 2 < 2 * err:
        disc_err = math.sqrt(2 * err)
    else:
        disc_err = err / abs(disc)
    margin = max(tol, 10 * disc_err)
    roots = ((1 + disc) / 2, (1 - disc) / 2)
    resonant = abs(disc - round(disc.real)) <= margin
    return IndicialData(alpha, roots, resonant)


# ---------------------------------------------------------------------------
# end classification


@dataclass(frozen=True)
class Sectors:
    """Singular set accumulating along 2*count rays, at angles
    offset + k pi/count from the puncture."""

    count: int
    offset: float


@dataclass(frozen=True)
class EveryRay:
    """Singular set crossing every ray into the puncture infinitely
    often (circles or spirals around it)."""


@dataclass
class EndReport:
    """What the end at one puncture looks like.

    ``mu`` is the deformation parameter: reduced mod 1 for elliptic ends
    (only the class of the rotation angle is visible), the full boost
    parameter over pi for hyperbolic ones, None for parabolic.
    ``epsilon`` is the side of the unit circle the secondary Gauss map
    stays on near the puncture (-1 inside, +1 outside), when one side
    exists.  ``accumulation`` describes how the singular set approaches
    the puncture, if it does.
    """

    puncture: complex
    monodromy: MonodromyResult
    conjugacy: Su11Class
    kind: str  # elliptic-integral | elliptic | parabolic-first-kind |
    #            parabolic-second-kind | hyperbolic
    mu: float | None
    epsilon: int | None
    ord_q: int | None
    g_regular: bool
    ramification: int | None
    accumulation: Sectors | EveryRay | None
    indicial: IndicialData | None


def _continued_circle_values(e: Expr, radius: float, samples: int = 64):
    """Values of e on the circle, branch-continued from angle 0; returns
    (values at the sample angles, closure defect |e(2 pi) - e(0)|)."""
    fn = ContinuedFn(e, complex(radius))
    vals = [fn.value]
    for k in range(1, samples + 1):
        fn.advance(radius * cmath.exp(2j * math.pi * k / samples))
        vals.append(fn.value)
    return np.array(vals[:-1]), abs(vals[-1] - vals[0])


def _pole_data_continued(e: Expr, radii=(1e-2, 3e-3, 1e-3), samples=64):
    """(order, leading coefficient) of a meromorphic-after-continuation
    expression near 0, robust against principal-branch cuts: samples are
    continued along each circle."""
    means = []
    rows = []
    for r in radii:
        vals, defect = _continued_circle_values(e, r, samples)
        mags = np.abs(vals)
        if not np.all(np.isfinite(mags)) or np.any(mags == 0):
            raise ArithmeticError(f"cannot sample on circle r={r}")
        if defect > 1e-6 * float(mags.max()):
            raise ArithmeticError(
                f"expression is not single-valued on circle r={r} "
                f"(closure defect {defect:.2e})")
        means.append(float(np.mean(np.log(mags))))
        rows.append((r, vals))
    xs, ys = np.log(np.array(radii)), np.array(means)
    slope = float(np.polyfit(xs, ys, 1)[0])
    order = round(slope)
    if abs(slope - order) > 0.15:
        raise ArithmeticError(
            f"pole order of {e} near 0 is not integral (slope {slope:.3f})")
    leads = []
    for r, vals in rows:
        n = len(vals)
        zs = r * np.exp(2j * np.pi * (np.arange(n) + 0.0) / n)
        leads.append(complex(np.mean(vals * zs ** (-order))))
    lead = leads[-1]
    return order, lead


def _sector_offset_from_pole(lead: complex, m: int) -> float:
    # singular rays of Im(c z^-m) = 0: theta = (arg c)/m mod pi/m
    return (cmath.phase(lead) / m) % (math.pi / m)


def _sector_offset_from_zero(lead: complex, m: int) -> float:
    # singular rays of Re(c z^m) = 0: theta = (pi/2 - arg c)/m mod pi/m
    return ((math.pi / 2 - cmath.phase(lead)) / m) % (math.pi / m)


def _mobius_expr(mat: np.ndarray, e: Expr) -> Expr:
    a, b, c, d = mat[0, 0], mat[0, 1], mat[1, 0], mat[1, 1]
    return div(add(mul(const(a), e), const(b)),
               add(mul(const(c), e), const(d)))


def _gauss_side(g: Expr, radius: float) -> int | None:
    """Sign of |g| - 1 on a small circle, or None if it changes."""
    vals, _ = _continued_circle_values(g, radius, 48)
    mags = np.abs(vals)
    if np.all(mags < 1.0):
        return -1
    if np.all(mags > 1.0):
        return 1
    return None


def _second_kind_sectors(local: SurfaceData, mono: MonodromyResult,
                         probe_radius: float) -> Sectors:
    """Accumulation directions at a parabolic end of the second kind.

    Conjugate the monodromy to the canonical null rotation, push the
    secondary Gauss map to the upper-half-plane picture (u below) where
    the loop acts by a real translation, and subtract the matching log
    term; what remains is single-valued with a genuine pole whose
    leading coefficient carries the sector directions.
    """
    _, P = conjugate_to_canonical(mono.normalized)
    u = _mobius_expr(_R @ P, local.secondary_gauss)
    fn = ContinuedFn(u, complex(probe_radius))
    u0 = fn.value
    n = 256
    for k in range(1, n + 1):
        fn.advance(probe_radius * cmath.exp(2j * math.pi * k / n))
    tau = fn.value - u0
    # the canonical null rotation shifts u by exactly -2 sign_t
    if abs(abs(tau) - 2.0) > 1e-3:
        raise ArithmeticError(
            f"translation period {tau:.4f} does not match the canonical "
            "null rotation; conjugation or continuation went wrong")
    h = sub(u, mul(const(tau / (2j * math.pi)), elog(VAR_Z)))
    order, lead = _pole_data_continued(
        h, radii=(probe_radius / 4, probe_radius / 10, probe_radius / 30))
    if order >= 0:
        raise ArithmeticError(
            "second kind end but the developing map has no pole "
            f"(order {order})")
    m = -order
    return Sectors(m, _sector_offset_from_pole(lead, m))


def _integral_elliptic_accumulation(local: SurfaceData,
                                    probe_radius: float):
    """Sectors when |g| = 1 at the puncture itself, None when the Gauss
    map stays off the unit circle there."""
    g = local.secondary_gauss
    g0 = _circle_mean(g, probe_radius / 50)
    if not np.isfinite(g0) or abs(abs(g0) - 1.0) > 1e-6:
        return None, _gauss_side(g, probe_radius / 50)
    phi = elog(mul(const(1 / g0), g))
    order, lead = _pole_data_continued(
        phi, radii=(probe_radius / 4, probe_radius / 10, probe_radius / 30))
    if order < 1:
        raise ArithmeticError(
            f"log(g/g(0)) should vanish at the puncture, got order {order}")
    return Sectors(order, _sector_offset_from_zero(lead, order)), None


def _ramification(local: SurfaceData) -> int | None:
    G = local.hyperbolic_gauss
    if G is None:
        return None
    po = pole_order_at(G, 0.0)
    if po.order < 0:
        return -po.order if po.confident else None
    G0 = _circle_mean(G, 1e-3)
    po = pole_order_at(sub(G, const(G0)), 0.0)
    return po.order if po.confident and po.order >= 1 else None


def _vanishes_on_circle(e: Expr, reference: Expr, radius: float) -> bool:
    """True when e is negligible on the circle relative to reference.

    pole_order_at cannot fit a slope through values that are all zero, so
    identically vanishing differences need to be caught first.
    """
    theta = 2 * np.pi * (np.arange(24) + 0.37) / 24
    zs = radius * np.exp(1j * theta)
    ev = np.abs(eval_principal(e, zs))
    rv = np.abs(eval_principal(reference, zs))
    if not np.all(np.isfinite(rv)):
        return False
    scale = max(1.0, float(rv.max()))
    return bool(np.all(np.isfinite(ev)) and float(ev.max()) <= 1e-9 * scale)


def end_classify(
    data: SurfaceData,
    puncture,
    loop_radius: float = 0.5,
    base_angle: float = 0.0,
    steps: int | None = None,
    tol: float = 1e-6,
    probe_radius: float | None = None,
) -> EndReport:
    """Full report for the end at one puncture.

    The data is moved to a local chart (the puncture at 0), the loop
    monodromy is computed on the circle of ``loop_radius``, classified
    in SU(1,1), and the class determines which extra structure gets
    extracted: the deformation parameter mod 1 for elliptic ends, first
    or second kind plus the spacelike/timelike side indicator for
    parabolic ones, and the accumulation pattern of the singular set.
    Raises ValueError when the monodromy does not lie in SU(1,1) (the
    face does not descend; nothing to classify).
    """
    local = data.localized(puncture)
    d_g = differentiate(local.secondary_gauss)
    if isinstance(d_g, Const) and d_g.value == 0:
        raise ValueError(
            "the secondary Gauss map is constant (totally umbilic or "
            "degenerate data); end classification does not apply")
    if probe_radius is None:
        probe_radius = loop_radius / 2
    mono = loop_monodromy(local, 0.0, loop_radius, base_angle, steps, tol)
    if not mono.descends:
        raise ValueError(
            "monodromy factor is not in SU(1,1) "
            f"(form residual {mono.form_residual:.2e}); "
            "the face does not descend around this puncture")
    conj = classify(mono.normalized, tol=tol)

    s_expr = schwarzian(local.secondary_gauss)
    s_order = pole_order_at(s_expr, 0.0)
    g_regular = s_order.confident and s_order.order >= -2
    q_order = pole_order_at(local.hopf().coeff, 0.0)
    indicial = None
    if g_regular:
        indicial = indicial_data(data, puncture)

    mu: float | None = None
    epsilon: int | None = None
    accumulation = None

    if isinstance(conj, Elliptic):
        if conj.s == 0.0:
            kind = "elliptic-integral"
            mu = 0.0
            accumulation, epsilon = _integral_elliptic_accumulation(
                local, probe_radius)
        else:
            kind = "elliptic"
            mu = (-conj.s / math.pi) % 1.0
            epsilon = _gauss_side(local.secondary_gauss, probe_radius / 50)
    elif isinstance(conj, Parabolic):
        shifted = sub(s_expr, div(const(0.5), mul(VAR_Z, VAR_Z)))
        if _vanishes_on_circle(shifted, s_expr, probe_radius / 10):
            kind = "parabolic-first-kind"
            epsilon = _gauss_side(local.secondary_gauss, probe_radius / 50)
        else:
            sh_order = pole_order_at(shifted, 0.0)
            if sh_order.order >= -1:
                kind = "parabolic-first-kind"
                epsilon = _gauss_side(local.secondary_gauss,
                                      probe_radius / 50)
            else:
                kind = "parabolic-second-kind"
                accumulation = _second_kind_sectors(local, mono, probe_radius)
    else:
        assert isinstance(conj, Hyperbolic)
        kind = "hyperbolic"
        mu = conj.t / math.pi
        accumulation = EveryRay()

    return EndReport(
        puncture=puncture,
        monodromy=mono,
        conjugacy=conj,
        kind=kind,
        mu=mu,
        epsilon=epsilon,
        ord_q=q_order.order if q_order.confident else None,
        g_regular=g_regular,
        ramification=_ramification(local),
        accumulation=accumulation,
        indicial=indicial,
    )


# ---------------------------------------------------------------------------
# completeness probe


@dataclass(frozen=True)
class CompletenessReport:
    """Outcome of the radial completeness probe at one puncture.

    Each probed ray carries the cumulative lift-metric length of its
    dyadic segments and a verdict: ``"diverging"`` when the length
    passes the threshold while the dyadic pieces keep growing, or when
    the pieces stop decaying altogether (the logarithmic-type
    divergence, whose partial sums grow too slowly to hit any fixed
    threshold); ``"finite"`` otherwise.  ``singular_set_compact``
    records whether the singular set ``|g| = 1`` stays away from the
    puncture (None when the small-circle probe is inconclusive).

    The overall verdict combines the two: diverging on every ray with
    a compact singular set is ``"complete"``, diverging with a
    non-compact singular set is ``"weakly-complete"`` (the lift metric
    is complete but the face itself degenerates along the accumulating
    singular set), and any finite ray is ``"not-complete"``.  The flat
    totally-umbilic face has empty singular set and a lift metric
    known in closed form, so callers may bypass the probe for it with
    ``horosphere=True`` and get ``"complete-by-definition"``.
    """

    puncture: complex
    ray_angles: tuple[float, ...]
    ray_lengths: tuple[float, ...]
    ray_verdicts: tuple[str, ...]
    singular_set_compact: bool | None
    verdict: str


def completeness_probe(
    data: SurfaceData,
    puncture,
    rays: int = 8,
    start_radius: float = 0.1,
    scales: int = 20,
    threshold: float = 1e3,
    horosphere: bool = False,
) -> CompletenessReport:
    """Probe completeness of the end at ``puncture`` in the lift metric.

    The lift metric ``(1 + |G|^2)^2 |Q/dG|^2`` is integrated along
    ``rays`` straight rays running from ``start_radius`` toward the
    puncture, split into dyadic scale segments (each half the radius of
    the previous).  A ray diverges when either the cumulative length
    exceeds ``threshold`` with the dyadic pieces monotone, or the
    pieces show no geometric decay at all -- partial sums of a
    non-decaying sequence grow without bound even though no finite
    truncation looks large.  Separately, the secondary Gauss map is
    sampled on shrinking circles to decide whether the singular set
    ``|g| = 1`` accumulates at the puncture.

    Needs data that determines the hyperbolic Gauss map (a Gauss-map
    pair or an explicit lift); raises ValueError for (g, omega) data.
    ``scales`` deeper than the default run the integrand into float
    cancellation when the Hopf coefficient is a composed Schwarzian
    tree (terms of order 1/r^4 cancelling to 1/r survive to roughly
    r = 1e-7 in double precision).
    """
    p = complex(puncture)
    if horosphere:
        return CompletenessReport(p, (), (), (), True,
                                  "complete-by-definition")
    local = data.localized(puncture)
    if local.hyperbolic_gauss is None:
        raise ValueError(
            "completeness probe needs the hyperbolic Gauss map; "
            "(g, omega) data does not determine the lift metric")
    G = local.hyperbolic_gauss
    dG = differentiate(G)
    qhat = local.hopf().coeff
    nodes, weights = np.polynomial.legendre.leggauss(8)

    angles = tuple(2 * math.pi * k / rays for k in range(rays))
    lengths, verdicts = [], []
    for theta in angles:
        u = cmath.exp(1j * theta)
        fns = [ContinuedFn(e, start_radius * u) for e in (G, dG, qhat)]
        pieces: list[float] = []
        outer = start_radius
        for _ in range(scales):
            inner = outer / 2
            total = 0.0
            for x, w in zip(nodes, weights):
                # walk the nodes outward-in so the branch trackers
                # march monotonically down the ray
                r = inner + (outer - inner) * (1 - x) / 2
                gv, dgv, qv = (fn.advance(r * u) for fn in fns)
                if dgv == 0:
                    raise ValueError(
                        "hyperbolic Gauss map is critical on the probe "
                        f"ray at angle {theta:.3f}; lift metric blows up")
                total += w * (1 + abs(gv) ** 2) * abs(qv) / abs(dgv)
            pieces.append(total * (outer - inner) / 2)
            outer = inner
            if sum(pieces) > 100 * threshold:
                break
        cum = float(sum(pieces))
        tail = [q for q in pieces[-8:] if q > 0]
        ratios = [b / a for a, b in zip(tail, tail[1:])]
        growing = bool(ratios) and all(r >= 0.9 for r in ratios)
        no_decay = bool(ratios) and float(
            np.prod(ratios) ** (1.0 / len(ratios))) >= 0.95
        lengths.append(cum)
        verdicts.append("diverging"
                        if (cum > threshold and growing) or no_decay
                        else "finite")

    compact = _singular_set_compact(local.secondary_gauss, start_radius)
    if all(v == "diverging" for v in verdicts):
        overall = "complete" if compact else "weakly-complete"
    else:
        overall = "not-complete"
    return CompletenessReport(p, angles, tuple(lengths), tuple(verdicts),
                              compact, overall)


def _singular_set_compact(g: Expr, start_radius: float) -> bool | None:
    """Whether |g| = 1 avoids all sufficiently small circles at 0.

    Samples |g| on dyadically shrinking circles; the singular set is
    judged compact when the last few circles all miss the unit level,
    non-compact when they all cross it, None on mixed or unreadable
    evidence.
    """
    crossings: list[bool | None] = []
    for j in range(6, 14):
        r = start_radius * 2.0 ** (-j)
        try:
            vals, _ = _continued_circle_values(g, r, 48)
        except (ValueError, ZeroDivisionError, OverflowError,
                ArithmeticError):
            crossings.append(None)
            continue
        mags = np.abs(vals)
        if not np.all(np.isfinite(mags)):
            crossings.append(None)
        else:
            crossings.append(bool(mags.min() <= 1.0 <= mags.max()))
    tail = crossings[-4:]
    if all(c is False for c in tail):
        return True
    if all(c is True for c in tail):
        return False
    return None
