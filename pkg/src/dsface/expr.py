"""Meromorphic expression trees with branch-tracked analytic continuation.

The node set is {constant, z, +, -, *, /, power with constant complex
exponent, log, exp}; sqrt parses as power 1/2 and composition is structural
substitution.  Trees are immutable and shareable: evaluation never mutates
a node, so the same tree can be walked concurrently.

Multivalued nodes (log, and powers with non-integer exponent) each own one
"unwound log" slot.  A ``BranchState`` assigns every such slot the current
unwound value of log(argument) at a base point; continuation along a path
updates the slots step by step, requiring the argument increment per step
to stay below pi/2 and bisecting the step otherwise.  A full counter-
clockwise loop of ``log(z)`` around 0 therefore gains exactly 2*pi*i, and
``z^c`` gains the factor ``exp(2*pi*i*c)``.

Principal-branch evaluation (scalar or vectorized over numpy arrays) is
available separately for single-valued quantities such as |g| fields and
closed surfaces.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np

__all__ = [
    "Expr", "Const", "Var", "Neg", "Add", "Sub", "Mul", "Div", "Pow", "Log",
    "Exp", "VAR_Z", "ZERO", "ONE", "parse", "ParseError", "SingularPathError",
    "const", "add", "sub", "mul", "div", "neg", "power", "log", "exp_", "sqrt",
    "compose", "differentiate", "schwarzian", "BranchState", "ContinuedFn",
    "continue_on_segment", "eval_continued", "TwoDifferential",
    "hopf_from_gauss_pair", "pole_order_at", "PoleOrder", "NotRationalError",
    "rational_parts", "rational_degree", "parse_complex",
]


class ParseError(ValueError):
    """Raised on malformed expression text; carries the offending position."""

    def __init__(self, message: str, position: int):
        super().__init__(f"{message} (at position {position})")
        self.position = position


class SingularPathError(ArithmeticError):
    """Continuation path hit (or came numerically too close to) a branch
    point, zero or pole of a multivalued argument."""


# ---------------------------------------------------------------------------
# nodes


class Expr:
    __slots__ = ()

    # filled in per subclass; ATOM=40, PREFIX=30, POW=25, MUL=20, ADD=10
    _prec = 40

    def __add__(self, other):
        return add(self, _as_expr(other))

    def __radd__(self, other):
        return add(_as_expr(other), self)

    def __sub__(self, other):
        return sub(self, _as_expr(other))

    def __rsub__(self, other):
        return sub(_as_expr(other), self)

    def __mul__(self, other):
        return mul(self, _as_expr(other))

    def __rmul__(self, other):
        return mul(_as_expr(other), self)

    def __truediv__(self, other):
        return div(self, _as_expr(other))

    def __rtruediv__(self, other):
        return div(_as_expr(other), self)

    def __neg__(self):
        return neg(self)

    def __pow__(self, exponent):
        return power(self, exponent)

    def __str__(self):
        return to_text(self)

    def __repr__(self):
        return f"<expr {to_text(self)}>"


@dataclass(frozen=True, repr=False)
class Const(Expr):
    value: complex

    def __post_init__(self):
        object.__setattr__(self, "value", complex(self.value))

    __str__ = Expr.__str__


@dataclass(frozen=True, repr=False)
class Var(Expr):
    __str__ = Expr.__str__


@dataclass(frozen=True, repr=False)
class Neg(Expr):
    arg: Expr
    _prec = 30
    __str__ = Expr.__str__


@dataclass(frozen=True, repr=False)
class Add(Expr):
    left: Expr
    right: Expr
    _prec = 10
    __str__ = Expr.__str__


@dataclass(frozen=True, repr=False)
class Sub(Expr):
    left: Expr
    right: Expr
    _prec = 10
    __str__ = Expr.__str__


@dataclass(frozen=True, repr=False)
class Mul(Expr):
    left: Expr
    right: Expr
    _prec = 20
    __str__ = Expr.__str__


@dataclass(frozen=True, repr=False)
class Div(Expr):
    left: Expr
    right: Expr
    _prec = 20
    __str__ = Expr.__str__


@dataclass(frozen=True, repr=False)
class Pow(Expr):
    base: Expr
    exponent: complex
    _prec = 25

    def __post_init__(self):
        object.__setattr__(self, "exponent", complex(self.exponent))

    @property
    def integer_exponent(self) -> bool:
        e = self.exponent
        return e.imag == 0.0 and float(e.real).is_integer()

    __str__ = Expr.__str__


@dataclass(frozen=True, repr=False)
class Log(Expr):
    arg: Expr
    __str__ = Expr.__str__


@dataclass(frozen=True, repr=False)
class Exp(Expr):
    arg: Expr
    __str__ = Expr.__str__


VAR_Z = Var()
ZERO = Const(0.0)
ONE = Const(1.0)


def _as_expr(x) -> Expr:
    if isinstance(x, Expr):
        return x
    if isinstance(x, (int, float, complex)):
        return Const(complex(x))
    raise TypeError(f"cannot coerce {x!r} to Expr")


# smart constructors: fold constants and drop algebraic no-ops so that
# derivative trees stay small.  They never rewrite non-constant structure.

def const(c) -> Const:
    return Const(complex(c))


def add(a, b) -> Expr:
    a, b = _as_expr(a), _as_expr(b)
    if isinstance(a, Const) and isinstance(b, Const):
        return Const(a.value + b.value)
    if isinstance(a, Const) and a.value == 0:
        return b
    if isinstance(b, Const) and b.value == 0:
        return a
    return Add(a, b)


def sub(a, b) -> Expr:
    a, b = _as_expr(a), _as_expr(b)
    if isinstance(a, Const) and isinstance(b, Const):
        return Const(a.value - b.value)
    if isinstance(b, Const) and b.value == 0:
        return a
    if isinstance(a, Const) and a.value == 0:
        return neg(b)
    return Sub(a, b)


def neg(a) -> Expr:
    a = _as_expr(a)
    if isinstance(a, Const):
        return Const(-a.value)
    if isinstance(a, Neg):
        return a.arg
    return Neg(a)


def mul(a, b) -> Expr:
    a, b = _as_expr(a), _as_expr(b)
    if isinstance(a, Const) and isinstance(b, Const):
        return Const(a.value * b.value)
    if isinstance(a, Const):
        if a.value == 0:
            return ZERO
        if a.value == 1:
            return b
    if isinstance(b, Const):
        if b.value == 0:
            return ZERO
        if b.value == 1:
            return a
    return Mul(a, b)


def div(a, b) -> Expr:
    a, b = _as_expr(a), _as_expr(b)
    if isinstance(b, Const):
        if b.value == 0:
            raise ZeroDivisionError("constant zero denominator")
        if isinstance(a, Const):
            return Const(a.value / b.value)
        if b.value == 1:
            return a
    if isinstance(a, Const) and a.value == 0:
        return ZERO
    return Div(a, b)


def power(base, exponent) -> Expr:
    base = _as_expr(base)
    e = complex(exponent)
    if e == 0:
        return ONE
    if e == 1:
        return base
    if isinstance(base, Const):
        return Const(_principal_pow(base.value, e))
    return Pow(base, e)


def log(a) -> Expr:
    return Log(_as_expr(a))


def exp_(a) -> Expr:
    a = _as_expr(a)
    if isinstance(a, Const):
        return Const(cmath.exp(a.value))
    return Exp(a)


def sqrt(a) -> Expr:
    return power(a, 0.5)


def _principal_pow(b: complex, e: complex) -> complex:
    if e.imag == 0 and float(e.real).is_integer():
        return b ** int(e.real)
    if b == 0:
        raise ZeroDivisionError("0 raised to non-integer power")
    return cmath.exp(e * cmath.log(b))


# ---------------------------------------------------------------------------
# structural helpers


def compose(outer: Expr, inner: Expr) -> Expr:
    """outer(inner(z)): substitute the variable of ``outer`` by ``inner``."""
    memo: dict[int, Expr] = {}

    def walk(e: Expr) -> Expr:
        got = memo.get(id(e))
        if got is not None:
            return got
        if isinstance(e, Const):
            out = e
        elif isinstance(e, Var):
            out = inner
        elif isinstance(e, Neg):
            out = neg(walk(e.arg))
        elif isinstance(e, Add):
            out = add(walk(e.left), walk(e.right))
        elif isinstance(e, Sub):
            out = sub(walk(e.left), walk(e.right))
        elif isinstance(e, Mul):
            out = mul(walk(e.left), walk(e.right))
        elif isinstance(e, Div):
            out = div(walk(e.left), walk(e.right))
        elif isinstance(e, Pow):
            out = power(walk(e.base), e.exponent)
        elif isinstance(e, Log):
            out = log(walk(e.arg))
        elif isinstance(e, Exp):
            out = exp_(walk(e.arg))
        else:
            raise TypeError(f"unknown node {e!r}")
        memo[id(e)] = out
        return out

    return walk(outer)


def differentiate(e: Expr) -> Expr:
    """Exact symbolic d/dz.  Subtrees of the input are reused, so the
    derivative stays branch-consistent with the original under the same
    continuation path."""
    memo: dict[int, Expr] = {}

    def d(e: Expr) -> Expr:
        got = memo.get(id(e))
        if got is not None:
            return got
        if isinstance(e, Const):
            out = ZERO
        elif isinstance(e, Var):
            out = ONE
        elif isinstance(e, Neg):
            out = neg(d(e.arg))
        elif isinstance(e, Add):
            out = add(d(e.left), d(e.right))
        elif isinstance(e, Sub):
            out = sub(d(e.left), d(e.right))
        elif isinstance(e, Mul):
            out = add(mul(d(e.left), e.right), mul(e.left, d(e.right)))
        elif isinstance(e, Div):
            out = div(sub(mul(d(e.left), e.right), mul(e.left, d(e.right))),
                      Pow(e.right, 2.0) if not isinstance(e.right, Const)
                      else Const(e.right.value ** 2))
        elif isinstance(e, Pow):
            out = mul(mul(Const(e.exponent), power(e.base, e.exponent - 1)),
                      d(e.base))
        elif isinstance(e, Log):
            out = div(d(e.arg), e.arg)
        elif isinstance(e, Exp):
            out = mul(d(e.arg), e)
        else:
            raise TypeError(f"unknown node {e!r}")
        memo[id(e)] = out
        return out

    return d(e)


def schwarzian(h: Expr) -> Expr:
    """Schwarzian derivative (h''/h')' - (h''/h')^2 / 2, as an expression."""
    h1 = differentiate(h)
    h2 = differentiate(h1)
    w = div(h2, h1)
    return sub(differentiate(w), div(mul(w, w), const(2.0)))


def multivalued_nodes(e: Expr) -> list[Expr]:
    """Postorder list (deduplicated by identity) of log/fractional-power
    nodes; the list order defines the slot layout of BranchState."""
    seen: set[int] = set()
    out: list[Expr] = []

    def walk(e: Expr):
        if id(e) in seen:
            return
        seen.add(id(e))
        if isinstance(e, (Neg, Log, Exp)):
            walk(e.arg)
        elif isinstance(e, (Add, Sub, Mul, Div)):
            walk(e.left)
            walk(e.right)
        elif isinstance(e, Pow):
            walk(e.base)
        if isinstance(e, Log) or (isinstance(e, Pow) and not e.integer_exponent):
            out.append(e)

    walk(e)
    return out


# ---------------------------------------------------------------------------
# evaluation


def eval_principal(e: Expr, z):
    """Evaluate with principal branches.  ``z`` may be a complex scalar or a
    numpy array; the result has the same shape.  Poles produce inf/nan
    entries rather than raising (downstream code masks them)."""
    is_array = isinstance(z, np.ndarray)
    if not is_array:
        # numpy scalars keep pole arithmetic from raising ZeroDivisionError
        z = np.complex128(z)
    cache: dict[int, object] = {}

    with np.errstate(all="ignore"):
        def ev(e: Expr):
            got = cache.get(id(e))
            if got is not None:
                return got
            if isinstance(e, Const):
                v = np.full(z.shape, e.value) if is_array else np.complex128(e.value)
            elif isinstance(e, Var):
                v = z
            elif isinstance(e, Neg):
                v = -ev(e.arg)
            elif isinstance(e, Add):
                v = ev(e.left) + ev(e.right)
            elif isinstance(e, Sub):
                v = ev(e.left) - ev(e.right)
            elif isinstance(e, Mul):
                v = ev(e.left) * ev(e.right)
            elif isinstance(e, Div):
                v = ev(e.left) / ev(e.right)
            elif isinstance(e, Pow):
                b = ev(e.base)
                if e.integer_exponent:
                    n = int(e.exponent.real)
                    v = b ** n if n >= 0 else (b ** n if is_array else
                                               np.complex128(1) / b ** (-n))
                else:
                    v = np.exp(e.exponent * np.log(b))
            elif isinstance(e, Log):
                v = np.log(ev(e.arg))
            elif isinstance(e, Exp):
                v = np.exp(ev(e.arg))
            else:
                raise TypeError(f"unknown node {e!r}")
            cache[id(e)] = v
            return v

        return ev(e)


# branch slot: (argument value, unwound log of the argument) per node.
# The real part of the unwound log is always recomputed from |argument|,
# so only the accumulated imaginary part carries path history.

MAX_TURN = math.pi / 2
_MAX_BISECT = 48


@dataclass(frozen=True)
class BranchState:
    """Branch data of one expression at one point of the universal cover."""

    z: complex
    slots: tuple[tuple[complex, complex], ...]


class _Refine(Exception):
    pass


def _eval_with_branches(e: Expr, index: dict[int, int], z: complex,
                        slots: Sequence[tuple[complex, complex]] | None,
                        max_turn: float = MAX_TURN):
    """One bottom-up pass.  slots=None initializes principal branches.
    Returns (value, new_slots); raises _Refine when an argument turned by
    >= max_turn relative to its slot, SingularPathError on a vanishing or
    non-finite multivalued argument."""
    new_slots: list[tuple[complex, complex] | None] = [None] * len(index)
    cache: dict[int, complex] = {}

    def branch_log(node: Expr, arg: complex) -> complex:
        if arg == 0 or not (math.isfinite(arg.real) and math.isfinite(arg.imag)):
            raise SingularPathError(
                f"multivalued argument hit {arg} near z = {z}")
        k = index[id(node)]
        if new_slots[k] is not None:
            return new_slots[k][1]
        if slots is None:
            unwound = cmath.log(arg)
        else:
            old_arg, old_log = slots[k]
            dphase = cmath.log(arg / old_arg)
            if abs(dphase.imag) >= max_turn:
                raise _Refine()
            unwound = complex(math.log(abs(arg)), old_log.imag + dphase.imag)
        new_slots[k] = (arg, unwound)
        return unwound

    def ev(e: Expr) -> complex:
        got = cache.get(id(e))
        if got is not None:
            return got
        if isinstance(e, Const):
            v = e.value
        elif isinstance(e, Var):
            v = z
        elif isinstance(e, Neg):
            v = -ev(e.arg)
        elif isinstance(e, Add):
            v = ev(e.left) + ev(e.right)
        elif isinstance(e, Sub):
            v = ev(e.left) - ev(e.right)
        elif isinstance(e, Mul):
            v = ev(e.left) * ev(e.right)
        elif isinstance(e, Div):
            denom = ev(e.right)
            numer = ev(e.left)
            if denom == 0:
                v = complex(math.inf, math.inf) if numer != 0 else complex("nan")
            else:
                v = numer / denom
        elif isinstance(e, Pow):
            b = ev(e.base)
            if e.integer_exponent:
                n = int(e.exponent.real)
                if b == 0 and n < 0:
                    v = complex(math.inf, math.inf)
                else:
                    v = b ** n
            else:
                v = cmath.exp(e.exponent * branch_log(e, b))
        elif isinstance(e, Log):
            v = branch_log(e, ev(e.arg))
        elif isinstance(e, Exp):
            v = cmath.exp(ev(e.arg))
        else:
            raise TypeError(f"unknown node {e!r}")
        cache[id(e)] = v
        return v

    value = ev(e)
    done = tuple(s if s is not None else ((1.0 + 0j), 0j) for s in new_slots)
    return value, done


class ContinuedFn:
    """An expression together with its current branch point.

    ``advance(z)`` continues along the straight segment from the current
    point, bisecting as needed so every multivalued argument turns < pi/2
    per accepted substep.  ``state`` is an immutable snapshot usable to
    fork or rewind.
    """

    def __init__(self, expr: Expr, z0: complex, state: BranchState | None = None):
        self.expr = expr
        self._nodes = multivalued_nodes(expr)
        self._index = {id(n): k for k, n in enumerate(self._nodes)}
        if state is not None:
            if len(state.slots) != len(self._nodes):
                raise ValueError("branch state does not match expression")
            self._z = state.z
            self._slots = state.slots
            self._value, _ = _eval_with_branches(expr, self._index, state.z,
                                                 state.slots, math.inf)
        else:
            self._z = z0
            self._value, self._slots = _eval_with_branches(
                expr, self._index, z0, None)

    @property
    def z(self) -> complex:
        return self._z

    @property
    def value(self) -> complex:
        return self._value

    @property
    def state(self) -> BranchState:
        return BranchState(self._z, self._slots)

    def restore(self, state: BranchState):
        self._z = state.z
        self._slots = state.slots
        self._value, _ = _eval_with_branches(self.expr, self._index, state.z,
                                             state.slots, math.inf)

    def value_at(self, z: complex) -> complex:
        """Value at z continued from the current point along a straight
        segment, without committing the move."""
        keep = self.state
        try:
            return self.advance(z)
        finally:
            self.restore(keep)

    def advance(self, z1: complex, depth: int = 0) -> complex:
        if z1 == self._z:
            return self._value
        try:
            v, slots = _eval_with_branches(self.expr, self._index, z1, self._slots)
        except _Refine:
            if depth >= _MAX_BISECT:
                raise SingularPathError(
                    f"continuation stalled near z = {z1} "
                    "(branch point or pole on the path?)")
            mid = (self._z + z1) / 2
            self.advance(mid, depth + 1)
            return self.advance(z1, depth + 1)
        self._z = z1
        self._value = v
        self._slots = slots
        return v


def continue_on_segment(exprs: Sequence[ContinuedFn], z1: complex):
    """Advance several ContinuedFn in lockstep to z1 (each bisects on its
    own; they share only the endpoint)."""
    return [f.advance(z1) for f in exprs]


def eval_continued(e: Expr, path: Sequence[complex],
                   state: BranchState | None = None):
    """Continue e along the polyline ``path``; returns (values at the path
    vertices, final BranchState).  With no initial state, branches start
    principal at path[0]."""
    if len(path) == 0:
        raise ValueError("empty path")
    fn = ContinuedFn(e, path[0], state)
    values = [fn.value if state is None else fn.advance(path[0])]
    for z in path[1:]:
        values.append(fn.advance(z))
    return values, fn.state


# ---------------------------------------------------------------------------
# quadratic differentials and local analysis


@dataclass(frozen=True)
class TwoDifferential:
    """Coefficient p(z) of a quadratic differential p(z) dz^2."""

    coeff: Expr

    def __add__(self, other: "TwoDifferential") -> "TwoDifferential":
        return TwoDifferential(add(self.coeff, other.coeff))

    def __sub__(self, other: "TwoDifferential") -> "TwoDifferential":
        return TwoDifferential(sub(self.coeff, other.coeff))

    def scale(self, c) -> "TwoDifferential":
        return TwoDifferential(mul(const(c), self.coeff))

    def at_infinity(self) -> "TwoDifferential":
        """Coefficient in the chart w = 1/z (dz^2 = dw^2 / w^4)."""
        w_inv = div(ONE, VAR_Z)
        return TwoDifferential(
            mul(compose(self.coeff, w_inv), power(VAR_Z, -4)))

    def __str__(self):
        return f"({to_text(self.coeff)})*dz^2"


def hopf_from_gauss_pair(G: Expr, g: Expr) -> TwoDifferential:
    """Hopf differential from the two Gauss maps: (S(g) - S(G))/2 dz^2."""
    return TwoDifferential(
        mul(const(0.5), sub(schwarzian(g), schwarzian(G))))


@dataclass(frozen=True)
class PoleOrder:
    """Result of a circle-sampling order estimate at a point.

    order: nearest integer to the fitted log-log slope (zeros positive,
    poles negative); slope: the raw fit; confident: slope within the
    integrality tolerance and stable across radii.
    """

    order: int
    slope: float
    confident: bool
    spread: float


def pole_order_at(e: Expr, point: complex,
                  radii: Sequence[float] = (1e-2, 1e-3, 1e-4),
                  samples: int = 16,
                  integrality_tol: float = 0.1) -> PoleOrder:
    """Estimate the vanishing/pole order of a meromorphic expression at a
    finite point by regressing mean log|e| against log r on small circles.

    The caller asserts meromorphy; an essential singularity or branch point
    shows up as a non-integral or radius-unstable slope with
    ``confident=False``.  For the point at infinity substitute 1/z first
    (see TwoDifferential.at_infinity for differentials).
    """
    used_radii, means = [], []
    degraded = False
    for r in radii:
        logs = []
        for k in range(samples):
            theta = 2 * math.pi * (k + 0.318) / samples
            z = point + r * cmath.exp(1j * theta)
            try:
                v = eval_principal(e, z)
            except (ZeroDivisionError, OverflowError, ValueError):
                continue
            a = abs(v)
            if a == 0 or not math.isfinite(a):
                continue
            logs.append(math.log(a))
        if not logs:
            # the whole circle under/overflowed (essential singularity or
            # sheer dynamic range): drop it and flag the estimate
            degraded = True
            continue
        if len(logs) < samples // 2:
            degraded = True
        used_radii.append(r)
        means.append(sum(logs) / len(logs))
    if len(used_radii) < 2:
        raise ArithmeticError(
            f"cannot sample |e| near {point}: fewer than two usable circles")
    xs = np.log(np.asarray(used_radii, dtype=float))
    ys = np.asarray(means)
    slope, _ = np.polyfit(xs, ys, 1)
    pair_slopes = np.diff(ys) / np.diff(xs)
    spread = float(np.max(np.abs(pair_slopes - slope))) if len(xs) > 2 else 0.0
    order = int(round(slope))
    confident = (not degraded
                 and abs(slope - order) <= integrality_tol
                 and spread <= 3 * integrality_tol)
    return PoleOrder(order, float(slope), confident, spread)


# ---------------------------------------------------------------------------
# rational structure


class NotRationalError(ValueError):
    pass


def _poly_mul(p: list[complex], q: list[complex]) -> list[complex]:
    return list(np.convolve(p, q))


def _poly_add(p: list[complex], q: list[complex]) -> list[complex]:
    n = max(len(p), len(q))
    p = [0] * (n - len(p)) + list(p)
    q = [0] * (n - len(q)) + list(q)
    return [a + b for a, b in zip(p, q)]


def _poly_trim(p: list[complex], tol: float = 0.0) -> list[complex]:
    k = 0
    while k < len(p) - 1 and abs(p[k]) <= tol:
        k += 1
    return p[k:]


def rational_parts(e: Expr) -> tuple[list[complex], list[complex]]:
    """(numerator, denominator) coefficient lists (highest degree first) if
    the tree is a rational function of z; raises NotRationalError on log,
    exp or fractional powers."""

    def walk(e: Expr) -> tuple[list[complex], list[complex]]:
        if isinstance(e, Const):
            return [e.value], [1.0 + 0j]
        if isinstance(e, Var):
            return [1.0 + 0j, 0j], [1.0 + 0j]
        if isinstance(e, Neg):
            p, q = walk(e.arg)
            return [-c for c in p], q
        if isinstance(e, (Add, Sub)):
            p1, q1 = walk(e.left)
            p2, q2 = walk(e.right)
            if isinstance(e, Sub):
                p2 = [-c for c in p2]
            return _poly_add(_poly_mul(p1, q2), _poly_mul(p2, q1)), _poly_mul(q1, q2)
        if isinstance(e, Mul):
            p1, q1 = walk(e.left)
            p2, q2 = walk(e.right)
            return _poly_mul(p1, p2), _poly_mul(q1, q2)
        if isinstance(e, Div):
            p1, q1 = walk(e.left)
            p2, q2 = walk(e.right)
            return _poly_mul(p1, q2), _poly_mul(q1, p2)
        if isinstance(e, Pow):
            if not e.integer_exponent:
                raise NotRationalError("fractional power")
            n = int(e.exponent.real)
            p, q = walk(e.base)
            if n < 0:
                p, q, n = q, p, -n
            rp, rq = [1.0 + 0j], [1.0 + 0j]
            for _ in range(n):
                rp = _poly_mul(rp, p)
                rq = _poly_mul(rq, q)
            return rp, rq
        raise NotRationalError(f"non-rational node {type(e).__name__}")

    p, q = walk(e)
    return _poly_trim(p), _poly_trim(q)


def rational_degree(e: Expr, cancel_tol: float = 1e-9) -> int:
    """Degree of a rational map C u {inf} -> C u {inf}: max of numerator and
    denominator degree after cancelling (numerically) common roots."""
    p, q = rational_parts(e)
    p = _poly_trim(p, cancel_tol * max(abs(c) for c in p))
    q = _poly_trim(q, cancel_tol * max(abs(c) for c in q))
    dp, dq = len(p) - 1, len(q) - 1
    if dp > 0 and dq > 0:
        rp = np.roots(p)
        rq = list(np.roots(q))
        for r in rp:
            for k, s in enumerate(rq):
                if abs(r - s) <= cancel_tol * max(1.0, abs(r)):
                    dp -= 1
                    dq -= 1
                    rq.pop(k)
                    break
    return max(dp, dq)


# ---------------------------------------------------------------------------
# parsing and printing


_FUNCS = {"log", "exp", "sqrt"}


def _tokenize(text: str) -> list[tuple[str, object, int]]:
    tokens = []
    k = 0
    n = len(text)
    while k < n:
        ch = text[k]
        if ch.isspace():
            k += 1
            continue
        if ch in "+-*/^()":
            tokens.append(("op", ch, k))
            k += 1
            continue
        if ch.isdigit() or ch == ".":
            j = k
            while j < n and (text[j].isdigit() or text[j] == "."):
                j += 1
            if j < n and text[j] in "eE":
                j2 = j + 1
                if j2 < n and text[j2] in "+-":
                    j2 += 1
                if j2 < n and text[j2].isdigit():
                    while j2 < n and text[j2].isdigit():
                        j2 += 1
                    j = j2
            lit = text[k:j]
            try:
                val = float(lit)
            except ValueError:
                raise ParseError(f"bad numeric literal {lit!r}", k)
            if j < n and text[j] == "i":
                tokens.append(("num", complex(0.0, val), k))
                j += 1
            else:
                tokens.append(("num", complex(val, 0.0), k))
            k = j
            continue
        if ch.isalpha():
            j = k
            while j < n and text[j].isalnum():
                j += 1
            name = text[k:j]
            if name == "z":
                tokens.append(("var", name, k))
            elif name == "i":
                tokens.append(("num", 1j, k))
            elif name in _FUNCS:
                tokens.append(("func", name, k))
            else:
                raise ParseError(f"unknown identifier {name!r}", k)
            k = j
            continue
        raise ParseError(f"unexpected character {ch!r}", k)
    tokens.append(("end", None, n))
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens = _tokenize(text)
        self.pos = 0

    def peek(self):
        return self.tokens[self.pos]

    def next(self):
        t = self.tokens[self.pos]
        self.pos += 1
        return t

    def expect_op(self, op: str):
        kind, val, at = self.next()
        if kind != "op" or val != op:
            raise ParseError(f"expected {op!r}", at)

    def parse(self) -> Expr:
        e = self.addition()
        kind, _, at = self.peek()
        if kind != "end":
            raise ParseError("trailing input", at)
        return e

    def addition(self) -> Expr:
        e = self.term()
        while True:
            kind, val, _ = self.peek()
            if kind == "op" and val in "+-":
                self.next()
                rhs = self.term()
                e = add(e, rhs) if val == "+" else sub(e, rhs)
            else:
                return e

    def term(self) -> Expr:
        e = self.unary()
        while True:
            kind, val, _ = self.peek()
            if kind == "op" and val in "*/":
                self.next()
                rhs = self.unary()
                e = mul(e, rhs) if val == "*" else div(e, rhs)
            else:
                return e

    def unary(self) -> Expr:
        kind, val, _ = self.peek()
        if kind == "op" and val == "-":
            self.next()
            return neg(self.unary())
        if kind == "op" and val == "+":
            self.next()
            return self.unary()
        return self.power()

    def power(self) -> Expr:
        base = self.atom()
        kind, val, at = self.peek()
        if kind == "op" and val == "^":
            self.next()
            exponent = self.unary_exponent()
            return power(base, exponent)
        return base

    def unary_exponent(self) -> complex:
        # the exponent grammar mirrors unary/power but must fold to a constant
        at = self.peek()[2]
        e = self.unary()
        if not isinstance(e, Const):
            raise ParseError("exponent must be a constant expression", at)
        return e.value

    def atom(self) -> Expr:
        kind, val, at = self.next()
        if kind == "num":
            return Const(val)
        if kind == "var":
            return VAR_Z
        if kind == "func":
            self.expect_op("(")
            arg = self.addition()
            self.expect_op(")")
            if val == "log":
                return log(arg)
            if val == "exp":
                return exp_(arg)
            return sqrt(arg)
        if kind == "op" and val == "(":
            e = self.addition()
            self.expect_op(")")
            return e
        raise ParseError("expected a value", at)


def parse(text: str) -> Expr:
    """Parse expression text over z.  The printed form of any tree parses
    back to an equal tree (see to_text)."""
    return _Parser(text).parse()


def parse_complex(text: str) -> complex:
    """Parse a constant like '0.5-0.25i' using the expression grammar."""
    e = parse(text)
    if not isinstance(e, Const):
        raise ParseError("expected a constant", 0)
    return e.value


def _fmt_float(x: float) -> str:
    return repr(float(x))


def _const_text(c: complex) -> tuple[str, int]:
    """(text, precedence) for a constant; composite values get ADD-level
    precedence so that the printer parenthesizes them inside products."""
    if c.imag == 0.0:
        s = _fmt_float(c.real)
        return s, (40 if c.real >= 0 else 30)
    if c.real == 0.0:
        s = _fmt_float(c.imag) + "i"
        return s, (40 if c.imag >= 0 else 30)
    sign = "+" if c.imag >= 0 else "-"
    return f"{_fmt_float(c.real)}{sign}{_fmt_float(abs(c.imag))}i", 10


def to_text(e: Expr) -> str:
    """Canonical text form; deterministic.  parse(to_text(t)) == t for any
    tree producible by the parser or the smart constructors (the parser is
    left-associative, so right-nested operands of equal precedence are
    parenthesized explicitly)."""

    def render(e: Expr) -> tuple[str, int]:
        if isinstance(e, Const):
            return _const_text(e.value)
        if isinstance(e, Var):
            return "z", 40
        if isinstance(e, Neg):
            s, p = render(e.arg)
            if p <= 20:
                s = f"({s})"
            return f"-{s}", 30
        if isinstance(e, (Add, Sub, Mul, Div)):
            op = {Add: "+", Sub: "-", Mul: "*", Div: "/"}[type(e)]
            prec = e._prec
            ls, lp = render(e.left)
            rs, rp = render(e.right)
            if lp < prec:
                ls = f"({ls})"
            if rp <= prec:
                rs = f"({rs})"
            return f"{ls}{op}{rs}", prec
        if isinstance(e, Pow):
            bs, bp = render(e.base)
            if bp < 40:
                bs = f"({bs})"
            es, ep = _const_text(e.exponent)
            if ep < 40:
                es = f"({es})"
            return f"{bs}^{es}", 25
        if isinstance(e, Log):
            return f"log({render(e.arg)[0]})", 40
        if isinstance(e, Exp):
            return f"exp({render(e.arg)[0]})", 40
        raise TypeError(f"unknown node {e!r}")

    return render(e)[0]
