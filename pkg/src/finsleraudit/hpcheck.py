"""hp(d): homogeneous polynomial of degree d in the fiber coordinates y.

Two readings are decided.  Graded (abstract) mode treats every atom as an
opaque symbol carrying its y-grade, alpha included.  Concrete mode pins x at
rational points, substitutes the scenario geometry and keeps alpha as the
square root of a_ij y^i y^j.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction

from .exprparse import Scenario
from .frame import Frame, sample_points
from .symcore import (
    DivisionByZero,
    Kind,
    PerfectSquare,
    RatExpr,
    RootExpr,
    VecExpr,
    format_poly,
    poly_grades,
)


class Status(str, Enum):
    HP = "HP"
    NOT_HOMOGENEOUS = "NotHomogeneous"
    NOT_POLYNOMIAL = "NotPolynomial"
    ZERO = "Zero"


class SingularPoint(ValueError):
    pass


@dataclass
class Verdict:
    status: Status
    degree: int
    witness: dict = field(default_factory=dict)
    # polynomial forms per checked x-point, for HP verdicts in concrete mode
    certificate: list = field(default_factory=list, repr=False, compare=False)

    def __str__(self) -> str:
        if self.status is Status.HP:
            return f"HP({self.degree})"
        return self.status.value

    @property
    def ok(self) -> bool:
        return self.status in (Status.HP, Status.ZERO)

    def to_dict(self) -> dict:
        return {"verdict": str(self), "witness": self.witness}


_RANK = {Status.ZERO: 0, Status.HP: 1, Status.NOT_HOMOGENEOUS: 2, Status.NOT_POLYNOMIAL: 3}


def _worst(verdicts: list[Verdict], d: int) -> Verdict:
    if not verdicts:
        return Verdict(Status.ZERO, d)
    worst = max(verdicts, key=lambda v: _RANK[v.status])
    if worst.status is Status.HP:
        certs = [c for v in verdicts for c in v.certificate]
        return Verdict(Status.HP, d, {}, certs)
    return worst


# --------------------------------------------------------------------------- #
# graded mode


def _graded_denominator_factor(e: RatExpr):
    """A factor of the denominator with positive y-grade, or None."""
    t = e.table
    if max(poly_grades(t, e.den)) == 0:
        return None
    _, factors = e.den.factor_list()
    for f, _mult in factors:
        if max(poly_grades(t, f)) > 0:
            return format_poly(t, f)
    return format_poly(t, e.den)


def _check_graded_scalar(e, d: int, label: str = "") -> Verdict:
    if e.is_zero():
        return Verdict(Status.ZERO, d)
    parts = [e.even, e.odd] if isinstance(e, RootExpr) else [e]
    for part in parts:
        factor = None if part.is_zero() else _graded_denominator_factor(part)
        if factor is not None:
            return Verdict(Status.NOT_POLYNOMIAL, d, {"denominator_factor": factor, "component": label})
    grades = sorted(e.y_grade_split())
    if len(grades) > 1:
        return Verdict(Status.NOT_HOMOGENEOUS, d, {"grades": grades, "component": label})
    if grades[0] != d:
        return Verdict(Status.NOT_HOMOGENEOUS, d, {"grades": grades, "expected": d, "component": label})
    return Verdict(Status.HP, d)


def check_abstract(e, d: int) -> Verdict:
    """Graded verdict; vector coefficients are checked at d minus the atom grade."""
    if isinstance(e, VecExpr):
        verdicts = []
        for atom, c in sorted(e.coeffs.items()):
            g = e.table[atom].y_grade
            v = _check_graded_scalar(c, d - g, atom)
            v.degree = d
            verdicts.append(v)
        return _worst(verdicts, d)
    return _check_graded_scalar(e, d)


# --------------------------------------------------------------------------- #
# concrete mode


def euler_test(p: RatExpr, d: int) -> bool:
    """sum_j y^j dp/dy^j == d*p, exactly."""
    t = p.table
    acc = t.zero
    for s in t.of_kind(Kind.FIBER):
        acc = acc + t.symbol(s.name) * p.diff(s.name)
    return (acc - p * d).is_zero()


def _fiber_free(t, poly) -> bool:
    fib = [t.index(s.name) for s in t.of_kind(Kind.FIBER)]
    return all(not any(m[i] for i in fib) for m in poly.itermonoms())


def _nonzero_point(e: RatExpr, n: int, rng: random.Random):
    """A rational y where e (a rational function of y and E) is visibly nonzero."""
    t = e.table
    for _ in range(200):
        y = {f"y{j + 1}": Fraction(rng.randint(-6, 6), rng.randint(1, 3)) for j in range(n)}
        if "E" in t:
            y["E"] = Fraction(1)
        try:
            v = e.subs(y)
        except DivisionByZero:
            continue
        if not v.is_zero():
            return [str(y[f"y{j + 1}"]) for j in range(n)], str(v)
    return None, None


def _different_values(e: RatExpr, n: int, rng: random.Random):
    """Two y points where the (fiber-dependent) e takes different values."""
    t = e.table
    seen = None
    for _ in range(200):
        y = {f"y{j + 1}": Fraction(rng.randint(-6, 6), rng.randint(1, 3)) for j in range(n)}
        if "E" in t:
            y["E"] = Fraction(1)
        v = e.subs(y)
        if seen is None:
            seen = (y, v)
        elif v != seen[1]:
            return [[str(p[f"y{j + 1}"]) for j in range(n)] for p in (seen[0], y)], [str(seen[1]), str(v)]
    return None, None


def _concrete_component(v, d: int, n: int, x, label: str, seed: int) -> Verdict:
    rng = random.Random(seed)
    xs = [str(Fraction(c)) for c in x]
    if isinstance(v, RootExpr):
        if not v.odd.is_zero():
            y, val = _nonzero_point(v.odd, n, rng)
            return Verdict(Status.NOT_POLYNOMIAL, d, {
                "obstruction": "alpha-odd part", "alpha_odd_part": str(v.odd), "alpha_squared": str(v.rewrite),
                "x": xs, "y": y, "odd_value_at_y": val, "component": label,
            })
        v = v.even
    if v.is_zero():
        return Verdict(Status.ZERO, d)
    t = v.table
    if not _fiber_free(t, v.den):
        den = RatExpr(t, v.den, _normal=True)
        ys, vals = _different_values(den, n, rng)
        return Verdict(Status.NOT_POLYNOMIAL, d, {
            "obstruction": "denominator depends on y", "denominator": format_poly(t, v.den),
            "x": xs, "y_points": ys, "denominator_values": vals, "component": label,
        })
    if not euler_test(v, d):
        fib = [t.index(s.name) for s in t.of_kind(Kind.FIBER)]
        grades = sorted({sum(m[i] for i in fib) for m in v.num.itermonoms()})
        return Verdict(Status.NOT_HOMOGENEOUS, d, {"grades": grades, "expected": d, "x": xs, "component": label})
    return Verdict(Status.HP, d, {}, [(tuple(x), label, v)])


def concrete_points(frame: Frame, count: int = 3, seed: int = 0) -> list[tuple]:
    """x-points for concrete checks: scenario points first, then seeded samples."""
    pts = [tuple(p) for p in frame.sc.points]
    if len(pts) < count:
        pts += [x for x, _ in sample_points(frame, count - len(pts), seed)]
    return pts[:count]


def check_concrete(e, d: int, scenario: Scenario | Frame, points=None, count: int = 3,
                   seed: int = 0, barred: bool = False) -> Verdict:
    """Concrete verdict over several pinned x-points (default three)."""
    frame = scenario if isinstance(scenario, Frame) else Frame(scenario)
    n = frame.n
    if isinstance(e, RatExpr) and any(e.table[s].kind is Kind.VECTOR for s in e.free_names()):
        e = VecExpr.from_scalar(e)
    xs = points if points is not None else concrete_points(frame, count, seed)
    verdicts = []
    for k, x in enumerate(xs):
        pin = {f"x{j + 1}": frame.ytable.const(Fraction(c)) for j, c in enumerate(x)}
        try:
            bind = frame.bindings(x=x, barred=barred)
        except (DivisionByZero, PerfectSquare) as exc:
            raise SingularPoint(f"cannot evaluate at x = {list(map(str, x))}: {exc}") from None
        try:
            if isinstance(e, VecExpr):
                comps = bind.vector(e, pin)
                labels = [f"i={i + 1}" for i in range(n)]
            else:
                comps = [bind.scalar(e, pin)]
                labels = [""]
        except DivisionByZero as exc:
            raise SingularPoint(f"division by zero at x = {list(map(str, x))}: {exc}") from None
        for c, label in zip(comps, labels):
            verdicts.append(_concrete_component(c, d, n, x, label, seed + k))
    return _worst(verdicts, d)


def dual_verdicts(e, d: int, scenario, **kw) -> dict:
    return {"graded": check_abstract(e, d), "concrete": check_concrete(e, d, scenario, **kw)}
