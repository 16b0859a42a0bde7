"""Exact rational-function kernel with a y-grading and one adjoined square root.

Polynomials are sympy sparse ring elements over QQ (gmpy-backed rationals) in a
graded-lex order.  Everything above that (canonical rational functions, the
quadratic extension, grading, derivations, evaluation) lives here.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from typing import Iterable, Mapping, Union

from sympy.polys.domains import QQ
from sympy.polys.orderings import grlex
from sympy.polys.rings import PolyElement, PolyRing

Poly = PolyElement
Number = Union[int, Fraction]


class SymbolicError(Exception):
    pass


class DivisionByZero(SymbolicError, ZeroDivisionError):
    def __init__(self, message: str = "division by an expression identically zero", offending=None):
        super().__init__(message)
        self.offending = offending


class UnsupportedDerivative(SymbolicError):
    pass


class UngradedSymbol(SymbolicError):
    pass


class TableMismatch(SymbolicError):
    pass


class PerfectSquare(SymbolicError):
    """The radicand is a square in the coefficient field; alpha would be rational."""


class Kind(str, Enum):
    COORD = "coordinate-x"
    FIBER = "fiber-y"
    SCALAR = "scalar-atom"
    VECTOR = "vector-atom"
    UNIT = "unit-atom"


@dataclass(frozen=True)
class Sym:
    name: str
    y_grade: int = 0
    kind: Kind = Kind.SCALAR


class SymbolTable:
    """Ordered, immutable set of symbols; owns the polynomial ring."""

    def __init__(self, syms: Iterable[Sym]):
        syms = tuple(syms)
        names = [s.name for s in syms]
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate symbol names in {names}")
        units = [s for s in syms if s.kind is Kind.UNIT]
        if len(units) > 1:
            raise ValueError("at most one unit atom per table")
        for s in syms:
            if s.y_grade < 0:
                raise ValueError(f"negative grade for {s.name}")
            if s.kind is Kind.COORD and s.y_grade != 0:
                raise ValueError(f"coordinate {s.name} must have grade 0")
            if s.kind is Kind.FIBER and s.y_grade != 1:
                raise ValueError(f"fiber coordinate {s.name} must have grade 1")
        self.syms = syms
        self.unit = units[0] if units else None
        self._index = {s.name: i for i, s in enumerate(syms)}
        self.grades = tuple(s.y_grade for s in syms)
        self.ring = PolyRing(names or ["_"], QQ, grlex)

    def __repr__(self) -> str:
        return f"SymbolTable({[s.name for s in self.syms]})"

    def __eq__(self, other) -> bool:
        return isinstance(other, SymbolTable) and self.syms == other.syms

    def __hash__(self) -> int:
        return hash(self.syms)

    def __contains__(self, name: str) -> bool:
        return name in self._index

    def __getitem__(self, name: str) -> Sym:
        return self.syms[self._index[name]]

    @property
    def names(self) -> list[str]:
        return [s.name for s in self.syms]

    def index(self, name: str) -> int:
        try:
            return self._index[name]
        except KeyError:
            raise KeyError(f"unknown symbol {name!r}") from None

    def gen(self, name: str) -> Poly:
        return self.ring.gens[self.index(name)]

    def symbol(self, name: str) -> "RatExpr":
        return RatExpr(self, self.gen(name), _normal=True)

    def const(self, value) -> "RatExpr":
        return RatExpr(self, self.ring(_qq(value)), _normal=True)

    @property
    def zero(self) -> "RatExpr":
        return RatExpr(self, self.ring.zero, _normal=True)

    @property
    def one(self) -> "RatExpr":
        return RatExpr(self, self.ring.one, _normal=True)

    def monomial_grade(self, monom: tuple[int, ...]) -> int:
        return sum(e * g for e, g in zip(monom, self.grades))

    def extend(self, *syms: Sym) -> "SymbolTable":
        return SymbolTable(self.syms + tuple(syms))

    def of_kind(self, *kinds: Kind) -> list[Sym]:
        return [s for s in self.syms if s.kind in kinds]


def _qq(value):
    if isinstance(value, Fraction):
        return QQ(value.numerator, value.denominator)
    return QQ(value)


def to_fraction(c) -> Fraction:
    return Fraction(int(c.numerator), int(c.denominator))


def poly_grades(table: SymbolTable, p: Poly) -> set[int]:
    return {table.monomial_grade(m) for m in p.itermonoms()}


# --------------------------------------------------------------------------- #
# rational functions


class RatExpr:
    """num/den with gcd(num, den) = 1 and den monic in the ring order."""

    __slots__ = ("table", "num", "den")

    def __init__(self, table: SymbolTable, num: Poly, den: Poly | None = None, *, _normal: bool = False):
        ring = table.ring
        if den is None:
            den = ring.one
        if not den:
            raise DivisionByZero()
        if not _normal:
            if not num:
                den = ring.one
            elif den.is_ground:
                num = num.quo_ground(den.LC)
                den = ring.one
            else:
                num, den = num.cancel(den)
                lc = den.LC
                if lc != 1:
                    num = num.quo_ground(lc)
                    den = den.quo_ground(lc)
        self.table = table
        self.num = num
        self.den = den

    # -- coercion ---------------------------------------------------------- #
    def _coerce(self, other) -> "RatExpr":
        if isinstance(other, RatExpr):
            if other.table is not self.table and other.table != self.table:
                raise TableMismatch(f"{self.table} vs {other.table}")
            return other
        if isinstance(other, (int, Fraction)) or type(other).__name__ == "mpq":
            return self.table.const(other)
        return NotImplemented

    # -- arithmetic -------------------------------------------------------- #
    def __add__(self, other):
        if isinstance(other, RootExpr):
            return NotImplemented
        o = self._coerce(other)
        if o is NotImplemented:
            return NotImplemented
        if not o.num:
            return self
        if not self.num:
            return o
        if self.den == o.den:
            if self.den.is_ground:
                return RatExpr(self.table, self.num + o.num, _normal=True)
            return RatExpr(self.table, self.num + o.num, self.den)
        if o.den.is_ground:
            return RatExpr(self.table, self.num + o.num * self.den, self.den)
        if self.den.is_ground:
            return RatExpr(self.table, self.num * o.den + o.num, o.den)
        g = self.den.gcd(o.den)
        d1 = self.den.exquo(g)
        d2 = o.den.exquo(g)
        return RatExpr(self.table, self.num * d2 + o.num * d1, self.den * d2)

    __radd__ = __add__

    def __neg__(self):
        return RatExpr(self.table, -self.num, self.den, _normal=True)

    def __sub__(self, other):
        if isinstance(other, RootExpr):
            return NotImplemented
        o = self._coerce(other)
        if o is NotImplemented:
            return NotImplemented
        return self + (-o)

    def __rsub__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return NotImplemented
        return o + (-self)

    def __mul__(self, other):
        if isinstance(other, RootExpr):
            return NotImplemented
        o = self._coerce(other)
        if o is NotImplemented:
            return NotImplemented
        if not self.num or not o.num:
            return self.table.zero
        if self.den.is_ground and o.den.is_ground:
            return RatExpr(self.table, self.num * o.num, _normal=True)
        # cross-cancel keeps the intermediate products small
        n1, d2 = _cancel_pair(self.num, o.den)
        n2, d1 = _cancel_pair(o.num, self.den)
        num = n1 * n2
        den = d1 * d2
        lc = den.LC
        if lc != 1:
            num = num.quo_ground(lc)
            den = den.quo_ground(lc)
        return RatExpr(self.table, num, den, _normal=True)

    __rmul__ = __mul__

    def inverse(self) -> "RatExpr":
        if not self.num:
            raise DivisionByZero(offending=self)
        return RatExpr(self.table, self.den, self.num)

    def __truediv__(self, other):
        if isinstance(other, RootExpr):
            return NotImplemented
        o = self._coerce(other)
        if o is NotImplemented:
            return NotImplemented
        if not o.num:
            raise DivisionByZero(offending=o)
        return self * o.inverse()

    def __rtruediv__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return NotImplemented
        return o * self.inverse()

    def __pow__(self, e: int):
        if not isinstance(e, int):
            raise TypeError("only integer exponents are supported")
        if e < 0:
            return self.inverse() ** (-e)
        if e == 0:
            return self.table.one
        return RatExpr(self.table, self.num**e, self.den**e, _normal=True)

    # -- comparison -------------------------------------------------------- #
    def __eq__(self, other) -> bool:
        if isinstance(other, RootExpr):
            return other == self
        o = self._coerce(other)
        if o is NotImplemented:
            return NotImplemented
        return self.num == o.num and self.den == o.den

    def __hash__(self) -> int:
        return hash((frozenset(self.num.items()), frozenset(self.den.items())))

    def is_zero(self) -> bool:
        return not self.num

    def __bool__(self) -> bool:
        return bool(self.num)

    @property
    def is_polynomial(self) -> bool:
        return self.den.is_ground

    @property
    def is_constant(self) -> bool:
        return self.num.is_ground and self.den.is_ground

    def constant_value(self) -> Fraction:
        if not self.is_constant:
            raise ValueError(f"{self} is not constant")
        return to_fraction(self.num.LC if self.num else QQ(0))

    def free_names(self) -> set[str]:
        names = self.table.names
        used = set()
        for p in (self.num, self.den):
            for m in p.itermonoms():
                used.update(names[i] for i, e in enumerate(m) if e)
        return used

    # -- calculus ---------------------------------------------------------- #
    def diff(self, name: str, derivations: Mapping[str, "RatExpr"] | None = None) -> "RatExpr":
        """Total derivative: partial in `name` plus chain terms for `derivations`.

        `derivations` maps a symbol u to its derivative D(u) with respect to
        the same variable (e.g. the unit atom E with D(E) = E*sigma_j).
        """
        sym = self.table[name]
        if sym.kind is Kind.VECTOR:
            raise UnsupportedDerivative(f"cannot differentiate by vector atom {name}")
        out = self._partial(self.table.index(name))
        for u, du in (derivations or {}).items():
            if u == name or du.is_zero():
                continue
            out = out + self._partial(self.table.index(u)) * du
        return out

    def _partial(self, i: int) -> "RatExpr":
        gen = self.table.ring.gens[i]
        dn = self.num.diff(gen)
        if self.den.is_ground:
            return RatExpr(self.table, dn, _normal=True)
        dd = self.den.diff(gen)
        return RatExpr(self.table, dn * self.den - self.num * dd, self.den**2)

    # -- grading ----------------------------------------------------------- #
    def y_grade_split(self) -> dict[int, "RatExpr"]:
        """Split by numerator grade minus the (top) denominator grade."""
        den_grades = poly_grades(self.table, self.den)
        shift = max(den_grades)
        parts: dict[int, Poly] = {}
        ring = self.table.ring
        for m, c in self.num.iterterms():
            g = self.table.monomial_grade(m) - shift
            parts.setdefault(g, ring.zero)
            parts[g] = parts[g] + ring({m: c})
        return {g: RatExpr(self.table, p, self.den) for g, p in sorted(parts.items())}

    def den_is_homogeneous(self) -> bool:
        return len(poly_grades(self.table, self.den)) == 1

    # -- evaluation -------------------------------------------------------- #
    def subs(self, bindings: Mapping[str, "Expr"], target: SymbolTable | None = None) -> "Expr":
        return evaluate(self, bindings, target or self.table)

    def convert(self, target: SymbolTable) -> "RatExpr":
        if target == self.table:
            return self
        return evaluate(self, {}, target)

    # -- printing ---------------------------------------------------------- #
    def __str__(self) -> str:
        num = format_poly(self.table, self.num)
        if self.den == self.table.ring.one:
            return num
        return f"({num})/({format_poly(self.table, self.den)})"

    def __repr__(self) -> str:
        return f"RatExpr({self})"


def _cancel_pair(a: Poly, b: Poly) -> tuple[Poly, Poly]:
    if b.is_ground or a.is_ground:
        return a, b
    g = a.gcd(b)
    if g.is_ground:
        return a, b
    return a.exquo(g), b.exquo(g)


def format_poly(table: SymbolTable, p: Poly) -> str:
    if not p:
        return "0"
    names = table.names
    pieces = []
    for m, c in p.terms():
        c = to_fraction(c)
        factors = []
        for name, e in zip(names, m):
            if e == 1:
                factors.append(name)
            elif e:
                factors.append(f"{name}^{e}")
        mag = abs(c)
        if factors:
            body = "*".join(factors)
            if mag != 1:
                body = f"{_fmt_frac(mag)}*{body}"
        else:
            body = _fmt_frac(mag)
        pieces.append((c < 0, body))
    out = ("-" if pieces[0][0] else "") + pieces[0][1]
    for neg, body in pieces[1:]:
        out += (" - " if neg else " + ") + body
    return out


def _fmt_frac(f: Fraction) -> str:
    return str(f.numerator) if f.denominator == 1 else f"{f.numerator}/{f.denominator}"


# --------------------------------------------------------------------------- #
# quadratic extension


def _is_square_fraction(f: Fraction) -> bool:
    return f >= 0 and math.isqrt(f.numerator) ** 2 == f.numerator and math.isqrt(f.denominator) ** 2 == f.denominator


def _sqrt_fraction(f: Fraction) -> Fraction:
    return Fraction(math.isqrt(f.numerator), math.isqrt(f.denominator))


def is_perfect_square(q: RatExpr) -> bool:
    """True when q is a square in the rational function field of its table."""
    if q.is_zero():
        return True
    if q.is_constant:
        return _is_square_fraction(q.constant_value())
    content = Fraction(1)
    for p, sign in ((q.num, 1), (q.den, -1)):
        if p.is_ground:
            content *= to_fraction(p.LC) ** sign
            continue
        c, factors = p.factor_list()
        if any(mult % 2 for _, mult in factors):
            return False
        content *= to_fraction(c) ** sign
    return _is_square_fraction(content)


class RootExpr:
    """even + odd*alpha with alpha^2 = rewrite, alpha > 0.

    `rewrite` must be a polynomial that is not a square in the field, so that
    (even, odd) is a canonical pair.
    """

    __slots__ = ("table", "even", "odd", "rewrite")

    def __init__(self, even: RatExpr, odd: RatExpr, rewrite: RatExpr):
        if even.table != odd.table or even.table != rewrite.table:
            raise TableMismatch("RootExpr parts live in different tables")
        self.table = even.table
        self.even = even
        self.odd = odd
        self.rewrite = rewrite

    @classmethod
    def alpha(cls, rewrite: RatExpr) -> "RootExpr":
        if not rewrite.is_polynomial:
            raise ValueError("radicand must be a polynomial")
        if is_perfect_square(rewrite):
            raise PerfectSquare(f"{rewrite} is a perfect square")
        t = rewrite.table
        return cls(t.zero, t.one, rewrite)

    def _lift(self, other) -> "RootExpr":
        if isinstance(other, RootExpr):
            if other.rewrite != self.rewrite:
                raise TableMismatch("RootExprs with different radicands")
            return other
        if isinstance(other, RatExpr):
            return RootExpr(other, self.table.zero, self.rewrite)
        if isinstance(other, (int, Fraction)) or type(other).__name__ == "mpq":
            return RootExpr(self.table.const(other), self.table.zero, self.rewrite)
        return NotImplemented

    def __add__(self, other):
        o = self._lift(other)
        if o is NotImplemented:
            return o
        return RootExpr(self.even + o.even, self.odd + o.odd, self.rewrite)

    __radd__ = __add__

    def __neg__(self):
        return RootExpr(-self.even, -self.odd, self.rewrite)

    def __sub__(self, other):
        o = self._lift(other)
        if o is NotImplemented:
            return o
        return self + (-o)

    def __rsub__(self, other):
        o = self._lift(other)
        if o is NotImplemented:
            return o
        return o + (-self)

    def __mul__(self, other):
        o = self._lift(other)
        if o is NotImplemented:
            return o
        p1, q1, p2, q2 = self.even, self.odd, o.even, o.odd
        even = p1 * p2 + q1 * q2 * self.rewrite
        odd = p1 * q2 + q1 * p2
        return RootExpr(even, odd, self.rewrite)

    __rmul__ = __mul__

    def conjugate(self) -> "RootExpr":
        return RootExpr(self.even, -self.odd, self.rewrite)

    def norm(self) -> RatExpr:
        return self.even * self.even - self.odd * self.odd * self.rewrite

    def inverse(self) -> "RootExpr":
        n = self.norm()
        if n.is_zero():
            raise DivisionByZero(offending=self)
        inv = n.inverse()
        return RootExpr(self.even * inv, -self.odd * inv, self.rewrite)

    def __truediv__(self, other):
        o = self._lift(other)
        if o is NotImplemented:
            return o
        return self * o.inverse()

    def __rtruediv__(self, other):
        o = self._lift(other)
        if o is NotImplemented:
            return o
        return o * self.inverse()

    def __pow__(self, e: int):
        if not isinstance(e, int):
            raise TypeError("only integer exponents are supported")
        if e < 0:
            return self.inverse() ** (-e)
        out = self._lift(1)
        base = self
        while e:
            if e & 1:
                out = out * base
            e >>= 1
            if e:
                base = base * base
        return out

    def __eq__(self, other) -> bool:
        o = self._lift(other)
        if o is NotImplemented:
            return NotImplemented
        return self.even == o.even and self.odd == o.odd

    def __hash__(self) -> int:
        if self.odd.is_zero():
            return hash(self.even)
        return hash((self.even, self.odd, self.rewrite))

    def is_zero(self) -> bool:
        return self.even.is_zero() and self.odd.is_zero()

    def __bool__(self) -> bool:
        return not self.is_zero()

    @property
    def is_rational(self) -> bool:
        return self.odd.is_zero()

    def diff(self, name: str, derivations: Mapping[str, RatExpr] | None = None) -> "RootExpr":
        dq = self.rewrite.diff(name, derivations)
        even = self.even.diff(name, derivations)
        odd = self.odd.diff(name, derivations)
        if not dq.is_zero() and not self.odd.is_zero():
            odd = odd + self.odd * dq / (self.rewrite * 2)
        return RootExpr(even, odd, self.rewrite)

    def y_grade_split(self) -> dict[int, RatExpr | "RootExpr"]:
        """Even part by its grade; odd part shifted by the grade of alpha."""
        alpha_grade = max(poly_grades(self.table, self.rewrite.num)) // 2
        out: dict[int, RootExpr] = {}
        for g, part in self.even.y_grade_split().items():
            if part:
                out[g] = self._lift(part)
        for g, part in self.odd.y_grade_split().items():
            if part:
                piece = RootExpr(self.table.zero, part, self.rewrite)
                key = g + alpha_grade
                out[key] = out[key] + piece if key in out else piece
        return dict(sorted(out.items()))

    def subs(self, bindings, target=None):
        raise NotImplementedError("substitute into the abstract form instead")

    def __str__(self) -> str:
        if self.odd.is_zero():
            return str(self.even)
        if self.even.is_zero():
            return f"({self.odd})*alpha"
        return f"{self.even} + ({self.odd})*alpha"

    def __repr__(self) -> str:
        return f"RootExpr({self}; alpha^2 = {self.rewrite})"


Expr = Union[RatExpr, RootExpr]


def is_zero(e) -> bool:
    if isinstance(e, (RatExpr, RootExpr, VecExpr)):
        return e.is_zero()
    return e == 0


# --------------------------------------------------------------------------- #
# vector-valued expressions


class VecExpr:
    """Finitely supported map vector-atom -> scalar coefficient."""

    __slots__ = ("table", "coeffs")

    def __init__(self, table: SymbolTable, coeffs: Mapping[str, Expr] | None = None):
        self.table = table
        clean = {}
        for atom, c in (coeffs or {}).items():
            if table[atom].kind is not Kind.VECTOR:
                raise ValueError(f"{atom} is not a vector atom")
            if not is_zero(c):
                clean[atom] = c
        self.coeffs = dict(sorted(clean.items()))

    @classmethod
    def atom(cls, table: SymbolTable, name: str, coeff=None) -> "VecExpr":
        return cls(table, {name: table.one if coeff is None else coeff})

    def __getitem__(self, atom: str):
        return self.coeffs.get(atom, self.table.zero)

    def atoms(self) -> list[str]:
        return list(self.coeffs)

    def __add__(self, other: "VecExpr") -> "VecExpr":
        out = dict(self.coeffs)
        for a, c in other.coeffs.items():
            out[a] = out[a] + c if a in out else c
        return VecExpr(self.table, out)

    def __neg__(self) -> "VecExpr":
        return VecExpr(self.table, {a: -c for a, c in self.coeffs.items()})

    def __sub__(self, other: "VecExpr") -> "VecExpr":
        return self + (-other)

    def __mul__(self, scalar) -> "VecExpr":
        return VecExpr(self.table, {a: c * scalar for a, c in self.coeffs.items()})

    __rmul__ = __mul__

    def __truediv__(self, scalar) -> "VecExpr":
        return VecExpr(self.table, {a: c / scalar for a, c in self.coeffs.items()})

    def __eq__(self, other) -> bool:
        if not isinstance(other, VecExpr):
            return NotImplemented
        keys = set(self.coeffs) | set(other.coeffs)
        return all(self[a] == other[a] for a in keys)

    def __hash__(self):
        return hash(tuple((a, hash(c)) for a, c in self.coeffs.items()))

    def is_zero(self) -> bool:
        return not self.coeffs

    def map(self, fn) -> "VecExpr":
        return VecExpr(self.table, {a: fn(c) for a, c in self.coeffs.items()})

    def to_scalar(self) -> RatExpr:
        """Component form: sum of coefficient * atom symbol."""
        out = self.table.zero
        for a, c in self.coeffs.items():
            out = out + c * self.table.symbol(a)
        return out

    @classmethod
    def from_scalar(cls, e: RatExpr) -> "VecExpr":
        """Inverse of to_scalar for expressions linear in the vector atoms.

        Raises ValueError when a product of vector atoms (or a vector atom in
        the denominator) appears.
        """
        t = e.table
        vec = [i for i, s in enumerate(t.syms) if s.kind is Kind.VECTOR]
        for m in e.den.itermonoms():
            if any(m[i] for i in vec):
                raise ValueError("vector atom in denominator")
        parts: dict[str, Poly] = {}
        for m, c in e.num.iterterms():
            hits = [(i, m[i]) for i in vec if m[i]]
            if len(hits) != 1 or hits[0][1] != 1:
                raise ValueError(f"non-linear vector monomial in {e}")
            i = hits[0][0]
            rest = list(m)
            rest[i] = 0
            name = t.syms[i].name
            parts[name] = parts.get(name, t.ring.zero) + t.ring({tuple(rest): c})
        return cls(t, {a: RatExpr(t, p, e.den) for a, p in parts.items()})

    def __str__(self) -> str:
        if not self.coeffs:
            return "0"
        return " + ".join(f"({c})*{a}" for a, c in self.coeffs.items())

    def __repr__(self) -> str:
        return f"VecExpr({self})"


# --------------------------------------------------------------------------- #
# evaluation / substitution


def evaluate(e: RatExpr, bindings: Mapping[str, object], target: SymbolTable):
    """Simultaneously substitute `bindings` into e and land in `target`.

    Unbound symbols map to the same-named symbol of `target`.  Values may be
    RatExpr, RootExpr (sharing one radicand) or rationals.  Denominators are
    homogenized so that a single cancellation happens at the end.
    """
    src = e.table
    values: list = []
    for i, s in enumerate(src.syms):
        if s.name in bindings:
            v = bindings[s.name]
        elif s.name in target:
            v = target.symbol(s.name)
        else:
            used = e.free_names()
            if s.name in used:
                raise TableMismatch(f"symbol {s.name!r} has no value in target table")
            v = None
        values.append(v)

    rewrite = None
    for v in values:
        if isinstance(v, RootExpr):
            if rewrite is not None and v.rewrite != rewrite:
                raise TableMismatch("values with different radicands")
            rewrite = v.rewrite
    return _evaluate_fraction(e, values, target, rewrite)


def _to_pair(v, target: SymbolTable):
    """Return (P, Q, c): value = (P + Q*alpha)/c with polynomial parts."""
    ring = target.ring
    if v is None:
        return None
    if isinstance(v, RootExpr):
        if v.table != target:
            raise TableMismatch("value in foreign table")
        c = _lcm(v.even.den, v.odd.den)
        P = v.even.num * c.exquo(v.even.den)
        Q = v.odd.num * c.exquo(v.odd.den)
        return P, Q, c
    if isinstance(v, RatExpr):
        if v.table != target:
            v = v.convert(target)
        return v.num, ring.zero, v.den
    return ring(_qq(v)), ring.zero, ring.one


def _lcm(a: Poly, b: Poly) -> Poly:
    if a == b:
        return a
    if a.is_ground:
        return b
    if b.is_ground:
        return a
    return a * b.exquo(a.gcd(b))


def _evaluate_fraction(e: RatExpr, values, target: SymbolTable, rewrite: RatExpr | None):
    ring = target.ring
    R = rewrite.num.quo_ground(rewrite.den.LC) if rewrite is not None else None
    pairs = [_to_pair(v, target) for v in values]

    def mul(a, b):
        P1, Q1 = a
        P2, Q2 = b
        if R is None:
            return P1 * P2, ring.zero
        if not Q1 and not Q2:
            return P1 * P2, ring.zero
        return P1 * P2 + Q1 * Q2 * R, P1 * Q2 + Q1 * P2

    def eval_poly(p: Poly):
        # max exponent per variable, to homogenize denominators
        maxdeg = [0] * len(values)
        for m in p.itermonoms():
            for i, k in enumerate(m):
                if k > maxdeg[i]:
                    maxdeg[i] = k
        caches: dict[int, list] = {}
        dcaches: dict[int, list] = {}
        for i, k in enumerate(maxdeg):
            if not k:
                continue
            P, Q, c = pairs[i]
            pw = [(ring.one, ring.zero)]
            for _ in range(k):
                pw.append(mul(pw[-1], (P, Q)))
            caches[i] = pw
            cw = [ring.one]
            for _ in range(k):
                cw.append(cw[-1] * c)
            dcaches[i] = cw
        totP, totQ = ring.zero, ring.zero
        for m, coeff in p.iterterms():
            acc = (ring(coeff), ring.zero)
            for i, k in enumerate(m):
                if not maxdeg[i]:
                    continue
                acc = mul(acc, caches[i][k])
                if maxdeg[i] - k:
                    cf = dcaches[i][maxdeg[i] - k]
                    acc = (acc[0] * cf, acc[1] * cf)
            totP += acc[0]
            totQ += acc[1]
        scale = ring.one
        for i, k in enumerate(maxdeg):
            if k:
                scale = scale * dcaches[i][k]
        return (totP, totQ), scale

    (nP, nQ), nscale = eval_poly(e.num)
    (dP, dQ), dscale = eval_poly(e.den)
    # value = (nP + nQ a)/nscale / ((dP + dQ a)/dscale)
    nP, nQ = nP * dscale, nQ * dscale
    if R is not None and dQ:
        # multiply by the conjugate of the denominator
        norm = dP * dP - dQ * dQ * R
        if not norm:
            raise DivisionByZero(offending=e)
        nP, nQ = nP * dP - nQ * dQ * R, nQ * dP - nP * dQ
        den = norm * nscale
    else:
        if not dP:
            raise DivisionByZero(offending=e)
        den = dP * nscale
    even = RatExpr(target, nP, den)
    if R is None:
        if nQ:
            raise AssertionError("odd part without a radicand")
        return even
    return RootExpr(even, RatExpr(target, nQ, den), rewrite)


def substitute(e, bindings: Mapping[str, object], target: SymbolTable | None = None):
    if isinstance(e, VecExpr):
        t = target or e.table
        return VecExpr(t, {a: substitute(c, bindings, t) for a, c in e.coeffs.items()})
    if isinstance(e, RootExpr):
        raise NotImplementedError("substitute into the abstract form instead")
    return evaluate(e, bindings, target or e.table)


def differentiate(e, name: str, derivations: Mapping[str, RatExpr] | None = None):
    if isinstance(e, VecExpr):
        return e.map(lambda c: differentiate(c, name, derivations))
    return e.diff(name, derivations)


def y_grade_split(e):
    return e.y_grade_split()


# --------------------------------------------------------------------------- #
# raw expression trees


@dataclass(frozen=True)
class Num:
    value: Fraction


@dataclass(frozen=True)
class Name:
    name: str
    offset: int = -1


@dataclass(frozen=True)
class Op:
    """op in {'+', '-', '*', '/', 'neg', '^'}; for '^' args[1] is an int."""

    op: str
    args: tuple


def tree_str(t) -> str:
    if isinstance(t, Num):
        v = t.value
        return _fmt_frac(v) if v >= 0 and v.denominator == 1 else f"({_fmt_frac(v)})"
    if isinstance(t, Name):
        return t.name
    if t.op == "neg":
        return f"(-{tree_str(t.args[0])})"
    if t.op == "^":
        base = tree_str(t.args[0])
        if not isinstance(t.args[0], Name):
            base = f"({base})"
        return f"{base}^({t.args[1]})"
    return f"({tree_str(t.args[0])} {t.op} {tree_str(t.args[1])})"


def normalize(tree, table: SymbolTable, bindings: Mapping[str, object] | None = None):
    """Evaluate a raw tree bottom-up into canonical form.

    Names resolve through `bindings` first, then the table.  Already-normal
    values pass through unchanged, which makes normalize idempotent.
    """
    if isinstance(tree, (RatExpr, RootExpr, VecExpr)):
        return tree
    bindings = bindings or {}

    def go(t):
        if isinstance(t, Num):
            return table.const(t.value)
        if isinstance(t, Name):
            if t.name in bindings:
                v = bindings[t.name]
                return table.const(v) if isinstance(v, (int, Fraction)) else v
            if t.name in table:
                return table.symbol(t.name)
            raise KeyError(t.name)
        if isinstance(t, (RatExpr, RootExpr)):
            return t
        if t.op == "neg":
            return -go(t.args[0])
        if t.op == "^":
            base = go(t.args[0])
            try:
                return base ** t.args[1]
            except DivisionByZero as exc:
                raise DivisionByZero(f"division by zero in {tree_str(t)}", offending=t) from exc
        a, b = go(t.args[0]), go(t.args[1])
        if t.op == "+":
            return a + b
        if t.op == "-":
            return a - b
        if t.op == "*":
            return a * b
        if t.op == "/":
            if is_zero(b):
                raise DivisionByZero(f"division by zero: {tree_str(t.args[1])} is identically 0", offending=t.args[1])
            return a / b
        raise ValueError(f"unknown operator {t.op!r}")

    return go(tree)
