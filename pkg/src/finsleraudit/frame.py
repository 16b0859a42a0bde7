"""Concrete mode: bind the abstract atoms to a scenario's geometry.

A Frame computes the Riemannian data of a scenario symbolically in x (and y),
for both the original and the conformally changed metric, and hands out
atom bindings either symbolically or pinned at rational points.  alpha is a
RootExpr over the radicand a_ij y^i y^j.
"""

from __future__ import annotations

import random
from fractions import Fraction
from functools import cached_property

from .abmetric import ABMetric, Derivation, make_family
from .exprparse import Scenario, ValidationError
from .riemann import (
    BetaData,
    MetricData,
    beta_tensors,
    build_metric,
    christoffel,
    det_and_inverse,
    gamma00,
    sum_,
)
from .symcore import (
    DivisionByZero,
    Kind,
    PerfectSquare,
    RatExpr,
    RootExpr,
    Sym,
    SymbolTable,
    VecExpr,
    evaluate,
)


def fiber_table(dim: int) -> SymbolTable:
    syms = [Sym(f"y{j}", 1, Kind.FIBER) for j in range(1, dim + 1)]
    syms.append(Sym("E", 0, Kind.UNIT))
    return SymbolTable(syms)


def alpha_of(q: RatExpr):
    """+sqrt(q) as a RootExpr; rational radicands are made polynomial first."""
    if q.is_constant:
        v = q.constant_value()
        if v <= 0:
            raise DivisionByZero("alpha^2 is not positive at this point", offending=q)
        try:
            return RootExpr.alpha(q)
        except PerfectSquare:
            from math import isqrt
            return q.table.const(Fraction(isqrt(v.numerator), isqrt(v.denominator)))
    if q.is_polynomial:
        return RootExpr.alpha(q)
    t = q.table
    d = RatExpr(t, q.den, _normal=True)
    rad = RatExpr(t, q.num * q.den)
    root = RootExpr.alpha(rad)
    return root / d


class ConformalData:
    """sigma, sigma_j, sigma^i, sigma_0 and rho = sigma_r b^r."""

    def __init__(self, m: MetricData, sigma: RatExpr, b_up: list[RatExpr]):
        n, t = m.n, m.table
        self.sigma = sigma
        self.sigma_low = [m.dx(sigma, j) for j in range(n)]
        self.sigma_up = [sum_(t, (m.a_inv[i][j] * self.sigma_low[j] for j in range(n))) for i in range(n)]
        self.sigma0 = sum_(t, (self.sigma_low[j] * m.y(j) for j in range(n)))
        self.rho = sum_(t, (self.sigma_low[r] * b_up[r] for r in range(n)))


class Frame:
    def __init__(self, sc: Scenario):
        self.sc = sc
        self.n = sc.dim
        self.table = sc.table
        self.ytable = fiber_table(sc.dim)
        self.E = self.table.symbol("E")

    # -- original data ----------------------------------------------------- #
    @cached_property
    def metric(self) -> MetricData:
        return build_metric(self.sc.metric_exprs, self.table)

    @cached_property
    def gamma(self):
        return christoffel(self.metric)

    @cached_property
    def beta(self) -> BetaData:
        return beta_tensors(self.metric, self.sc.b_exprs, self.gamma)

    @cached_property
    def conf(self) -> ConformalData:
        return ConformalData(self.metric, self.sc.sigma_expr, self.beta.b_up)

    @cached_property
    def g00(self) -> list[RatExpr]:
        return gamma00(self.metric, self.gamma)

    # -- conformally changed data, recomputed from scratch ----------------- #
    @cached_property
    def bar_metric(self) -> MetricData:
        E = self.E
        rules = [{"E": E * sj} for sj in self.conf.sigma_low]
        a = [[E * E * v for v in row] for row in self.sc.metric_exprs]
        return build_metric(a, self.table, rules)

    @cached_property
    def bar_gamma(self):
        return christoffel(self.bar_metric)

    @cached_property
    def bar_b(self) -> list[RatExpr]:
        return [self.E * v for v in self.sc.b_exprs]

    @cached_property
    def bar_beta(self) -> BetaData:
        return beta_tensors(self.bar_metric, self.bar_b, self.bar_gamma)

    @cached_property
    def bar_g00(self) -> list[RatExpr]:
        return gamma00(self.bar_metric, self.bar_gamma)

    # -- bindings ---------------------------------------------------------- #
    def _raw(self, barred: bool) -> tuple[dict, dict]:
        d = self.bar_beta if barred else self.beta
        c = self.conf
        n = self.n
        t = self.table
        ys = [t.symbol(f"y{j + 1}") for j in range(n)]
        sigma_up = c.sigma_up
        if barred:
            # sigma^i with respect to the changed metric
            sigma_up = [sum_(t, (self.bar_metric.a_inv[i][j] * c.sigma_low[j] for j in range(n))) for i in range(n)]
        rho = sum_(t, (c.sigma_low[r] * d.b_up[r] for r in range(n)))
        scalars = {
            "beta": d.beta, "r00": d.r00, "r0": d.r0, "s0": d.s0, "b2": d.b2,
            "sigma0": c.sigma0, "rho": rho, "sigma": c.sigma,
        }
        vectors = {"yi": ys, "bi": d.b_up, "sigmai": sigma_up, "si0": d.s_up0}
        return scalars, vectors

    def bindings(self, x=None, y=None, barred: bool = False, eps=None, k=None) -> "Bindings":
        """Atom values; symbolic in whatever of x, y is left as None."""
        scalars, vectors = self._raw(barred)
        alpha2 = self.metric.alpha2()
        if x is None and y is None:
            target = self.table
            pin = {}
        else:
            target = self.ytable
            pin = {}
            if x is not None:
                pin.update({f"x{j + 1}": Fraction(v) for j, v in enumerate(x)})
            if y is not None:
                pin.update({f"y{j + 1}": Fraction(v) for j, v in enumerate(y)})
            if x is None:
                raise ValueError("pinning y requires pinning x")

        def at(e: RatExpr):
            return e.subs(pin, target) if pin else e

        out = {name: at(v) for name, v in scalars.items()}
        alpha = alpha_of(at(alpha2))
        if barred:
            alpha = alpha * target.symbol("E")
        out["alpha"] = alpha
        out["n"] = target.const(self.n)
        out["eps"] = target.const(self.sc.epsilon if eps is None else Fraction(eps))
        out["k"] = target.const(self.sc.k if k is None else Fraction(k))
        vec = {name: [at(v) for v in vals] for name, vals in vectors.items()}
        return Bindings(target, out, vec, self.n)


class Bindings:
    def __init__(self, target: SymbolTable, scalars: dict, vectors: dict, n: int):
        self.target = target
        self.scalars = scalars
        self.vectors = vectors
        self.n = n

    def component(self, i: int, extra: dict | None = None) -> dict:
        out = dict(self.scalars)
        for name, vals in self.vectors.items():
            out[name] = vals[i]
        if extra:
            out.update(extra)
        return out

    def scalar(self, e: RatExpr, extra: dict | None = None):
        vals = dict(self.scalars)
        if extra:
            vals.update(extra)
        return evaluate(e, vals, self.target)

    def vector(self, v, extra: dict | None = None) -> list:
        """Components of a VecExpr (or a component-form scalar) for i = 1..n."""
        e = v.to_scalar() if isinstance(v, VecExpr) else v
        return [evaluate(e, self.component(i, extra), self.target) for i in range(self.n)]


# --------------------------------------------------------------------------- #
# point validation and sampling


def check_point(sc: Scenario, p, L: ABMetric | None = None) -> None:
    """Reject x-points where the data is undefined, det a = 0 or Omega = 0."""
    yt = fiber_table(sc.dim)
    pin = {f"x{j + 1}": Fraction(v) for j, v in enumerate(p)}
    label = "(" + ", ".join(str(Fraction(v)) for v in p) + ")"
    try:
        a = [[e.subs(pin, yt) for e in row] for row in sc.metric_exprs]
        b = [e.subs(pin, yt) for e in sc.b_exprs]
        sc.sigma_expr.subs(pin, yt)
    except DivisionByZero:
        raise ValidationError(f"scenario data singular at point {label}") from None
    try:
        _, inv = det_and_inverse(a, yt)
    except Exception:
        raise ValidationError(f"metric singular at point {label}") from None
    n = sc.dim
    ys = [yt.symbol(f"y{j + 1}") for j in range(n)]
    q = sum_(yt, (a[i][j] * ys[i] * ys[j] for i in range(n) for j in range(n)))
    beta = sum_(yt, (b[i] * ys[i] for i in range(n)))
    b2 = sum_(yt, (inv[i][j] * b[i] * b[j] for i in range(n) for j in range(n)))
    M = L or make_family(sc.epsilon, sc.k)
    vals = {"alpha": alpha_of(q), "beta": beta, "b2": b2, "eps": sc.epsilon, "k": sc.k}
    try:
        om = evaluate(Derivation(M).omega, vals, yt)
    except DivisionByZero:
        raise ValidationError(f"Omega undefined at point {label}") from None
    if om.is_zero():
        raise ValidationError(f"Omega vanishes identically in y at point {label}")


def random_rational(rng: random.Random, lo: int = -4, hi: int = 4, max_den: int = 3) -> Fraction:
    return Fraction(rng.randint(lo, hi), rng.randint(1, max_den))


def sample_points(frame: Frame, count: int, seed: int, accept=None, max_tries: int = 2000):
    """Seeded rational (x, y) pairs; `accept(x, y)` may raise to reject.

    By default points where the family of the scenario is singular are skipped.
    """
    if accept is None:
        accept = regular_filter(frame)
    rng = random.Random(seed)
    out = []
    tries = 0
    n = frame.n
    while len(out) < count:
        tries += 1
        if tries > max_tries:
            raise RuntimeError(f"could not find {count} admissible sample points")
        x = tuple(random_rational(rng) for _ in range(n))
        y = tuple(Fraction(rng.randint(-5, 5), rng.randint(1, 2)) for _ in range(n))
        if all(v == 0 for v in y):
            continue
        try:
            check_point(frame.sc, x)
            accept(x, y)
        except (ValidationError, DivisionByZero, PerfectSquare):
            continue
        out.append((x, y))
    return out


def regular_filter(frame: Frame, metrics=None):
    """accept(x, y) for sample_points: beta, L, L_alpha and Omega must not vanish."""
    metrics = metrics or [make_family(frame.sc.epsilon, frame.sc.k)]
    probes = []
    for M in metrics:
        d = Derivation(M)
        probes += [d.beta, M.L, M.La, d.omega]

    def accept(x, y):
        bind = frame.bindings(x, y)
        for e in probes:
            if bind.scalar(e).is_zero():
                raise ValidationError(f"singular sample point x={x}, y={y}")

    return accept
