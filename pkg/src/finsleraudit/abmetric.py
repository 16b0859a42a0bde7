"""(alpha, beta)-metrics in abstract mode.

L is a rational function of the graded atoms alpha and beta.  Every derived
quantity lives in the abstract table: scalars are RatExpr, free-index
quantities are VecExpr over the atoms y^i, b^i, sigma^i, s^i_0.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property

from .exprparse import abstract_bindings, abstract_table, parse_expr
from .symcore import DivisionByZero, RatExpr, SymbolTable, VecExpr


def _param(table: SymbolTable, value, name: str) -> RatExpr:
    if value is None:
        return table.symbol(name)
    if isinstance(value, RatExpr):
        return value
    return table.const(Fraction(value))


class ABMetric:
    """L(alpha, beta) with its partials computed once."""

    def __init__(self, L: RatExpr, name: str = "L", epsilon=None, k=None):
        self.table = L.table
        self.L = L
        self.name = name
        self.epsilon = epsilon
        self.k = k
        self.La = L.diff("alpha")
        self.Lb = L.diff("beta")
        self.Laa = self.La.diff("alpha")
        self.Laaa = self.Laa.diff("alpha")

    @classmethod
    def from_text(cls, text: str, table: SymbolTable | None = None, name: str = "L") -> "ABMetric":
        table = table or abstract_table()
        return cls(parse_expr(text, table, abstract_bindings(table)), name)

    def __repr__(self) -> str:
        return f"ABMetric({self.name}: {self.L})"

    def homogeneity_defect(self) -> RatExpr:
        """alpha*L_alpha + beta*L_beta - L; zero for a degree-one metric."""
        a, b = self.table.symbol("alpha"), self.table.symbol("beta")
        return a * self.La + b * self.Lb - self.L

    def partials(self) -> dict[str, RatExpr]:
        return {"L_alpha": self.La, "L_beta": self.Lb, "L_alphaalpha": self.Laa, "L_alphaalphaalpha": self.Laaa}

    def specialize(self, **params) -> "ABMetric":
        """Fix family parameters (eps, k) to rationals."""
        vals = {name: self.table.const(Fraction(v)) for name, v in params.items()}
        eps = params.get("eps", self.epsilon)
        k = params.get("k", self.k)
        return ABMetric(self.L.subs(vals), self.name, eps, k)


def make_family(epsilon=None, k=None, table: SymbolTable | None = None) -> ABMetric:
    """L = alpha + eps*beta + k*beta^2/alpha; None leaves a parameter symbolic."""
    table = table or abstract_table()
    a, b = table.symbol("alpha"), table.symbol("beta")
    eps = _param(table, epsilon, "eps")
    kk = _param(table, k, "k")
    L = a + eps * b + kk * b * b / a
    label = f"family(eps={'eps' if epsilon is None else epsilon}, k={'k' if k is None else k})"
    return ABMetric(L, label, epsilon, k)


CASES = {
    "randers": (1, 0),
    "beta2": (0, 1),
    "matsumoto1": (1, 1),
    "square": (2, 1),
}


def kropina(table: SymbolTable | None = None) -> ABMetric:
    table = table or abstract_table()
    a, b = table.symbol("alpha"), table.symbol("beta")
    return ABMetric(a * a / b, "kropina")


class Bivector:
    """Antisymmetric two-index quantity: sum of c * (u^i v^j - u^j v^i)."""

    def __init__(self, table: SymbolTable, terms: dict[tuple[str, str], RatExpr]):
        self.table = table
        self.terms = {pair: c for pair, c in terms.items() if not c.is_zero()}

    def component(self, coef_values, u_vals: dict[str, list], i: int, j: int):
        """coef_values: already-evaluated coefficients keyed like `terms`."""
        out = 0
        for (u, v), c in coef_values.items():
            out = out + c * (u_vals[u][i] * u_vals[v][j] - u_vals[u][j] * u_vals[v][i])
        return out

    def is_zero(self) -> bool:
        return not self.terms

    def __str__(self) -> str:
        if not self.terms:
            return "0"
        return " + ".join(f"({c})*({u}^i {v}^j - {u}^j {v}^i)" for (u, v), c in self.terms.items())


@dataclass
class SprayPackage:
    cstar: RatExpr
    spray_dev: VecExpr
    bij: Bivector
    omega: RatExpr
    A: RatExpr
    bigB: RatExpr
    bim_m: VecExpr


class Derivation:
    """Formulas built on one ABMetric in one abstract table."""

    def __init__(self, M: ABMetric, n=None):
        self.M = M
        t = self.t = M.table
        self.alpha = t.symbol("alpha")
        self.beta = t.symbol("beta")
        self.b2 = t.symbol("b2")
        self.gamma2 = self.b2 * self.alpha**2 - self.beta**2
        self.r00 = t.symbol("r00")
        self.r0 = t.symbol("r0")
        self.s0 = t.symbol("s0")
        self.sigma0 = t.symbol("sigma0")
        self.rho = t.symbol("rho")
        self.n = _param(t, n, "n")

    @cached_property
    def omega(self) -> RatExpr:
        M = self.M
        return self.beta**2 * M.La + self.alpha * self.gamma2 * M.Laa

    @cached_property
    def A(self) -> RatExpr:
        M, a = self.M, self.alpha
        return a * M.La * M.Laaa + 3 * M.La * M.Laa - 3 * a * M.Laa**2

    @cached_property
    def bigB(self) -> RatExpr:
        M, a, b, g2 = self.M, self.alpha, self.beta, self.gamma2
        return (
            a * b * g2 * M.La * M.Lb * M.Laaa
            + b * ((3 * g2 - b**2) * M.La - 4 * a * g2 * M.Laa) * M.Lb * M.Laa
            + self.omega * M.L * M.Laa
        )

    def _nonzero_omega(self) -> RatExpr:
        if self.omega.is_zero():
            raise DivisionByZero("Omega vanishes identically for this metric", offending=self.omega)
        return self.omega

    def _nonzero_La(self) -> RatExpr:
        if self.M.La.is_zero():
            raise DivisionByZero("L_alpha vanishes identically", offending=self.M.La)
        return self.M.La

    @cached_property
    def cstar(self) -> RatExpr:
        M, a, b = self.M, self.alpha, self.beta
        return a * b * (self.r00 * M.La - 2 * a * self.s0 * M.Lb) / (2 * self._nonzero_omega())

    @cached_property
    def spray_dev(self) -> VecExpr:
        """B^i over y^i, b^i, s^i_0."""
        M, a, b = self.M, self.alpha, self.beta
        La = self._nonzero_La()
        c = self.cstar
        return VecExpr(self.t, {
            "si0": a * M.Lb / La,
            "yi": c * (b * M.Lb / (a * M.L) - M.Laa / La),
            "bi": c * a * a * M.Laa / (b * La),
        })

    @cached_property
    def bij(self) -> Bivector:
        M, a, b = self.M, self.alpha, self.beta
        La = self._nonzero_La()
        return Bivector(self.t, {
            ("si0", "yi"): a * M.Lb / La,
            ("bi", "yi"): a * a * M.Laa * self.cstar / (b * La),
        })

    @cached_property
    def bim_m(self) -> VecExpr:
        """B^im_m over s^i_0, b^i, y^i (r0 = b^i r_ij y^j)."""
        M, a, b, n = self.M, self.alpha, self.beta, self.n
        om = self._nonzero_omega()
        La = self._nonzero_La()
        om2 = om * om
        return VecExpr(self.t, {
            "si0": (n + 1) * a * M.Lb / La,
            "bi": (n + 1) * a**3 * om * M.Laa * self.r00 / (2 * om2)
            - (n + 1) * a**4 * om * M.Lb * M.Laa * self.s0 / (La * om2),
            "yi": a * b * self.gamma2 * self.A * self.r00 / (2 * om2)
            - a * a * self.bigB * self.s0 / (La * om2)
            - a**3 * M.Laa * self.r0 / om,
        })

    def package(self) -> SprayPackage:
        return SprayPackage(self.cstar, self.spray_dev, self.bij, self.omega, self.A, self.bigB, self.bim_m)


def cstar(M: ABMetric) -> RatExpr:
    return Derivation(M).cstar


def spray_deviation(M: ABMetric) -> VecExpr:
    return Derivation(M).spray_dev


def bij(M: ABMetric) -> Bivector:
    return Derivation(M).bij


def omega_A_B(M: ABMetric) -> tuple[RatExpr, RatExpr, RatExpr]:
    d = Derivation(M)
    return d.omega, d.A, d.bigB


def bim_m(M: ABMetric, n=None) -> VecExpr:
    return Derivation(M, n).bim_m
