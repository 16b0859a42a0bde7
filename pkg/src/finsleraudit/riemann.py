"""Riemannian data of alpha and the covariant-derivative family of the one-form."""

from __future__ import annotations

from dataclasses import dataclass, field

from .symcore import DivisionByZero, RatExpr, SymbolTable, SymbolicError


class Singular(SymbolicError):
    pass


Matrix = list[list[RatExpr]]


@dataclass
class MetricData:
    n: int
    table: SymbolTable
    a: Matrix
    a_inv: Matrix
    det_a: RatExpr
    # per coordinate j: {symbol: d(symbol)/dx_j} for symbols with a derivation rule
    derivations: list[dict[str, RatExpr]] = field(default_factory=list)

    def dx(self, e: RatExpr, j: int) -> RatExpr:
        """Total derivative d/dx_{j+1}, honouring derivation rules (e.g. E)."""
        rules = self.derivations[j] if self.derivations else None
        return e.diff(f"x{j + 1}", rules)

    def y(self, i: int) -> RatExpr:
        return self.table.symbol(f"y{i + 1}")

    def alpha2(self) -> RatExpr:
        n = self.n
        return sum_(self.table, (self.a[i][j] * self.y(i) * self.y(j) for i in range(n) for j in range(n)))


def sum_(table: SymbolTable, terms) -> RatExpr:
    out = table.zero
    for t in terms:
        out = out + t
    return out


def det_and_inverse(a: Matrix, table: SymbolTable) -> tuple[RatExpr, Matrix]:
    """Gauss-Jordan over the rational function field."""
    n = len(a)
    m = [list(row) + [table.one if i == j else table.zero for j in range(n)] for i, row in enumerate(a)]
    det = table.one
    for col in range(n):
        piv = next((r for r in range(col, n) if not m[r][col].is_zero()), None)
        if piv is None:
            raise Singular("metric determinant vanishes identically")
        if piv != col:
            m[col], m[piv] = m[piv], m[col]
            det = -det
        p = m[col][col]
        det = det * p
        inv_p = p.inverse()
        m[col] = [v * inv_p for v in m[col]]
        for r in range(n):
            if r != col and not m[r][col].is_zero():
                f = m[r][col]
                m[r] = [vr - f * vc for vr, vc in zip(m[r], m[col])]
    return det, [row[n:] for row in m]


def build_metric(a: Matrix, table: SymbolTable, derivations=None) -> MetricData:
    n = len(a)
    for i in range(n):
        for j in range(i + 1, n):
            if a[i][j] != a[j][i]:
                raise ValueError("metric must be symmetric")
    det, inv = det_and_inverse(a, table)
    return MetricData(n, table, [list(r) for r in a], inv, det, list(derivations or []))


def metric_from_scenario(sc) -> MetricData:
    return build_metric(sc.metric_exprs, sc.table)


def christoffel(m: MetricData) -> list[list[list[RatExpr]]]:
    """gamma[i][j][k] = 1/2 a^{ir} (d_j a_rk + d_k a_rj - d_r a_jk)."""
    n = m.n
    da = [[[m.dx(m.a[r][s], j) for j in range(n)] for s in range(n)] for r in range(n)]
    # first kind: [jk, r]
    first = [[[(da[r][k][j] + da[r][j][k] - da[j][k][r]) / 2 for k in range(n)] for j in range(n)] for r in range(n)]
    g = [[[m.table.zero] * n for _ in range(n)] for _ in range(n)]
    for i in range(n):
        for j in range(n):
            for k in range(j, n):
                v = sum_(m.table, (m.a_inv[i][r] * first[r][j][k] for r in range(n)))
                g[i][j][k] = v
                g[i][k][j] = v
    return g


@dataclass
class BetaData:
    n: int
    b: list[RatExpr]            # b_i
    b_up: list[RatExpr]         # b^i
    b2: RatExpr
    cov_b: Matrix               # cov_b[i][j] = b_{i:j}
    r: Matrix
    s: Matrix
    s_up: Matrix                # s_up[i][j] = s^i_j
    s_vec: list[RatExpr]        # s_j = b_r s^r_j
    r_vec: list[RatExpr]        # r_j = b^i r_ij
    beta: RatExpr
    r00: RatExpr
    r0: RatExpr
    s0: RatExpr
    s_up0: list[RatExpr]        # s^i_0
    alpha2: RatExpr
    gamma2: RatExpr
    gamma: list = field(repr=False, default=None)


def covariant_derivative(m: MetricData, b: list[RatExpr], gamma) -> Matrix:
    n = m.n
    return [
        [m.dx(b[i], j) - sum_(m.table, (b[r] * gamma[r][i][j] for r in range(n))) for j in range(n)]
        for i in range(n)
    ]


def beta_tensors(m: MetricData, b: list[RatExpr], gamma=None) -> BetaData:
    n, t = m.n, m.table
    if len(b) != n:
        raise ValueError(f"one-form has {len(b)} components, expected {n}")
    gamma = gamma if gamma is not None else christoffel(m)
    cov = covariant_derivative(m, b, gamma)
    r = [[(cov[i][j] + cov[j][i]) / 2 for j in range(n)] for i in range(n)]
    s = [[(cov[i][j] - cov[j][i]) / 2 for j in range(n)] for i in range(n)]
    b_up = [sum_(t, (m.a_inv[i][k] * b[k] for k in range(n))) for i in range(n)]
    b2 = sum_(t, (m.a_inv[i][j] * b[i] * b[j] for i in range(n) for j in range(n)))
    s_up = [[sum_(t, (m.a_inv[i][k] * s[k][j] for k in range(n))) for j in range(n)] for i in range(n)]
    s_vec = [sum_(t, (b[k] * s_up[k][j] for k in range(n))) for j in range(n)]
    r_vec = [sum_(t, (b_up[i] * r[i][j] for i in range(n))) for j in range(n)]
    d = BetaData(
        n=n, b=list(b), b_up=b_up, b2=b2, cov_b=cov, r=r, s=s, s_up=s_up, s_vec=s_vec, r_vec=r_vec,
        beta=t.zero, r00=t.zero, r0=t.zero, s0=t.zero, s_up0=[t.zero] * n,
        alpha2=m.alpha2(), gamma2=t.zero, gamma=gamma,
    )
    for key, val in transvect(d, m).items():
        setattr(d, key, val)
    return d


def transvect(d: BetaData, m: MetricData) -> dict:
    """Contract lower indices with y: beta, r00, r0, s0, s^i_0 and gamma^2."""
    n, t = d.n, m.table
    y = [m.y(i) for i in range(n)]
    beta = sum_(t, (d.b[i] * y[i] for i in range(n)))
    r00 = sum_(t, (d.r[i][j] * y[i] * y[j] for i in range(n) for j in range(n)))
    r0 = sum_(t, (d.r_vec[j] * y[j] for j in range(n)))
    s0 = sum_(t, (d.s_vec[j] * y[j] for j in range(n)))
    s_up0 = [sum_(t, (d.s_up[i][j] * y[j] for j in range(n))) for i in range(n)]
    alpha2 = m.alpha2()
    return {
        "beta": beta,
        "r00": r00,
        "r0": r0,
        "s0": s0,
        "s_up0": s_up0,
        "alpha2": alpha2,
        "gamma2": d.b2 * alpha2 - beta * beta,
    }


def gamma00(m: MetricData, gamma) -> list[RatExpr]:
    n, t = m.n, m.table
    return [sum_(t, (gamma[i][j][k] * m.y(j) * m.y(k) for j in range(n) for k in range(n))) for i in range(n)]


def evaluate_at(e: RatExpr, point: dict[str, object]) -> RatExpr:
    """Pin some symbols to values; raises DivisionByZero when a pole is hit."""
    return e.subs(point)


__all__ = [
    "BetaData",
    "DivisionByZero",
    "MetricData",
    "Singular",
    "beta_tensors",
    "build_metric",
    "christoffel",
    "covariant_derivative",
    "det_and_inverse",
    "gamma00",
    "metric_from_scenario",
    "transvect",
]
