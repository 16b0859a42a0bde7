"""Independent concrete oracles: the geodesic spray computed straight from L.

At a pinned rational x the fundamental tensor g_ij = d2(L^2/2)/dy^i dy^j and
the spray 2G^i = g^il (y^r d_l d_r F - d_r F) are built with alpha as a
RootExpr in y, without going through any closed form in the atoms.
"""

from __future__ import annotations

from fractions import Fraction

from .abmetric import ABMetric, Derivation
from .frame import Frame, alpha_of
from .riemann import det_and_inverse, sum_
from .symcore import evaluate


def _pin(frame: Frame, x):
    return {f"x{j + 1}": Fraction(v) for j, v in enumerate(x)}


def spray_from_L(frame: Frame, x, M: ABMetric, barred: bool = False, eps=None, k=None) -> list:
    """2G^i at x, symbolic in y (and E when barred)."""
    n, yt = frame.n, frame.ytable
    pin = _pin(frame, x)
    m = frame.bar_metric if barred else frame.metric
    bs = frame.bar_b if barred else frame.sc.b_exprs

    def at(e):
        return e.subs(pin, yt)

    a = [[at(v) for v in row] for row in m.a]
    da = [[[at(m.dx(v, r)) for v in row] for row in m.a] for r in range(n)]
    b = [at(v) for v in bs]
    db = [[at(m.dx(v, r)) for v in bs] for r in range(n)]
    ys = [yt.symbol(f"y{j + 1}") for j in range(n)]

    def quad(mat):
        return sum_(yt, (mat[i][j] * ys[i] * ys[j] for i in range(n) for j in range(n)))

    def lin(vec):
        return sum_(yt, (vec[i] * ys[i] for i in range(n)))

    q = quad([[at(v) for v in row] for row in frame.metric.a])
    alpha = alpha_of(q)
    if barred:
        alpha = alpha * yt.symbol("E")
    beta = lin(b)
    vals = {
        "alpha": alpha, "beta": beta,
        "eps": yt.const(frame.sc.epsilon if eps is None else Fraction(eps)),
        "k": yt.const(frame.sc.k if k is None else Fraction(k)),
    }
    L = evaluate(M.L, vals, yt)
    La = evaluate(M.La, vals, yt)
    Lb = evaluate(M.Lb, vals, yt)
    # d_r F = L (L_alpha d_r alpha + L_beta d_r beta)
    Fx = [L * (La * quad(da[r]) / (alpha * 2) + Lb * lin(db[r])) for r in range(n)]
    F = L * L / 2
    Fy = [F.diff(f"y{i + 1}") for i in range(n)]
    g = [[Fy[i].diff(f"y{j + 1}") for j in range(n)] for i in range(n)]
    _, g_inv = det_and_inverse(g, yt)
    rhs = []
    for l in range(n):
        mixed = yt.zero
        for r in range(n):
            mixed = Fx[r].diff(f"y{l + 1}") * ys[r] + mixed
        rhs.append(mixed - Fx[l])
    out = []
    for i in range(n):
        acc = yt.zero
        for l in range(n):
            acc = g_inv[i][l] * rhs[l] + acc
        out.append(acc)
    return out


def gamma00_at(frame: Frame, x, barred: bool = False) -> list:
    pin = _pin(frame, x)
    g00 = frame.bar_g00 if barred else frame.g00
    return [v.subs(pin, frame.ytable) for v in g00]


def spray_deviation_from_L(frame: Frame, x, M: ABMetric, barred: bool = False) -> list:
    """B^i = G^i - gamma^i_00 / 2."""
    two_g = spray_from_L(frame, x, M, barred)
    g00 = gamma00_at(frame, x, barred)
    return [(two_g[i] - g00[i]) / 2 for i in range(frame.n)]


def bim_m_from_L(frame: Frame, x, M: ABMetric, barred: bool = False) -> list:
    """(n+1) B^i - (d B^m / d y^m) y^i from the spray of L."""
    n, yt = frame.n, frame.ytable
    B = spray_deviation_from_L(frame, x, M, barred)
    trace = yt.zero
    for m in range(n):
        trace = B[m].diff(f"y{m + 1}") + trace
    ys = [yt.symbol(f"y{j + 1}") for j in range(n)]
    return [B[i] * (n + 1) - trace * ys[i] for i in range(n)]


def residuals_against_closed_forms(frame: Frame, x, M: ABMetric, barred: bool = False) -> dict:
    """Spray-from-L versus the coded B^i, B^ij and B^im_m at one x-point."""
    n = frame.n
    B = spray_deviation_from_L(frame, x, M, barred)
    bind = frame.bindings(x=x, barred=barred)
    d = Derivation(M)
    coded = bind.vector(d.spray_dev)
    out = {"B^i": [B[i] - coded[i] for i in range(n)]}
    ys = bind.vectors["yi"]
    coefs = {pair: bind.scalar(c) for pair, c in d.bij.terms.items()}
    vals = {"si0": bind.vectors["si0"], "bi": bind.vectors["bi"], "yi": ys}
    out["B^ij"] = [
        B[i] * ys[j] - B[j] * ys[i] - d.bij.component(coefs, vals, i, j)
        for i in range(n) for j in range(i + 1, n)
    ]
    # the trace uses the full B^i including its y-derivative, so recompute
    yt = frame.ytable
    trace = yt.zero
    for m in range(n):
        trace = B[m].diff(f"y{m + 1}") + trace
    bim = bind.vector(Derivation(M, n).bim_m)
    out["B^im_m"] = [B[i] * (n + 1) - trace * ys[i] - bim[i] for i in range(n)]
    return out
