"""The conformal change L -> e^sigma L.

Abstract mode works with the unit atom E = e^sigma and the transformation laws
of the transvected atoms; concrete mode recomputes everything from the changed
metric e^{2 sigma} a_ij and one-form e^sigma b_i (see Frame).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

from . import printed
from .abmetric import ABMetric, Bivector, Derivation, make_family
from .exprparse import abstract_bindings
from .frame import ConformalData, Frame
from .riemann import christoffel
from .symcore import RatExpr, SymbolTable, VecExpr, evaluate

__all__ = [
    "ConformalData",
    "KFamilyResult",
    "apply_conformal",
    "bar",
    "bar_vec",
    "barred_images",
    "cij",
    "dstar",
    "k_by_substitution",
    "k_family",
    "k_im_m",
    "transform_beta_block",
]


def barred_images(t: SymbolTable) -> tuple[dict[str, RatExpr], dict[str, VecExpr]]:
    """Images of the atoms under the change (E > 0).

    Scalars follow from transvecting the tensor-level laws; r0 uses the
    convention r_j = b^i r_ij.
    """
    E = t.symbol("E")
    a, b, b2 = t.symbol("alpha"), t.symbol("beta"), t.symbol("b2")
    s0, r0, r00 = t.symbol("s0"), t.symbol("r0"), t.symbol("r00")
    sig0, rho = t.symbol("sigma0"), t.symbol("rho")
    half = Fraction(1, 2)
    shift = b2 * sig0 - rho * b
    scalars = {
        "alpha": E * a,
        "beta": E * b,
        "r00": E * (r00 + rho * a * a - sig0 * b),
        "s0": s0 + half * shift,
        "r0": r0 - half * shift,
        "rho": rho / E,
    }
    bi, yi, sigi, si0 = (t.symbol(s) for s in ("bi", "yi", "sigmai", "si0"))
    vectors = {
        "si0": VecExpr.from_scalar((si0 + half * (sig0 * bi - b * sigi)) / E),
        "bi": VecExpr.from_scalar(bi / E),
        "yi": VecExpr.from_scalar(yi),
        "sigmai": VecExpr.from_scalar(sigi / (E * E)),
    }
    return scalars, vectors


def bar(e: RatExpr) -> RatExpr:
    scalars, _ = barred_images(e.table)
    return e.subs(scalars)


def bar_vec(v: VecExpr) -> VecExpr:
    scalars, vectors = barred_images(v.table)
    out = VecExpr(v.table)
    for atom, c in v.coeffs.items():
        out = out + vectors[atom] * c.subs(scalars)
    return out


def dstar(M: ABMetric) -> RatExpr:
    d = Derivation(M)
    La, Lb = M.La, M.Lb
    a, b = d.alpha, d.beta
    num = (d.rho * a * a - d.sigma0 * b) * La - a * (d.b2 * d.sigma0 - d.rho * b) * Lb
    return a * b * num / (2 * d._nonzero_omega())


def derived_bindings(M: ABMetric, n=None) -> dict:
    """Values for the derived-quantity identifiers used in printed forms."""
    d = Derivation(M, n)
    out = dict(abstract_bindings(M.table))
    out.update({
        "L": M.L, "La": M.La, "Lb": M.Lb, "Laa": M.Laa, "Laaa": M.Laaa,
        "Omega": d.omega, "A": d.A, "B": d.bigB, "Cstar": d.cstar, "Dstar": dstar(M),
    })
    if n is not None:
        out["n"] = M.table.const(n)
    return out


def dstar_printed(M: ABMetric) -> RatExpr:
    return printed.evaluate_abstract("conformal.Dstar", M.table, derived_bindings(M))


def cij(M: ABMetric) -> Bivector:
    """C^ij = barred B^ij - B^ij, from the transformed atoms."""
    d = Derivation(M)
    La, Lb, Laa = M.La, M.Lb, M.Laa
    a, b = d.alpha, d.beta
    return Bivector(M.table, {
        ("bi", "yi"): a * d.sigma0 * Lb / (2 * La) + a * a * Laa * dstar(M) / (b * La),
        ("sigmai", "yi"): -a * b * Lb / (2 * La),
    })


def k_im_m(M: ABMetric, n=None) -> VecExpr:
    """K^im_m as the three-term combination over b^i, sigma^i, y^i."""
    d = Derivation(M, n)
    a, b, g2 = d.alpha, d.beta, d.gamma2
    om = d._nonzero_omega()
    La = d._nonzero_La()
    La_, Lb, Laa = M.La, M.Lb, M.Laa
    n1 = d.n + 1
    dr00 = d.rho * a * a - d.sigma0 * b
    ds = d.b2 * d.sigma0 - d.rho * b
    om2 = om * om
    two_k = VecExpr(M.table, {
        "bi": n1 * a * Lb / La * d.sigma0
        + a * n1 * a * a * om * Laa / om2 * dr00
        - a * a * n1 * a * a * om * Lb * Laa / (La_ * om2) * ds,
        "sigmai": -n1 * a * Lb / La * b,
        "yi": a * b * g2 * d.A / om2 * dr00
        - (a * a * d.bigB / (La_ * om2) - a**3 * Laa / om) * ds,
    })
    return two_k / 2


def k_by_substitution(M: ABMetric, n=None) -> VecExpr:
    """bar(B^im_m) - B^im_m with the transformation laws of the atoms."""
    bim = Derivation(M, n).bim_m
    return bar_vec(bim) - bim


def k_terms(M: ABMetric, n=None) -> dict[str, RatExpr]:
    """2K split the way the printed family formula groups it (component form)."""
    d = Derivation(M, n)
    t = M.table
    a, b, g2 = d.alpha, d.beta, d.gamma2
    om = d._nonzero_omega()
    La, Lb, Laa = M.La, M.Lb, M.Laa
    n1 = d.n + 1
    bi, yi, sigi = t.symbol("bi"), t.symbol("yi"), t.symbol("sigmai")
    dr00 = d.rho * a * a - d.sigma0 * b
    ds = d.b2 * d.sigma0 - d.rho * b
    om2 = om * om
    return {
        "lead": n1 * a * Lb / La * (d.sigma0 * bi - b * sigi),
        "t1": (a * n1 * a * a * om * Laa / om2 * dr00 - a * a * n1 * a * a * om * Lb * Laa / (La * om2) * ds) * bi,
        "t2": a * b * g2 * d.A * yi / om2 * dr00,
        "t3": -a * a * d.bigB * yi / (La * om2) * ds,
        "t4": a**3 * Laa * yi / om * ds,
    }


def lead_coefficient(M: ABMetric, k=None) -> RatExpr:
    """alpha*L_beta/L_alpha times (alpha^2 - k beta^2), the family's grouping."""
    t = M.table
    a, b = t.symbol("alpha"), t.symbol("beta")
    kk = t.symbol("k") if k is None else t.const(Fraction(k))
    return a * M.Lb / M.La * (a * a - kk * b * b)


@dataclass
class TermDiff:
    term: str
    status: str           # "match" | "mismatch"
    residual: RatExpr
    mismatched_monomials: list[str] = field(default_factory=list)


@dataclass
class KFamilyResult:
    label: str
    derived: VecExpr
    derived_terms: dict[str, RatExpr]
    diffs: list[TermDiff]
    total_residual: RatExpr


def monomial_diff(residual: RatExpr) -> list[str]:
    """Numerator monomials of a residual, printed with coefficients."""
    from .symcore import format_poly

    t = residual.table
    return [format_poly(t, t.ring({m: c})) for m, c in residual.num.terms()]


def k_family(epsilon=None, k=None, n=None, prefix: str = "kfamily", table: SymbolTable | None = None) -> KFamilyResult:
    """Derived 2K for L = alpha + eps beta + k beta^2/alpha against the printed
    lead/t1..t4 terms under `prefix`."""
    M = make_family(epsilon, k, table)
    t = M.table
    derived_terms = k_terms(M, n)
    scalars = derived_bindings(M, n)
    if epsilon is not None:
        scalars["eps"] = t.const(Fraction(epsilon))
    if k is not None:
        scalars["k"] = t.const(Fraction(k))
    diffs = []
    total_printed = t.zero
    keys = ["lead", "t1", "t2", "t3", "t4"]
    if prefix == "randers":
        keys = []
        total_printed = printed.evaluate_abstract("randers.K2", t, scalars)
    for key in keys:
        p = printed.evaluate_abstract(f"{prefix}.{key}", t, scalars)
        total_printed = total_printed + p
        res = derived_terms[key] - p
        diffs.append(TermDiff(key, "match" if res.is_zero() else "mismatch", res,
                              monomial_diff(res) if not res.is_zero() else []))
    total_derived = t.zero
    for v in derived_terms.values():
        total_derived = total_derived + v
    return KFamilyResult(
        label=prefix,
        derived=k_im_m(M, n) * 2,
        derived_terms=derived_terms,
        diffs=diffs,
        total_residual=total_derived - total_printed,
    )


def apply_conformal(frame: Frame) -> Frame:
    """Force the recomputation of the changed metric data."""
    frame.bar_metric, frame.bar_gamma, frame.bar_beta  # noqa: B018
    return frame


# --------------------------------------------------------------------------- #
# tensor-level block, concrete mode


@dataclass
class IdentityResult:
    key: str
    variant: str            # "printed" | "derived"
    residuals: dict         # index tuple -> residual value
    description: str = ""

    @property
    def zero(self) -> bool:
        return all(r.is_zero() for r in self.residuals.values())

    def nonzero(self) -> dict:
        return {k: v for k, v in self.residuals.items() if not v.is_zero()}


def tensor_bindings(frame: Frame) -> tuple[dict, dict]:
    """Scalars and tensors of the original data, symbolic in x, y, E."""
    m, d, c = frame.metric, frame.beta, frame.conf
    n, t = frame.n, frame.table
    delta = [[t.one if i == j else t.zero for j in range(n)] for i in range(n)]
    tensors = {
        ("a", 2): m.a, ("au", 2): m.a_inv, ("b", 1): d.b, ("bu", 1): d.b_up,
        ("sigma", 1): c.sigma_low, ("sigmau", 1): c.sigma_up, ("bcov", 2): d.cov_b,
        ("r", 2): d.r, ("s", 2): d.s, ("su", 2): d.s_up, ("s", 1): d.s_vec, ("r", 1): d.r_vec,
        ("gamma", 3): frame.gamma, ("delta", 2): delta,
        ("y", 1): [t.symbol(f"y{j + 1}") for j in range(n)],
        ("s0u", 1): d.s_up0, ("g00", 1): frame.g00,
    }
    from .frame import alpha_of

    scalars = {
        "alpha": alpha_of(d.alpha2), "beta": d.beta, "b2": d.b2, "r00": d.r00, "r0": d.r0, "s0": d.s0,
        "sigma": c.sigma, "sigma0": c.sigma0, "rho": c.rho, "gamma2": d.gamma2,
    }
    return scalars, tensors


def _residuals(direct, printed_vals: dict) -> dict:
    out = {}
    for idx, pv in printed_vals.items():
        v = direct
        for p in idx:
            # a printed form can carry a stray free index on a scalar identity
            if isinstance(v, list):
                v = v[p]
        out[idx] = v - pv
    return out


def transform_beta_block(frame: Frame, directory=None) -> list[IdentityResult]:
    """Direct recomputation from the changed metric versus closed forms."""
    n, t = frame.n, frame.table
    scalars, tensors = tensor_bindings(frame)
    mb, db = frame.bar_metric, frame.bar_beta
    c = frame.conf
    direct = {
        "conformal.a": mb.a,
        "conformal.b": db.b,
        "conformal.au": mb.a_inv,
        "conformal.bu": db.b_up,
        "conformal.b2": db.b2,
        "conformal.gamma": frame.bar_gamma,
        "conformal.bcov": db.cov_b,
        "conformal.r": db.r,
        "conformal.s": db.s,
        "conformal.su": db.s_up,
        "conformal.sv": db.s_vec,
        "conformal.gamma00": frame.bar_g00,
        "conformal.r00": db.r00,
        "conformal.s0u": db.s_up0,
        "conformal.s0": db.s0,
    }
    results = []
    for key, value in direct.items():
        pv = printed.evaluate_printed(key, t, scalars, tensors, n=n, directory=directory)
        results.append(IdentityResult(key, "printed", _residuals(value, pv)))

    # derived closed forms for the transvected one-form data
    half = Fraction(1, 2)
    E = frame.E
    d = frame.beta
    corrected_su0 = [(d.s_up0[i] + half * (d.b_up[i] * c.sigma0 - d.beta * c.sigma_up[i])) / E for i in range(n)]
    corrected_s0 = d.s0 + half * (d.b2 * c.sigma0 - c.rho * d.beta)
    corrected_r0 = d.r0 - half * (d.b2 * c.sigma0 - c.rho * d.beta)
    results.append(IdentityResult("conformal.s0u", "derived",
                                  {(i,): db.s_up0[i] - corrected_su0[i] for i in range(n)}))
    results.append(IdentityResult("conformal.s0", "derived", {(): db.s0 - corrected_s0}))
    results.append(IdentityResult("conformal.r0", "derived", {(): db.r0 - corrected_r0}))
    return results


# --------------------------------------------------------------------------- #
# two-index quantities in component form


J_ATOMS = {"bi": "bj", "yi": "yj", "sigmai": "sigmaj", "si0": "sj0"}


def ij_table() -> SymbolTable:
    """The abstract table plus a second copy of the vector atoms for index j."""
    from .exprparse import abstract_table
    from .symcore import Kind, Sym

    base = abstract_table()
    return base.extend(*(Sym(J_ATOMS[a], base[a].y_grade, Kind.VECTOR) for a in J_ATOMS))


def bivector_scalar(bv: Bivector) -> RatExpr:
    """sum c (u^i v^j - u^j v^i) over atoms i and their j copies."""
    t = bv.table
    out = t.zero
    for (u, v), c in bv.terms.items():
        out = out + c * (t.symbol(u) * t.symbol(J_ATOMS[v]) - t.symbol(J_ATOMS[u]) * t.symbol(v))
    return out


def bar_ij(e: RatExpr) -> RatExpr:
    """bar() on a scalar that may contain both index copies of the vector atoms."""
    t = e.table
    scalars, vectors = barred_images(t)
    images = dict(scalars)
    for atom, img in vectors.items():
        s = img.to_scalar()
        images[atom] = s
        images[J_ATOMS[atom]] = s.subs({a: t.symbol(J_ATOMS[a]) for a in J_ATOMS})
    return e.subs(images)


def printed_ij(key: str, M: ABMetric, directory=None) -> RatExpr:
    """The (i, j) = (1, 2) component of a printed two-index form, symbolically."""
    t = M.table
    atoms = {("bu", 1): "bi", ("y", 1): "yi", ("sigmau", 1): "sigmai", ("s0u", 1): "si0"}

    def resolver(name):
        return lambda pos: t.symbol(name if pos == (0,) else J_ATOMS[name])

    tensors = {k: resolver(v) for k, v in atoms.items()}
    vals = printed.evaluate_printed(key, t, derived_bindings(M), tensors, n=2, directory=directory)
    return vals[(0, 1)]


# --------------------------------------------------------------------------- #
# concrete recomputation oracles


def k_concrete_residuals(frame: Frame, M: ABMetric, points) -> list[tuple]:
    """(x, y, residuals) of barred B^im_m - B^im_m - K^im_m at pinned points."""
    K = k_im_m(M)
    B = Derivation(M).bim_m
    out = []
    for x, y in points:
        u = frame.bindings(x, y)
        b = frame.bindings(x, y, barred=True)
        kv, bb, bu = u.vector(K), b.vector(B), u.vector(B)
        out.append((x, y, [bb[i] - bu[i] - kv[i] for i in range(frame.n)]))
    return out


def cstar_concrete_residuals(frame: Frame, M: ABMetric, points) -> list[tuple]:
    """barred C* - E (C* + D*) at pinned points."""
    d = Derivation(M)
    D = dstar(M)
    out = []
    for x, y in points:
        u = frame.bindings(x, y)
        b = frame.bindings(x, y, barred=True)
        E = u.target.symbol("E")
        out.append((x, y, [b.scalar(d.cstar) - E * (u.scalar(d.cstar) + u.scalar(D))]))
    return out


def cij_concrete_residuals(frame: Frame, M: ABMetric, points) -> list[tuple]:
    """barred B^ij - B^ij - C^ij at pinned points, for i < j."""
    d = Derivation(M)
    C = cij(M)
    n = frame.n
    out = []
    for x, y in points:
        u = frame.bindings(x, y)
        b = frame.bindings(x, y, barred=True)

        def comps(bv, bind, coef_bind):
            coefs = {pair: coef_bind.scalar(c) for pair, c in bv.terms.items()}
            return {(i, j): bv.component(coefs, bind.vectors, i, j) for i in range(n) for j in range(i + 1, n)}

        bb, bu, cc = comps(d.bij, b, b), comps(d.bij, u, u), comps(C, u, u)
        out.append((x, y, [bb[p] - bu[p] - cc[p] for p in bb]))
    return out
