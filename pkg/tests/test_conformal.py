from fractions import Fraction

import pytest

from finsleraudit.abmetric import Derivation, kropina, make_family
from finsleraudit.conformal import (
    bar,
    bar_vec,
    bivector_scalar,
    cij,
    cstar_concrete_residuals,
    dstar,
    ij_table,
    k_by_substitution,
    k_concrete_residuals,
    k_im_m,
    k_terms,
    lead_coefficient,
    transform_beta_block,
)
from finsleraudit.exprparse import concrete_table, parse_expr
from finsleraudit.frame import Frame, sample_points
from finsleraudit.riemann import beta_tensors, build_metric, christoffel
from finsleraudit.symcore import Kind, Sym, VecExpr

NO_SIGMA = {"sigma0": 0, "rho": 0}


def drop_sigma(v: VecExpr) -> VecExpr:
    return VecExpr(v.table, {a: c.subs(NO_SIGMA) for a, c in v.coeffs.items() if a != "sigmai"})


def test_constant_sigma_changes_nothing_in_K():
    for M in (make_family(), make_family(1, 0), kropina()):
        assert drop_sigma(k_im_m(M)).is_zero()


def test_scale_weights(ab):
    M = make_family()
    E = M.table.symbol("E")
    assert bar(M.L) == E * M.L
    assert bar(M.La) == M.La and bar(M.Lb) == M.Lb
    assert bar(M.Laa) * E == M.Laa
    # with sigma constant the spray deviation scales like alpha s^i_0
    d = Derivation(M)
    assert drop_sigma(bar_vec(d.bim_m) - d.bim_m).is_zero()


@pytest.mark.parametrize("M", [make_family(1, 0), kropina(), make_family(2, 1)])
def test_K_by_substitution(M):
    assert k_by_substitution(M) == k_im_m(M)


def test_K_by_substitution_symbolic_family():
    M = make_family()
    assert k_by_substitution(M) == k_im_m(M)


def test_K_terms_sum_to_K():
    M = make_family()
    total = M.table.zero
    for v in k_terms(M).values():
        total = total + v
    assert total == (k_im_m(M) * 2).to_scalar()


def test_randers_forms(ab):
    M = make_family(1, 0)
    assert dstar(M) == ab("alpha*((rho*alpha^2 - sigma0*beta) - alpha*(b2*sigma0 - rho*beta))/(2*beta)")
    assert (k_im_m(M) * 2).to_scalar() == ab("(n+1)*alpha*(sigma0*bi - beta*sigmai)")
    assert cij(M).terms == {("bi", "yi"): ab("alpha*sigma0/2"), ("sigmai", "yi"): ab("-alpha*beta/2")}


def test_randers_cij_by_hand():
    # B^ij = alpha (s^i_0 y^j - s^j_0 y^i) for Randers; change it by hand
    t = ij_table()
    M = make_family(1, 0, t)
    bij = Derivation(M).bij
    from finsleraudit.conformal import bar_ij
    diff = bar_ij(bivector_scalar(bij)) - bivector_scalar(bij)
    assert diff == bivector_scalar(cij(M))


def test_lead_coefficient_is_grade_three(ab):
    M = make_family()
    lc = lead_coefficient(M)
    assert lc == ab("eps*alpha^3 + 2*k*alpha^2*beta")
    assert sorted(lc.y_grade_split()) == [3]


def test_dstar_is_change_of_cstar(default_frame):
    M = make_family(1, 1)
    pts = sample_points(default_frame, 4, 7)
    for _, _, rs in cstar_concrete_residuals(default_frame, M, pts):
        assert all(r.is_zero() for r in rs)


def test_K_recomputed_from_changed_data(default_frame):
    for M in (make_family(1, 1), kropina()):
        pts = sample_points(default_frame, 4, 3)
        for _, _, rs in k_concrete_residuals(default_frame, M, pts):
            assert all(r.is_zero() for r in rs)


def test_tensor_block(default_frame):
    results = {(r.key, r.variant): r for r in transform_beta_block(default_frame)}
    wrong = {key for key, r in results.items() if not r.zero}
    assert wrong == {("conformal.s0u", "printed"), ("conformal.s0", "printed")}
    assert results[("conformal.s0u", "derived")].zero
    assert results[("conformal.r0", "derived")].zero


def test_tensor_block_zero_sigma():
    from finsleraudit.cli import bundled_scenario
    from finsleraudit.exprparse import parse_scenario

    fr = Frame(parse_scenario(bundled_scenario("zero_sigma")))
    assert all(r.zero for r in transform_beta_block(fr))


def test_two_changes_compose():
    """e^{s1} then e^{s2} equals e^{s1+s2}, with two independent scale symbols."""
    T = concrete_table(2).extend(Sym("F", 0, Kind.SCALAR))
    P = lambda s: parse_expr(s, T)  # noqa: E731
    E, F = T.symbol("E"), T.symbol("F")
    a = [[P("1 + x2^2"), P("x1")], [P("x1"), P("2 + x1^2")]]
    b = [P("x2"), P("x1 + 1")]
    s1, s2 = P("x1*x2"), P("x1 - 3*x2")
    grad = lambda s: [s.diff("x1"), s.diff("x2")]  # noqa: E731
    g1, g2, g12 = grad(s1), grad(s2), grad(s1 + s2)
    scale2 = lambda f: [[f * f * v for v in row] for row in a]  # noqa: E731

    two = build_metric(scale2(E * F), T, [{"E": E * g1[j], "F": F * g2[j]} for j in range(2)])
    one = build_metric(scale2(E), T, [{"E": E * g12[j]} for j in range(2)])
    G2, G1 = christoffel(two), christoffel(one)
    assert all(G2[i][j][k] == G1[i][j][k] for i in range(2) for j in range(2) for k in range(2))
    d2 = beta_tensors(two, [E * F * v for v in b], G2)
    d1 = beta_tensors(one, [E * v for v in b], G1)
    # E stands for e^{s1+s2} in `one` and E F for the same factor in `two`
    for M2, M1 in ((d2.r, d1.r), (d2.s, d1.s)):
        for i in range(2):
            for j in range(2):
                assert M2[i][j] == M1[i][j].subs({"E": E * F})


def test_K_by_substitution_rational_parameters():
    M = make_family(Fraction(1, 2), Fraction(-1, 3))
    assert k_by_substitution(M) == k_im_m(M)
