import random
from fractions import Fraction

import pytest

from finsleraudit.conformal import k_im_m
from finsleraudit.abmetric import make_family
from finsleraudit.exprparse import abstract_bindings, abstract_table, parse_expr, scenario_from_text
from finsleraudit.frame import Frame, fiber_table
from finsleraudit.hpcheck import SingularPoint, Status, check_abstract, check_concrete, euler_test
from finsleraudit.symcore import RootExpr

T2 = abstract_table(2)


def P(text):
    return parse_expr(text, T2, abstract_bindings(T2))


def rational(v):
    if isinstance(v, RootExpr):
        assert v.odd.is_zero()
        v = v.even
    return v.constant_value()


# -- graded ---------------------------------------------------------------------


def test_graded_randers_increment():
    v = check_abstract(P("(n+1)*alpha*(sigma0*bi - beta*sigmai)"), 2)
    assert v.status is Status.HP and str(v) == "HP(2)"


def test_graded_mixed_grades():
    v = check_abstract(P("r00 + s0"), 2)
    assert v.status is Status.NOT_HOMOGENEOUS
    assert v.witness["grades"] == [1, 2]


def test_graded_wrong_degree():
    v = check_abstract(P("alpha*beta*r00"), 2)
    assert v.status is Status.NOT_HOMOGENEOUS and v.witness["grades"] == [4]


def test_graded_surviving_denominator():
    v = check_abstract(P("alpha^3/(alpha^2 - k*beta^2)"), 1)
    assert v.status is Status.NOT_POLYNOMIAL
    assert P(v.witness["denominator_factor"]) in (P("alpha^2 - k*beta^2"), P("k*beta^2 - alpha^2"))


def test_graded_zero_and_grade_zero_denominator():
    assert check_abstract(P("r00 - r00"), 5).status is Status.ZERO
    assert str(check_abstract(P("r00*b2/(1 + rho^2)"), 2)) == "HP(2)"


def test_graded_vector_uses_atom_grades():
    # y^i has grade 1, b^i grade 0: alpha*y^i and r00*b^i are both hp(2)
    assert check_abstract(P("alpha*yi + r00*bi"), 2).status is Status.HP
    assert check_abstract(P("alpha*bi + r00*yi"), 2).status is Status.NOT_HOMOGENEOUS


# -- euler ----------------------------------------------------------------------


def test_euler_examples():
    t = fiber_table(2)
    P = lambda s: parse_expr(s, t)  # noqa: E731
    assert euler_test(P("y1^2*y2"), 3)
    assert not euler_test(P("y1^2 + y2"), 2)
    assert euler_test(t.zero, 7)


# -- concrete -------------------------------------------------------------------


def test_concrete_gamma00(default_frame):
    for g in default_frame.g00:
        v = check_concrete(P(str(g)), 2, default_frame)
        assert str(v) == "HP(2)"


def test_concrete_bare_alpha(default_frame):
    v = check_concrete(P("alpha"), 1, default_frame)
    assert v.status is Status.NOT_POLYNOMIAL
    w = v.witness
    # the witness replays: the odd part really is nonzero at the reported y
    odd = parse_expr(w["alpha_odd_part"], fiber_table(2))
    y = {f"y{j + 1}": Fraction(c) for j, c in enumerate(w["y"])}
    assert odd.subs(y).constant_value() == Fraction(w["odd_value_at_y"]) != 0


def test_concrete_denominator_witness_replays(default_frame):
    v = check_concrete(P("r00/beta"), 1, default_frame)
    assert v.status is Status.NOT_POLYNOMIAL
    w = v.witness
    den = parse_expr(w["denominator"], fiber_table(2))
    values = [den.subs({f"y{j + 1}": Fraction(c) for j, c in enumerate(p)}).constant_value() for p in w["y_points"]]
    assert [str(x) for x in values] == w["denominator_values"]
    assert values[0] != values[1]


def test_concrete_is_seeded(default_frame):
    a = check_concrete(P("alpha*r0"), 2, default_frame, seed=4)
    b = check_concrete(P("alpha*r0"), 2, default_frame, seed=4)
    assert a.witness == b.witness


def test_concrete_constant_sigma_is_zero(default_scenario):
    fr = Frame(default_scenario.with_sigma("3"))
    K2 = k_im_m(make_family(1, 1), None) * 2
    assert check_concrete(K2, 2, fr).status is Status.ZERO


def test_concrete_singular_point():
    sc = scenario_from_text("""
dim = 2
metric = [["x1", "0"], ["0", "1"]]
b = ["1", "x2"]
sigma = "x1"
family = {"epsilon": "1", "k": "0"}
points = [["1", "0"]]
""")
    # det a vanishes at x1 = 0
    with pytest.raises(SingularPoint):
        check_concrete(P("r00"), 2, Frame(sc), points=[(0, 1)])


@pytest.mark.parametrize("text, d", [("r00*beta", 3), ("alpha^2*s0 + beta*r00", 3), ("r00", 2), ("beta^2 - b2*alpha^2", 2)])
def test_graded_and_concrete_agree_without_bare_alpha(text, d, default_frame):
    assert str(check_abstract(P(text), d)) == str(check_concrete(P(text), d, default_frame)) == f"HP({d})"


# -- certificates ---------------------------------------------------------------


@pytest.mark.parametrize("text, d", [("r00*beta + alpha^2*s0", 3), ("beta*si0 + r00*bi", 2), ("gamma2*r0", 3)])
def test_certificate_soundness_and_scaling(text, d, default_frame):
    e = P(text)
    v = check_concrete(e, d, default_frame)
    assert v.status is Status.HP
    rng = random.Random(9)
    checked = 0
    vector = any(a in text for a in ("si0", "bi", "yi"))
    while checked < 50:
        x, label, poly = v.certificate[checked % len(v.certificate)]
        i = int(label.split("=")[1]) - 1 if label else 0
        y = tuple(Fraction(rng.randint(-6, 6), rng.randint(1, 3)) for _ in range(2))
        if y != (0, 0):
            bind = default_frame.bindings(x, y)
            direct = bind.vector(e)[i] if vector else bind.scalar(e)
            yv = {f"y{j + 1}": c for j, c in enumerate(y)}
            assert rational(direct) == poly.subs(yv).constant_value()
            lam = Fraction(rng.randint(1, 7), rng.randint(1, 5))
            scaled = default_frame.bindings(x, tuple(lam * c for c in y))
            sv = scaled.vector(e)[i] if vector else scaled.scalar(e)
            assert rational(sv) == lam ** d * rational(direct)
            checked += 1
