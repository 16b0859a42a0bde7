import random
import time
from fractions import Fraction

import pytest

from finsleraudit.exprparse import abstract_bindings, abstract_table, parse_expr, parse_scenario
from finsleraudit.cli import bundled_scenario
from finsleraudit.symcore import Name, Num, Op, SymbolTable, Sym, Kind

TREE_NAMES = ("alpha", "beta", "k", "x1", "y1")


def random_tree(rng: random.Random, depth: int = 3, names=TREE_NAMES):
    """Raw expression tree over a few symbols; may contain zero divisors."""
    if depth == 0 or rng.random() < 0.3:
        if rng.random() < 0.4:
            return Num(Fraction(rng.randint(-4, 4), rng.randint(1, 3)))
        return Name(rng.choice(names))
    op = rng.choice("++--**/^n")
    if op == "n":
        return Op("neg", (random_tree(rng, depth - 1, names),))
    if op == "^":
        return Op("^", (random_tree(rng, depth - 1, names), rng.randint(-2, 3)))
    return Op(op, (random_tree(rng, depth - 1, names), random_tree(rng, depth - 1, names)))


def eval_tree(t, values: dict, const=lambda f: f):
    """Direct evaluation of a raw tree; ZeroDivisionError on a pole."""
    if isinstance(t, Num):
        return const(t.value)
    if isinstance(t, Name):
        return values[t.name]
    if t.op == "neg":
        return -eval_tree(t.args[0], values, const)
    if t.op == "^":
        return eval_tree(t.args[0], values, const) ** t.args[1]
    a, b = eval_tree(t.args[0], values, const), eval_tree(t.args[1], values, const)
    if t.op == "+":
        return a + b
    if t.op == "-":
        return a - b
    if t.op == "*":
        return a * b
    return a / b


@pytest.fixture(scope="session")
def atable():
    return abstract_table(2)


@pytest.fixture
def parse(atable):
    def go(text, table=None):
        t = table or atable
        return parse_expr(text, t, abstract_bindings(t))
    return go


@pytest.fixture(scope="session")
def default_scenario():
    return parse_scenario(bundled_scenario("default"))


@pytest.fixture(scope="session")
def default_frame(default_scenario):
    from finsleraudit.frame import Frame
    return Frame(default_scenario)


@pytest.fixture(scope="session")
def default_report(default_scenario):
    from finsleraudit.audit import run_all
    return run_all(default_scenario)


def small_table() -> SymbolTable:
    return SymbolTable([Sym("x1", 0, Kind.COORD), Sym("y1", 1, Kind.FIBER), Sym("y2", 1, Kind.FIBER)])


@pytest.fixture
def ab():
    """Parser over the bare abstract atoms, the table the metric layer uses."""
    t = abstract_table()
    return lambda text: parse_expr(text, t, abstract_bindings(t))


SUITE_BUDGET = 120.0


def pytest_sessionstart(session):
    session.config._suite_t0 = time.perf_counter()


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    elapsed = time.perf_counter() - config._suite_t0
    verdict = "PASS" if elapsed < SUITE_BUDGET else "FAIL"
    terminalreporter.write_line(f"acceptance 8 (whole suite under {SUITE_BUDGET:.0f} s): {verdict} in {elapsed:.1f} s")
