"""Expression micro-grammar and the scenario file format.

Grammar (whitespace-insensitive)::

    expr    := term (('+' | '-') term)*
    term    := unary (('*' | '/') unary)*
    unary   := ('-' | '+') unary | power
    power   := atom ('^' exponent)?
    exponent:= ['-' | '+'] INT | '(' ['-' | '+'] INT ')'
    atom    := INT | IDENT | '(' expr ')'

`^` binds tightest, so ``-x^2`` is ``-(x^2)``.  Rational literals are written as
integer quotients (``-5/7``).
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

from .symcore import (
    DivisionByZero,
    Kind,
    Name,
    Num,
    Op,
    RatExpr,
    Sym,
    SymbolTable,
    normalize,
)


class ParseError(ValueError):
    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} at offset {offset}")
        self.offset = offset


class UnknownIdentifier(ParseError):
    def __init__(self, name: str, offset: int):
        super().__init__(f"unknown identifier {name!r}", offset)
        self.name = name


class ScenarioError(ValueError):
    """Structural problem in a scenario file (missing key, wrong arity)."""


class ValidationError(ScenarioError):
    """Well-formed scenario that fails a mathematical validity check."""


_TOKEN = re.compile(r"\s*(?:(\d+)|([A-Za-z_][A-Za-z_0-9]*)|(\S))")


def tokenize(text: str) -> list[tuple[str, str, int]]:
    out = []
    pos = 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:  # only trailing whitespace left
            break
        if m.group(1) is not None:
            out.append(("int", m.group(1), m.start(1)))
        elif m.group(2) is not None:
            out.append(("ident", m.group(2), m.start(2)))
        else:
            ch = m.group(3)
            if ch not in "+-*/^()":
                raise ParseError(f"unexpected character {ch!r}", m.start(3))
            out.append(("op", ch, m.start(3)))
        pos = m.end()
    out.append(("end", "", len(text)))
    return out


class _Parser:
    def __init__(self, text: str):
        self.tokens = tokenize(text)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, value: str):
        kind, val, off = self.take()
        if val != value or kind != "op":
            raise ParseError(f"expected {value!r}, found {val or 'end of input'!r}", off)

    def parse(self):
        if self.peek()[0] == "end":
            raise ParseError("empty expression", 0)
        tree = self.expr()
        kind, val, off = self.peek()
        if kind != "end":
            raise ParseError(f"unexpected {val!r}", off)
        return tree

    def expr(self):
        left = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.take()[1]
            left = Op(op, (left, self.term()))
        return left

    def term(self):
        left = self.unary()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = self.take()[1]
            left = Op(op, (left, self.unary()))
        return left

    def unary(self):
        kind, val, _ = self.peek()
        if kind == "op" and val in "+-":
            self.take()
            inner = self.unary()
            return Op("neg", (inner,)) if val == "-" else inner
        return self.power()

    def power(self):
        base = self.atom()
        if self.peek()[0] == "op" and self.peek()[1] == "^":
            self.take()
            return Op("^", (base, self.exponent()))
        return base

    def exponent(self) -> int:
        paren = False
        if self.peek()[1] == "(" and self.peek()[0] == "op":
            self.take()
            paren = True
        sign = 1
        if self.peek()[0] == "op" and self.peek()[1] in "+-":
            sign = -1 if self.take()[1] == "-" else 1
        kind, val, off = self.take()
        if kind != "int":
            raise ParseError("exponent must be an integer literal", off)
        if paren:
            self.expect(")")
        return sign * int(val)

    def atom(self):
        kind, val, off = self.take()
        if kind == "int":
            return Num(Fraction(int(val)))
        if kind == "ident":
            return Name(val, off)
        if kind == "op" and val == "(":
            inner = self.expr()
            self.expect(")")
            return inner
        raise ParseError(f"unexpected {val or 'end of input'!r}", off)


def parse_tree(text: str):
    return _Parser(text).parse()


def parse_expr(text: str, table: SymbolTable, bindings=None):
    """Parse and normalize; identifiers resolve via `bindings`, then `table`."""
    tree = parse_tree(text)
    bindings = dict(bindings or {})
    _check_names(tree, table, bindings)
    return normalize(tree, table, bindings)


def _check_names(tree, table, bindings):
    stack = [tree]
    while stack:
        t = stack.pop()
        if isinstance(t, Name):
            if t.name not in bindings and t.name not in table:
                raise UnknownIdentifier(t.name, t.offset)
        elif isinstance(t, Op):
            stack.extend(a for a in t.args if not isinstance(a, int))


# --------------------------------------------------------------------------- #
# reserved atoms

ABSTRACT_SYMS = (
    Sym("alpha", 1),
    Sym("beta", 1),
    Sym("r00", 2),
    Sym("r0", 1),
    Sym("s0", 1),
    Sym("sigma0", 1),
    Sym("b2", 0),
    Sym("rho", 0),
    Sym("sigma", 0),
    Sym("eps", 0),
    Sym("k", 0),
    Sym("n", 0),
    Sym("E", 0, Kind.UNIT),
    Sym("yi", 1, Kind.VECTOR),
    Sym("bi", 0, Kind.VECTOR),
    Sym("sigmai", 0, Kind.VECTOR),
    Sym("si0", 1, Kind.VECTOR),
)

# vector atom -> what it stands for, component-wise
VECTOR_ATOMS = {"yi": "y^i", "bi": "b^i", "sigmai": "sigma^i", "si0": "s^i_0"}


def abstract_table(dim: int | None = None) -> SymbolTable:
    """Graded atoms, optionally with coordinates x1..xn and fibers y1..yn."""
    syms = list(ABSTRACT_SYMS)
    if dim:
        syms += [Sym(f"x{j}", 0, Kind.COORD) for j in range(1, dim + 1)]
        syms += [Sym(f"y{j}", 1, Kind.FIBER) for j in range(1, dim + 1)]
    return SymbolTable(syms)


def abstract_bindings(table: SymbolTable) -> dict:
    """gamma2 is never a free symbol: it is rewritten on sight."""
    a, b, b2 = table.symbol("alpha"), table.symbol("beta"), table.symbol("b2")
    return {"gamma2": b2 * a * a - b * b}


def concrete_table(dim: int) -> SymbolTable:
    syms = [Sym(f"x{j}", 0, Kind.COORD) for j in range(1, dim + 1)]
    syms += [Sym(f"y{j}", 1, Kind.FIBER) for j in range(1, dim + 1)]
    syms.append(Sym("E", 0, Kind.UNIT))
    return SymbolTable(syms)


# --------------------------------------------------------------------------- #
# key = value files (scenarios, fixtures)


def read_keyvalue(text: str, source: str = "<text>") -> dict[str, object]:
    """`key = <JSON value>` entries; a value may span lines until its brackets
    balance.  Lines starting with '#' are comments."""
    entries: dict[str, object] = {}
    lines = text.splitlines()
    i = 0
    while i < len(lines):
        line = lines[i].strip()
        i += 1
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ScenarioError(f"{source}:{i}: expected 'key = value'")
        key, _, value = line.partition("=")
        key = key.strip()
        if not re.fullmatch(r"[A-Za-z_][A-Za-z_0-9.]*", key):
            raise ScenarioError(f"{source}:{i}: bad key {key!r}")
        value = value.strip()
        if key in entries:
            raise ScenarioError(f"{source}:{i}: duplicate key {key!r}")
        start = i
        while _depth(value) > 0 and i < len(lines):
            value += "\n" + lines[i]
            i += 1
        try:
            entries[key] = json.loads(value)
        except json.JSONDecodeError:
            raise ScenarioError(f"{source}:{start}: value of {key!r} is not valid: {value!r}") from None
    return entries


def _depth(value: str) -> int:
    depth = 0
    in_str = False
    esc = False
    for ch in value:
        if in_str:
            if esc:
                esc = False
            elif ch == "\\":
                esc = True
            elif ch == '"':
                in_str = False
        elif ch == '"':
            in_str = True
        elif ch in "[{":
            depth += 1
        elif ch in "]}":
            depth -= 1
    return depth


def parse_rational(text) -> Fraction:
    if isinstance(text, int):
        return Fraction(text)
    if not isinstance(text, str) or not re.fullmatch(r"\s*[-+]?\d+(\s*/\s*\d+)?\s*", text):
        raise ScenarioError(f"not a rational literal: {text!r}")
    num, _, den = text.partition("/")
    if den and int(den) == 0:
        raise ScenarioError(f"zero denominator in {text!r}")
    return Fraction(int(num), int(den) if den else 1)


@dataclass
class Scenario:
    dim: int
    mode: str
    metric: list[list[str]]
    b: list[str]
    sigma: str
    epsilon: Fraction
    k: Fraction
    points: list[tuple[Fraction, ...]]
    seed: int
    name: str = "scenario"
    table: SymbolTable = field(init=False, repr=False)
    metric_exprs: list[list[RatExpr]] = field(init=False, repr=False)
    b_exprs: list[RatExpr] = field(init=False, repr=False)
    sigma_expr: RatExpr = field(init=False, repr=False)

    def __post_init__(self):
        self.table = concrete_table(self.dim)
        xs = {f"x{j}" for j in range(1, self.dim + 1)}

        def px(text, what):
            if not isinstance(text, str):
                raise ScenarioError(f"{what}: expected an expression string, got {text!r}")
            try:
                e = parse_expr(text, self.table)
            except (ParseError, DivisionByZero) as exc:
                raise ScenarioError(f"{what}: {exc}") from exc
            extra = e.free_names() - xs
            if extra:
                raise ScenarioError(f"{what}: only x1..x{self.dim} may appear, found {sorted(extra)}")
            return e

        self.metric_exprs = [[px(c, f"metric[{i}][{j}]") for j, c in enumerate(row)] for i, row in enumerate(self.metric)]
        self.b_exprs = [px(c, f"b[{i}]") for i, c in enumerate(self.b)]
        self.sigma_expr = px(self.sigma, "sigma")

    def summary(self) -> dict:
        return {
            "name": self.name,
            "dim": self.dim,
            "mode": self.mode,
            "metric": self.metric,
            "b": self.b,
            "sigma": self.sigma,
            "family": {"epsilon": _frac_str(self.epsilon), "k": _frac_str(self.k)},
            "points": [[_frac_str(c) for c in p] for p in self.points],
            "seed": self.seed,
        }

    def with_family(self, epsilon, k) -> "Scenario":
        return Scenario(self.dim, self.mode, self.metric, self.b, self.sigma, Fraction(epsilon), Fraction(k),
                        self.points, self.seed, self.name)

    def with_sigma(self, sigma: str) -> "Scenario":
        return Scenario(self.dim, self.mode, self.metric, self.b, sigma, self.epsilon, self.k,
                        self.points, self.seed, self.name)


def _frac_str(f: Fraction) -> str:
    return str(f.numerator) if f.denominator == 1 else f"{f.numerator}/{f.denominator}"


REQUIRED_KEYS = ("dim", "metric", "b", "sigma", "family", "points")


def scenario_from_text(text: str, name: str = "scenario", validate: bool = True) -> Scenario:
    raw = read_keyvalue(text, name)
    missing = [k for k in REQUIRED_KEYS if k not in raw]
    if missing:
        raise ScenarioError(f"{name}: missing key(s) {', '.join(missing)}")
    unknown = set(raw) - set(REQUIRED_KEYS) - {"mode", "seed", "name"}
    if unknown:
        raise ScenarioError(f"{name}: unknown key(s) {', '.join(sorted(unknown))}")
    dim = raw["dim"]
    if not isinstance(dim, int) or dim < 2:
        raise ScenarioError(f"{name}: dim must be an integer >= 2")
    metric = raw["metric"]
    if not isinstance(metric, list) or len(metric) != dim or any(not isinstance(r, list) or len(r) != dim for r in metric):
        raise ScenarioError(f"{name}: metric must be a {dim}x{dim} array")
    b = raw["b"]
    if not isinstance(b, list) or len(b) != dim:
        raise ScenarioError(f"{name}: b must have {dim} entries")
    fam = raw["family"]
    if not isinstance(fam, dict) or set(fam) != {"epsilon", "k"}:
        raise ScenarioError(f"{name}: family must be {{\"epsilon\": ..., \"k\": ...}}")
    points = raw["points"]
    if not isinstance(points, list) or not points or any(not isinstance(p, list) or len(p) != dim for p in points):
        raise ScenarioError(f"{name}: points must be a non-empty list of {dim}-tuples")
    mode = raw.get("mode", "concrete")
    if mode not in ("abstract", "concrete"):
        raise ScenarioError(f"{name}: mode must be 'abstract' or 'concrete'")
    seed = raw.get("seed", 0)
    if not isinstance(seed, int):
        raise ScenarioError(f"{name}: seed must be an integer")
    sc = Scenario(
        dim=dim,
        mode=mode,
        metric=metric,
        b=b,
        sigma=raw["sigma"],
        epsilon=parse_rational(fam["epsilon"]),
        k=parse_rational(fam["k"]),
        points=[tuple(parse_rational(c) for c in p) for p in points],
        seed=seed,
        name=raw.get("name", name),
    )
    if validate:
        validate_scenario(sc)
    return sc


def parse_scenario(path) -> Scenario:
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    return scenario_from_text(text, path.stem)


def validate_scenario(sc: Scenario) -> None:
    n = sc.dim
    a = sc.metric_exprs
    for i in range(n):
        for j in range(i + 1, n):
            if a[i][j] != a[j][i]:
                raise ValidationError(f"metric is asymmetric: entry ({i + 1},{j + 1}) != ({j + 1},{i + 1})")
    # deferred import: the degeneracy checks need the geometry layers
    from .frame import check_point

    for p in sc.points:
        check_point(sc, p)


def scenario_to_text(sc: Scenario) -> str:
    d = sc.summary()
    lines = [
        f"name = {json.dumps(d['name'])}",
        f"dim = {d['dim']}",
        f"mode = {json.dumps(d['mode'])}",
        f"metric = {json.dumps(d['metric'])}",
        f"b = {json.dumps(d['b'])}",
        f"sigma = {json.dumps(d['sigma'])}",
        f"family = {json.dumps(d['family'])}",
        f"points = {json.dumps(d['points'])}",
        f"seed = {d['seed']}",
    ]
    return "\n".join(lines) + "\n"
