"""Loading and evaluating the transcribed printed formulas."""

from __future__ import annotations

import hashlib
import itertools
import re
from functools import lru_cache
from importlib import resources
from pathlib import Path

from .exprparse import ParseError, parse_tree, read_keyvalue
from .symcore import Name, Op, SymbolTable, normalize

FIXTURE_FILE = "printed_forms.txt"
MANIFEST_FILE = "MANIFEST.sha256"

_INDEXED = re.compile(r"^([A-Za-z][A-Za-z0-9]*?)_([ijk]+)$")


class FixtureError(ValueError):
    def __init__(self, fixture: str, message: str):
        super().__init__(f"fixture {fixture}: {message}")
        self.fixture = fixture


def default_dir() -> Path:
    return Path(str(resources.files("finsleraudit") / "fixtures"))


def sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def verify_manifest(directory: Path | None = None) -> list[str]:
    """Return the names of fixture files whose checksum does not match."""
    directory = Path(directory or default_dir())
    manifest = directory / MANIFEST_FILE
    bad = []
    for line in manifest.read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        digest, name = line.split(maxsplit=1)
        path = directory / name.strip()
        if not path.exists() or sha256(path) != digest:
            bad.append(name.strip())
    return bad


def write_manifest(directory: Path | None = None) -> None:
    directory = Path(directory or default_dir())
    path = directory / FIXTURE_FILE
    (directory / MANIFEST_FILE).write_text(f"{sha256(path)}  {FIXTURE_FILE}\n", encoding="utf-8")


@lru_cache(maxsize=8)
def _load(directory: str) -> dict[str, str]:
    path = Path(directory) / FIXTURE_FILE
    raw = read_keyvalue(path.read_text(encoding="utf-8"), FIXTURE_FILE)
    out = {}
    for key, text in raw.items():
        if not isinstance(text, str):
            raise FixtureError(key, "value must be an expression string")
        try:
            parse_tree(text)
        except ParseError as exc:
            raise FixtureError(key, str(exc)) from None
        out[key] = text
    return out


def load(directory: Path | None = None) -> dict[str, str]:
    return _load(str(directory or default_dir()))


def text(key: str, directory: Path | None = None) -> str:
    forms = load(directory)
    if key not in forms:
        raise FixtureError(key, "missing")
    return forms[key]


def names_in(tree) -> set[str]:
    out = set()
    stack = [tree]
    while stack:
        t = stack.pop()
        if isinstance(t, Name):
            out.add(t.name)
        elif isinstance(t, Op):
            stack.extend(a for a in t.args if not isinstance(a, int))
    return out


def split_indexed(name: str):
    m = _INDEXED.match(name)
    if not m:
        return None
    return m.group(1), m.group(2)


def free_indices(key: str, directory: Path | None = None) -> str:
    letters = set()
    for name in names_in(parse_tree(text(key, directory))):
        parts = split_indexed(name)
        if parts:
            letters.update(parts[1])
    return "".join(sorted(letters))


def evaluate_printed(key: str, table: SymbolTable, scalars: dict, tensors: dict | None = None,
                     n: int | None = None, directory: Path | None = None) -> dict:
    """Evaluate a printed form component-wise.

    `tensors` maps (base, arity) to a nested list (or callable on an index
    tuple); indexed names in the formula are resolved per assignment of the
    free index letters.  Returns {index tuple: value}; a scalar formula gives
    the single key ().
    """
    tree = parse_tree(text(key, directory))
    names = names_in(tree)
    tensors = tensors or {}
    indexed = {}
    letters = set()
    for name in names:
        if name in scalars or name in table:
            continue
        parts = split_indexed(name)
        if parts is None or (parts[0], len(parts[1])) not in tensors:
            raise FixtureError(key, f"cannot resolve identifier {name!r}")
        indexed[name] = parts
        letters.update(parts[1])
    free = sorted(letters)
    if free and n is None:
        raise FixtureError(key, "indexed formula needs a dimension")
    out = {}
    for combo in itertools.product(range(n or 0), repeat=len(free)) if free else [()]:
        assign = dict(zip(free, combo))
        bind = dict(scalars)
        for name, (base, idx) in indexed.items():
            val = tensors[(base, len(idx))]
            pos = tuple(assign[c] for c in idx)
            if callable(val):
                bind[name] = val(pos)
            else:
                for p in pos:
                    val = val[p]
                bind[name] = val
        out[combo] = normalize(tree, table, bind)
    return out


def evaluate_abstract(key: str, table: SymbolTable, scalars: dict | None = None, directory: Path | None = None):
    """Component form in the abstract table: bu_i, y_i, sigmau_i, s0u_i become
    the vector atoms bi, yi, sigmai, si0."""
    atoms = {("bu", 1): "bi", ("y", 1): "yi", ("sigmau", 1): "sigmai", ("s0u", 1): "si0"}
    tensors = {k: (lambda name: (lambda pos: table.symbol(name)))(v) for k, v in atoms.items()}
    res = evaluate_printed(key, table, dict(scalars or {}), tensors, n=1, directory=directory)
    return next(iter(res.values()))
