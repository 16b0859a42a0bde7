"""Command-line front end.

Exit codes: 0 all checks pass, 3 findings only (artifact consistent, printed
forms not), 1 any FAIL, 2 input error.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from . import __version__, printed
from .abmetric import CASES, Derivation, kropina, make_family
from .audit import CASE_NAMES, DEFAULT_SEED, FAIL, PASS, R0_CONVENTION, SCHEMA_VERSION, TENSOR_ANCHORS, _Builder, run_all
from .conformal import cij, dstar, k_concrete_residuals, k_im_m
from .exprparse import (
    ParseError,
    ScenarioError,
    UnknownIdentifier,
    abstract_bindings,
    abstract_table,
    parse_expr,
    parse_scenario,
)
from .frame import Frame, sample_points
from .hpcheck import SingularPoint, check_abstract, check_concrete
from .symcore import DivisionByZero, SymbolicError

EXIT_OK, EXIT_FAIL, EXIT_INPUT, EXIT_FINDINGS = 0, 1, 2, 3
INPUT_ERRORS = (OSError, ScenarioError, ParseError, UnknownIdentifier, DivisionByZero, SingularPoint)


@dataclass
class CliConfig:
    command: str
    scenario: Path | None = None
    output: Path | None = None
    format: str = "text"
    seed: int | None = None
    case: str | None = None
    fixtures: Path | None = None


def bundled_scenario(name: str = "default") -> Path:
    return Path(str(resources.files("finsleraudit") / "scenarios" / f"{name}.scn"))


def _load_scenario(cfg: CliConfig):
    return parse_scenario(cfg.scenario or bundled_scenario())


def _emit(cfg: CliConfig, text: str) -> None:
    if cfg.output:
        Path(cfg.output).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _check_fixtures(cfg: CliConfig) -> list[str]:
    try:
        return printed.verify_manifest(cfg.fixtures)
    except FileNotFoundError:
        return [printed.MANIFEST_FILE]


# --------------------------------------------------------------------------- #


def cmd_audit(cfg: CliConfig) -> int:
    sc = _load_scenario(cfg)
    bad = _check_fixtures(cfg)
    for name in bad:
        print(f"warning: fixture {name} does not match its checksum", file=sys.stderr)
    seed = cfg.seed if cfg.seed is not None else (sc.seed or DEFAULT_SEED)
    cases = None
    if cfg.case:
        cases = [cfg.case]
    report = run_all(sc, seed=seed, cases=cases, directory=cfg.fixtures)
    if cfg.format == "json":
        d = report.to_dict()
        d["fixtures_verified"] = not bad
        _emit(cfg, json.dumps(d, indent=2) + "\n")
    else:
        _emit(cfg, report.to_text())
    return report.exit_code


def cmd_hpcheck(cfg: CliConfig, expr: str, d: int) -> int:
    sc = _load_scenario(cfg)
    table = abstract_table(sc.dim)
    e = parse_expr(expr, table, abstract_bindings(table))
    graded = check_abstract(e, d)
    seed = cfg.seed if cfg.seed is not None else (sc.seed or DEFAULT_SEED)
    concrete = check_concrete(e, d, sc, seed=seed)
    ok = graded.ok and concrete.ok
    if cfg.format == "json":
        doc = {
            "schema_version": SCHEMA_VERSION,
            "expression": expr,
            "degree": d,
            "scenario": sc.name,
            "seed": seed,
            "graded": graded.to_dict(),
            "concrete": concrete.to_dict(),
            "exit_code": EXIT_OK if ok else EXIT_FAIL,
        }
        _emit(cfg, json.dumps(doc, indent=2) + "\n")
    else:
        lines = [
            f"expression: {expr}",
            f"degree:     {d}",
            f"graded:     {graded}",
            f"concrete:   {concrete}  (scenario {sc.name}, seed {seed})",
        ]
        for label, v in (("graded", graded), ("concrete", concrete)):
            if v.witness:
                lines.append(f"{label} witness: {json.dumps(v.witness, sort_keys=True)}")
        _emit(cfg, "\n".join(lines) + "\n")
    return EXIT_OK if ok else EXIT_FAIL


def derive_quantities(case: str) -> dict[str, str]:
    if case == "kropina-ext":
        M = kropina()
    elif case == "family":
        M = make_family()
    else:
        M = make_family(*CASES[case])
    dv = Derivation(M)
    out = {
        "L": str(M.L), "L_alpha": str(M.La), "L_beta": str(M.Lb),
        "L_alphaalpha": str(M.Laa), "L_alphaalphaalpha": str(M.Laaa),
        "Omega": str(dv.omega), "A": str(dv.A), "B": str(dv.bigB), "Cstar": str(dv.cstar),
        "B^i": str(dv.spray_dev), "B^ij": str(dv.bij), "B^im_m": str(dv.bim_m),
        "Dstar": str(dstar(M)), "C^ij": str(cij(M)), "2K^im_m": str(k_im_m(M) * 2),
    }
    return out


def cmd_derive(cfg: CliConfig) -> int:
    case = cfg.case or "family"
    q = derive_quantities(case)
    if cfg.format == "json":
        doc = {"schema_version": SCHEMA_VERSION, "case": case, "conventions": {"r0": R0_CONVENTION}, "quantities": q}
        _emit(cfg, json.dumps(doc, indent=2) + "\n")
    else:
        lines = [f"case: {case}", f"convention: {R0_CONVENTION}"]
        lines += [f"{k} = {v}" for k, v in q.items()]
        _emit(cfg, "\n".join(lines) + "\n")
    return EXIT_OK


SELFTEST_SCENARIOS = ("default", "warped", "zero_sigma")
SELFTEST_K_POINTS = 5


def cmd_selftest(cfg: CliConfig) -> int:
    """Bundled invariant suite; output depends only on the seed."""
    seed = DEFAULT_SEED if cfg.seed is None else cfg.seed
    lines: list[str] = []
    failed = False

    def report(name: str, ok: bool, detail: str = "") -> None:
        nonlocal failed
        failed |= not ok
        lines.append(f"{'ok' if ok else 'FAILED':<7} {name}" + (f": {detail}" if detail else ""))

    bad = _check_fixtures(cfg)
    if bad:
        for name in bad:
            msg = f"fixture {name} does not match MANIFEST.sha256"
            print(msg, file=sys.stderr)
            report("fixtures", False, msg)
        _emit(cfg, "\n".join(lines) + "\n")
        return EXIT_FAIL
    try:
        printed.load(cfg.fixtures)
        report("fixtures", True, "checksums and parse")
    except printed.FixtureError as exc:
        print(str(exc), file=sys.stderr)
        report("fixtures", False, str(exc))
        _emit(cfg, "\n".join(lines) + "\n")
        return EXIT_FAIL

    # the comparator must not accept a sign-flipped printed form
    b = _Builder(seed)
    M = make_family()
    rec = b.compare("selftest.flip", "sign-flipped L_alpha", M.La,
                    -printed.evaluate_abstract("family.L_alpha", M.table, {}, cfg.fixtures))
    report("comparator rejects a perturbed form", rec.status == FAIL)

    for name in SELFTEST_SCENARIOS:
        sc = parse_scenario(bundled_scenario(name))
        r = run_all(sc, seed=seed, cases=None if name == "default" else ["randers"], directory=cfg.fixtures)
        fails = [x.id for x in r.records if x.status == FAIL]
        report(f"audit {name}: {len(r.records)} checks, no FAIL", not fails, ", ".join(fails))
        if name == "zero_sigma":
            tensor = {key.split(".")[1] for key in TENSOR_ANCHORS}
            conf = [x.id for x in r.records
                    if x.id.startswith("conformal.") and x.id.split(".")[1] in tensor and x.status != PASS]
            report("sigma = 0 leaves every concrete conformal identity exact", not conf, ", ".join(conf))
        fr = Frame(sc)
        pts = sample_points(fr, SELFTEST_K_POINTS, seed)
        res = k_concrete_residuals(fr, make_family(sc.epsilon, sc.k), pts)
        ok = all(v.is_zero() for _, _, rs in res for v in rs)
        report(f"K consistency on {name} at {len(pts)} seeded points", ok)
    lines.append(f"selftest {'failed' if failed else 'passed'} (seed {seed})")
    _emit(cfg, "\n".join(lines) + "\n")
    return EXIT_FAIL if failed else EXIT_OK


# --------------------------------------------------------------------------- #


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="finsleraudit", description="Audit (alpha, beta)-metric spray and conformal-change formulas.")
    p.add_argument("--version", action="version", version=f"finsleraudit {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, scenario=True):
        if scenario:
            sp.add_argument("--scenario", type=Path, help="scenario file (default: bundled default)")
        sp.add_argument("--output", type=Path, help="write the report here instead of stdout")
        sp.add_argument("--format", choices=("text", "json"), default="text")
        sp.add_argument("--seed", type=int, help=f"sampling seed (default: scenario seed, else {DEFAULT_SEED})")

    a = sub.add_parser("audit", help="run every check and report")
    common(a)
    a.add_argument("--case", choices=CASE_NAMES, help="restrict the family cases to one")
    a.add_argument("--fixtures", type=Path, help="directory holding the printed-form fixtures")

    h = sub.add_parser("hpcheck", help="graded and concrete hp(d) verdicts for an expression")
    common(h)
    h.add_argument("expr")
    h.add_argument("-d", "--degree", type=int, required=True)

    d = sub.add_parser("derive", help="print the derived closed forms for a case")
    common(d, scenario=False)
    d.add_argument("--case", choices=CASE_NAMES, default="family")

    s = sub.add_parser("selftest", help="run the bundled invariant suite")
    common(s, scenario=False)
    s.add_argument("--fixtures", type=Path, help="directory holding the printed-form fixtures")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    cfg = CliConfig(
        command=args.command,
        scenario=getattr(args, "scenario", None),
        output=args.output,
        format=args.format,
        seed=args.seed,
        case=getattr(args, "case", None),
        fixtures=getattr(args, "fixtures", None),
    )
    try:
        if cfg.command == "audit":
            return cmd_audit(cfg)
        if cfg.command == "hpcheck":
            return cmd_hpcheck(cfg, args.expr, args.degree)
        if cfg.command == "derive":
            return cmd_derive(cfg)
        return cmd_selftest(cfg)
    except INPUT_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except SymbolicError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
