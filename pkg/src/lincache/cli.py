"""Command-line front end: ``lincache verify|entropy-table|search|prove|check|expand``.

Exit codes: 0 success, 1 semantic failure (violation, rejection, uncertified
bound), 2 input or budget error.  Every command emits one JSON run manifest,
on stderr or to ``--manifest PATH``.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import sys
import time
from dataclasses import dataclass, field, replace
from fractions import Fraction
from importlib import metadata, resources
from pathlib import Path

import yaml

from . import search as search_mod
from .converse import (
    CertificateError,
    ExpressionError,
    LPBuildError,
    Uncertified,
    UniverseError,
    build_lp,
    check_certificate,
    load_certificate,
    load_universe,
    solve_and_certify,
)
from .converse.certificate import rational_str
from .scheme import (
    ALL_DEMANDS,
    MAIN_CONFIG,
    REPRESENTATIVES,
    SchemeFormatError,
    expand_all_deliveries,
    load_scheme,
    serialize_scheme,
)
from .verify import (
    MissingDeliveryError,
    all_subsets,
    check_decodability,
    check_type_symmetry,
    entropy_profile,
    reference_report,
    varset_name,
)

log = logging.getLogger("lincache")

EXIT_OK, EXIT_FAIL, EXIT_INPUT = 0, 1, 2


class InputError(Exception):
    pass


def tool_version() -> str:
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:
        return "0+unknown"


def data_dir() -> Path:
    return Path(str(resources.files("lincache") / "data"))


def resolve(path: str) -> Path:
    """A path as given, else the same relative path inside the bundled data."""
    p = Path(path)
    if p.exists():
        return p
    for cand in (data_dir() / path, *data_dir().glob(f"*/{path}")):
        if cand.exists():
            return cand
    raise InputError(f"no such file: {path}")


def sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


@dataclass
class RunManifest:
    command: str
    arguments: dict
    inputs: dict[str, str] = field(default_factory=dict)
    tool_version: str = field(default_factory=tool_version)
    wall_time_s: float = 0.0
    exit_code: int = 0
    outcome: dict = field(default_factory=dict)

    def add_input(self, path: Path) -> Path:
        self.inputs[str(path)] = sha256(path)
        return path

    def to_json(self) -> str:
        return json.dumps(self.__dict__, sort_keys=True, default=str)


def _emit(text: str, out: str | None) -> None:
    print(text)
    if out:
        Path(out).write_text(text + "\n", encoding="utf-8")


# -- commands --------------------------------------------------------------

def cmd_verify(args, man: RunManifest) -> int:
    path = man.add_input(resolve(args.scheme))
    sch = load_scheme(path)
    if args.reps_only:
        demands = list(REPRESENTATIVES)
    else:
        sch = expand_all_deliveries(sch)
        demands = list(ALL_DEMANDS)
    report = check_decodability(sch, demands)
    _emit(report.to_json() if args.json else report.to_text(), args.out)
    man.outcome = {
        "accepted": report.ok,
        "checks": len(report.decoded),
        "failures": [f"{d}/user{k}" for d, k in report.failures()],
        "memory": str(report.memory),
        "rate": str(report.rate),
    }
    return EXIT_OK if report.ok else EXIT_FAIL


def cmd_entropy_table(args, man: RunManifest) -> int:
    path = man.add_input(resolve(args.scheme))
    sch = load_scheme(path)
    cfg = sch.config
    rows = []
    if args.all:
        prof = entropy_profile(sch, all_subsets())
        for s, r in sorted(prof.items(), key=lambda kv: (len(kv[0]), varset_name(kv[0]))):
            rows.append({"set": varset_name(s), "rank": r})
        sym_ok, bad = check_type_symmetry(sch)
        mismatches = 0
    else:
        compare = (cfg.subfiles, cfg.memory, cfg.rate) == (MAIN_CONFIG.subfiles, MAIN_CONFIG.memory, MAIN_CONFIG.rate)
        mismatches = 0
        for row in reference_report(sch):
            entry = {"set": row.name, "rank": row.actual}
            if compare:
                entry["expected"] = row.expected
                if row.note:
                    entry["note"] = row.note
                elif not row.ok:
                    mismatches += 1
            rows.append(entry)
        sym_ok, bad = None, []
    if args.json:
        text = json.dumps({"subfiles": cfg.subfiles, "rows": rows, "type_symmetric": sym_ok,
                           "type_counterexamples": [b.__dict__ for b in bad]}, indent=2)
    else:
        lines = [f"entropies in subfile units (t = {cfg.subfiles})"]
        for e in rows:
            exp = f"  expected {e['expected']}" if "expected" in e else ""
            note = f"  [{e['note']}]" if "note" in e else ""
            flag = "  MISMATCH" if "expected" in e and "note" not in e and e["expected"] != e["rank"] else ""
            lines.append(f"  H({e['set']}) = {e['rank']}{exp}{note}{flag}")
        if sym_ok is not None:
            lines.append("type symmetric: " + ("yes" if sym_ok else f"no ({len(bad)} counterexamples)"))
        text = "\n".join(lines)
    _emit(text, args.out)
    man.outcome = {"rows": len(rows), "mismatches": mismatches, "type_symmetric": sym_ok}
    return EXIT_FAIL if (args.check and (mismatches or sym_ok is False)) else EXIT_OK


def cmd_search(args, man: RunManifest) -> int:
    path = man.add_input(resolve(args.spec))
    spec = search_mod.load_search_spec(path)
    if args.target:
        tpath = man.add_input(resolve(args.target))
        spec = replace(spec, target=search_mod.parse_target(tpath.read_text().splitlines()))
    if args.budget is not None:
        spec = replace(spec, budget=args.budget)
    if args.max_results is not None:
        spec = replace(spec, max_results=args.max_results)
    out = open(args.out, "w", encoding="utf-8") if args.out else sys.stdout
    count = 0
    try:
        for res in search_mod.iter_matches(spec, args.resume_from, args.stop, jobs=args.jobs):
            out.write(json.dumps(res.to_dict(spec.config)) + "\n")
            out.flush()
            count += 1
    finally:
        if args.out:
            out.close()
    stop = spec.n_candidates if args.stop is None else min(args.stop, spec.n_candidates)
    man.outcome = {"candidates": max(0, stop - args.resume_from), "matches": count}
    print(f"{count} matches among candidates [{args.resume_from}, {stop})", file=sys.stderr)
    return EXIT_OK


def _objective(args, upath: Path) -> tuple[Fraction, Fraction]:
    if args.objective:
        parts = args.objective.split(",")
        if len(parts) != 2:
            raise InputError("--objective takes 'a,b'")
        try:
            return Fraction(parts[0]), Fraction(parts[1])
        except ValueError as exc:
            raise InputError(f"bad --objective {args.objective!r}") from exc
    data = yaml.safe_load(upath.read_text())
    if isinstance(data, dict) and "objective" in data:
        a, b = data["objective"]
        return Fraction(str(a)), Fraction(str(b))
    raise InputError("no objective: pass --objective a,b or set 'objective' in the universe file")


def cmd_prove(args, man: RunManifest) -> int:
    upath = man.add_input(resolve(args.universe))
    u = load_universe(upath)
    obj = _objective(args, upath)
    lp = build_lp(u, obj, allow_large=args.allow_large)
    print(lp.summary(), file=sys.stderr)
    try:
        sol = solve_and_certify(lp)
    except Uncertified as exc:
        print(str(exc))
        man.outcome = {"certified": False, "numeric_optimum": exc.optimum}
        return EXIT_FAIL
    print(f"certified: {sol.bound}")
    print(f"numeric optimum {sol.optimum:.9g}; certificate has {len(sol.certificate.steps)} steps")
    if args.emit_cert:
        cert = sol.certificate
        cert.universe_ref = None
        Path(args.emit_cert).write_text(cert.dump(), encoding="utf-8")
    man.outcome = {"certified": True, "bound": str(sol.bound), "c": rational_str(sol.bound.c),
                   "steps": len(sol.certificate.steps)}
    return EXIT_OK


def cmd_check(args, man: RunManifest) -> int:
    cpath = man.add_input(resolve(args.cert))
    cert = load_certificate(cpath)
    u = None
    if args.universe:
        u = load_universe(man.add_input(resolve(args.universe)))
    elif cert.universe is None:
        if cert.universe_ref:
            raise InputError(f"universe {cert.universe_ref!r} not found; pass --universe")
        raise InputError("certificate names no universe; pass --universe")
    result = check_certificate(cert, u)
    _emit(json.dumps(result.to_dict(), indent=2) if args.json else result.to_text(), None)
    man.outcome = {"accepted": result.ok, "target": str(result.target),
                   "derived_c": None if result.derived is None else rational_str(result.derived)}
    return EXIT_OK if result.ok else EXIT_FAIL


def cmd_expand(args, man: RunManifest) -> int:
    path = man.add_input(resolve(args.scheme))
    sch = expand_all_deliveries(load_scheme(path), overwrite=args.overwrite)
    text = serialize_scheme(sch)
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    man.outcome = {"demands": len(sch.deliveries)}
    return EXIT_OK


# -- entry point -----------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="lincache", description="Linear coded-caching workbench for N = K = 3.")
    p.add_argument("-v", "--verbose", action="store_true")
    p.add_argument("--manifest", help="write the run manifest here instead of stderr")
    sub = p.add_subparsers(dest="command", required=True)

    v = sub.add_parser("verify", help="check zero-error decodability of a scheme")
    v.add_argument("scheme")
    mode = v.add_mutually_exclusive_group()
    mode.add_argument("--all-demands", action="store_true", help="expand and check all 27 demands (default)")
    mode.add_argument("--reps-only", action="store_true", help="check the five representative demands only")
    v.add_argument("--json", action="store_true")
    v.add_argument("--out")
    v.set_defaults(func=cmd_verify)

    e = sub.add_parser("entropy-table", help="entropy profile of a scheme's caches")
    e.add_argument("scheme")
    e.add_argument("--all", action="store_true", help="all 63 subsets of files and caches, with type symmetry")
    e.add_argument("--check", action="store_true", help="exit 1 on a mismatch or broken type symmetry")
    e.add_argument("--json", action="store_true")
    e.add_argument("--out")
    e.set_defaults(func=cmd_entropy_table)

    s = sub.add_parser("search", help="enumerate symmetric cache seeds against entropy targets")
    s.add_argument("spec")
    s.add_argument("--resume-from", type=int, default=0, metavar="IDX")
    s.add_argument("--stop", type=int, metavar="IDX")
    s.add_argument("--jobs", type=int, default=1)
    s.add_argument("--target", help="override the spec's targets with a target file")
    s.add_argument("--budget", type=int)
    s.add_argument("--max-results", type=int)
    s.add_argument("--out", help="JSON-lines output (default stdout)")
    s.set_defaults(func=cmd_search)

    pr = sub.add_parser("prove", help="solve the entropy LP and extract a certificate")
    pr.add_argument("universe")
    pr.add_argument("--objective", metavar="A,B")
    pr.add_argument("--emit-cert", metavar="PATH")
    pr.add_argument("--allow-large", action="store_true")
    pr.set_defaults(func=cmd_prove)

    c = sub.add_parser("check", help="check a certificate exactly")
    c.add_argument("cert")
    c.add_argument("universe", nargs="?")
    c.add_argument("--json", action="store_true")
    c.set_defaults(func=cmd_check)

    x = sub.add_parser("expand", help="write the all-demand scheme from the representatives")
    x.add_argument("scheme")
    x.add_argument("-o", "--out")
    x.add_argument("--overwrite", action="store_true", help="replace deliveries already present")
    x.set_defaults(func=cmd_expand)
    return p


INPUT_ERRORS = (InputError, OSError, SchemeFormatError, MissingDeliveryError, KeyError, UniverseError,
                CertificateError, ExpressionError, LPBuildError, search_mod.BudgetExceeded, yaml.YAMLError,
                ValueError)


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    arguments = {k: v for k, v in vars(args).items() if k not in ("func", "manifest")}
    man = RunManifest(args.command, arguments)
    start = time.perf_counter()
    try:
        code = args.func(args, man)
    except INPUT_ERRORS as exc:
        print(f"lincache {args.command}: error: {exc}", file=sys.stderr)
        man.outcome = {"error": str(exc)}
        code = EXIT_INPUT
    man.wall_time_s = round(time.perf_counter() - start, 3)
    man.exit_code = code
    if args.manifest:
        Path(args.manifest).write_text(man.to_json() + "\n", encoding="utf-8")
    else:
        print(man.to_json(), file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
