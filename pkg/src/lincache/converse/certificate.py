"""Proof certificates for linear bounds a*M + b*R >= c and their exact checker.

A certificate is a list of weighted steps.  Shannon steps are instances of
``I(A;B|C) >= 0`` or ``H(A|B) >= 0``; equality steps are either dependency
equalities (both sides have the same closure), symmetry rewrites, or one of the
universe's declared equalities.  Every step may carry rewrites that explain how
its terms relate to the displayed chain; these are checked for licence but the
sum itself is always taken over canonical term classes.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Any

import yaml

from .expr import ExpressionError, LinearForm, Relation, parse_relation, parse_side, parse_target
from .universe import Perm, Universe, UniverseError, load_universe, parse_perm, parse_universe, perm_str

KINDS = ("shannon", "dependency-equality", "common-info-equality", "symmetry-rewrite")
RULES = ("sym", "dec")


class CertificateError(ValueError):
    pass


def parse_rational(value: Any) -> Fraction:
    if isinstance(value, bool) or isinstance(value, float):
        raise CertificateError(f"rational {value!r} must be an integer or 'p/q' string")
    if isinstance(value, int):
        return Fraction(value)
    text = str(value).strip()
    if "." in text or "e" in text.lower():
        raise CertificateError(f"rational {value!r} must be written as p/q")
    try:
        return Fraction(text)
    except ValueError as exc:
        raise CertificateError(f"bad rational {value!r}") from exc


def rational_str(x: Fraction) -> str:
    return str(x.numerator) if x.denominator == 1 else f"{x.numerator}/{x.denominator}"


@dataclass
class Rewrite:
    lhs: str
    rhs: str
    rule: str
    pibar: Perm | None = None
    pihat: Perm | None = None

    def to_dict(self) -> dict:
        d: dict = {"lhs": self.lhs, "rhs": self.rhs, "rule": self.rule}
        if self.rule == "sym":
            d["pibar"] = perm_str(self.pibar)  # type: ignore[arg-type]
            d["pihat"] = perm_str(self.pihat)  # type: ignore[arg-type]
        return d


@dataclass
class Step:
    coeff: Fraction
    kind: str
    ineq: str
    rewrites: list[Rewrite] = field(default_factory=list)

    def to_dict(self) -> dict:
        d: dict = {"coeff": rational_str(self.coeff), "kind": self.kind, "ineq": self.ineq}
        if self.rewrites:
            d["rewrites"] = [r.to_dict() for r in self.rewrites]
        return d


@dataclass
class LinearBound:
    a: Fraction
    b: Fraction
    c: Fraction

    def __post_init__(self):
        if self.a < 0 or self.b < 0:
            raise CertificateError("bound coefficients a, b must be nonnegative")

    def __str__(self) -> str:
        return f"{rational_str(self.a)}*M + {rational_str(self.b)}*R >= {rational_str(self.c)}"

    def holds_at(self, memory: Fraction, rate: Fraction) -> bool:
        return self.a * memory + self.b * rate >= self.c


@dataclass
class Certificate:
    steps: list[Step]
    target: LinearBound
    universe: Universe | None = None
    universe_ref: str | None = None
    comment: str = ""

    def to_dict(self) -> dict:
        d: dict = {}
        if self.comment:
            d["comment"] = self.comment
        if self.universe_ref:
            d["universe"] = self.universe_ref
        elif self.universe is not None:
            d["universe"] = self.universe.to_dict()
        d["steps"] = [s.to_dict() for s in self.steps]
        d["target"] = str(self.target)
        return d

    def dump(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=False, width=120)


def _parse_rewrite(raw: dict) -> Rewrite:
    try:
        rule = raw["rule"]
        rw = Rewrite(str(raw["lhs"]), str(raw["rhs"]), rule)
    except (KeyError, TypeError) as exc:
        raise CertificateError(f"rewrite {raw!r} needs lhs, rhs and rule") from exc
    if rule not in RULES:
        raise CertificateError(f"unknown rewrite rule {rule!r}")
    if rule == "sym":
        if "pibar" not in raw or "pihat" not in raw:
            raise CertificateError(f"symmetric rewrite {rw.lhs} -> {rw.rhs} must name pibar and pihat")
        try:
            rw.pibar, rw.pihat = parse_perm(str(raw["pibar"])), parse_perm(str(raw["pihat"]))
        except UniverseError as exc:
            raise CertificateError(str(exc)) from exc
    return rw


def parse_certificate(text: str, base: Path | None = None) -> Certificate:
    data = yaml.safe_load(text)
    if not isinstance(data, dict) or "steps" not in data or "target" not in data:
        raise CertificateError("certificate needs 'steps' and 'target'")
    steps = []
    for i, raw in enumerate(data["steps"] or (), 1):
        if not isinstance(raw, dict):
            raise CertificateError(f"step {i} is not a mapping")
        for key in ("coeff", "kind", "ineq"):
            if key not in raw:
                raise CertificateError(f"step {i} lacks {key!r}")
        if raw["kind"] not in KINDS:
            raise CertificateError(f"step {i}: unknown kind {raw['kind']!r}")
        rws = [_parse_rewrite(r) for r in raw.get("rewrites") or ()]
        steps.append(Step(parse_rational(raw["coeff"]), raw["kind"], str(raw["ineq"]), rws))
    try:
        a, b, c = parse_target(str(data["target"]))
    except ExpressionError as exc:
        raise CertificateError(str(exc)) from exc
    cert = Certificate(steps, LinearBound(a, b, c), comment=str(data.get("comment", "")))
    ref = data.get("universe")
    if isinstance(ref, dict):
        cert.universe = parse_universe(ref)
    elif isinstance(ref, str):
        cert.universe_ref = ref
        path = Path(ref)
        if not path.is_absolute() and base is not None:
            path = base / path
        if path.exists():
            cert.universe = load_universe(path)
    return cert


def load_certificate(path: str | Path) -> Certificate:
    path = Path(path)
    return parse_certificate(path.read_text(), path.parent)


# -- checking --------------------------------------------------------------

@dataclass
class CheckResult:
    ok: bool
    target: LinearBound
    derived: Fraction | None
    failures: list[str]
    residual: dict[str, Fraction]

    def to_dict(self) -> dict:
        return {
            "accepted": self.ok,
            "target": str(self.target),
            "derived_c": None if self.derived is None else rational_str(self.derived),
            "failures": self.failures,
            "residual": {k: rational_str(v) for k, v in self.residual.items()},
        }

    def to_text(self) -> str:
        lines = [f"target: {self.target}"]
        if self.derived is not None:
            lines.append(f"derived bound: c = {rational_str(self.derived)}")
        if self.residual:
            lines.append("residual: " + " ".join(
                f"{'+' if v > 0 else '-'}{rational_str(abs(v))}*H({k})" for k, v in self.residual.items()))
        lines.extend(f"  - {f}" for f in self.failures)
        lines.append("ACCEPTED" if self.ok else "REJECTED")
        return "\n".join(lines)


def _single_entropy(text: str) -> frozenset[str]:
    """``H(...)`` without conditioning, or a bare variable list."""
    t = text.strip()
    if not t.startswith("H("):
        t = f"H({t})"
    terms = parse_side(t)
    if len(terms) != 1 or terms[0].b is not None or terms[0].c or terms[0].coeff != 1:
        raise ExpressionError(f"{text!r} is not a single entropy term")
    return terms[0].a


def check_rewrite(rw: Rewrite, u: Universe) -> str | None:
    """``None`` if licensed, otherwise the reason."""
    try:
        lhs, rhs = _single_entropy(rw.lhs), _single_entropy(rw.rhs)
        lhs_m, rhs_m = u.mask(lhs), u.mask(rhs)
    except (ExpressionError, UniverseError) as exc:
        return str(exc)
    if rw.rule == "dec":
        if u.closure_mask(lhs_m) != u.closure_mask(rhs_m):
            return f"H({u.name_of(lhs_m)}) and H({u.name_of(rhs_m)}) have different closures"
        return None
    if lhs_m & u.aux_mask:
        return f"symmetry applied to H({u.name_of(lhs_m)}), which contains an auxiliary variable"
    img = u.apply(lhs, rw.pibar, rw.pihat)  # type: ignore[arg-type]
    if img is None:
        return f"pair ({perm_str(rw.pihat)},{perm_str(rw.pibar)}) maps H({u.name_of(lhs_m)}) outside the universe"  # type: ignore[arg-type]
    if u.closure_mask(u.mask(img)) != u.closure_mask(rhs_m):
        return (f"pair pihat={perm_str(rw.pihat)} pibar={perm_str(rw.pibar)} maps "  # type: ignore[arg-type]
                f"H({u.name_of(lhs_m)}) to H({u.name_of(u.mask(img))}), not H({u.name_of(rhs_m)})")
    return None


def canonical_form(form: LinearForm, u: Universe) -> dict[int, Fraction]:
    out: dict[int, Fraction] = {}
    for s, c in form.items():
        r = u.canonical_mask(u.mask(s))
        v = out.get(r, Fraction(0)) + c
        if v:
            out[r] = v
        else:
            out.pop(r, None)
    return out


def file_only_value(r: int, u: Universe) -> int | None:
    """Entropy of a class determined by files alone (``|S|`` for W_S), else None."""
    if r == u.full:
        return 3 if all(f"W{j}" in u.index for j in (1, 2, 3)) else None
    base = r & ~u.aux_mask
    labels = u.labels(base)
    if not labels or any(v[0] != "W" for v in labels):
        return None
    if u.closure_mask(base) != r:
        return None
    return len(labels)


def _step_form(i: int, step: Step, u: Universe, eq_forms: list[dict[int, Fraction]],
               failures: list[str]) -> LinearForm | None:
    try:
        rel = parse_relation(step.ineq)
    except ExpressionError as exc:
        failures.append(f"step {i}: {exc}")
        return None
    missing = rel.variables() - set(u.variables)
    if missing:
        failures.append(f"step {i}: variables outside the universe: {', '.join(sorted(missing))}")
        return None
    form = rel.form()
    if step.kind == "shannon":
        if rel.op != ">=" or rel.rhs or len(rel.lhs) != 1 or rel.lhs[0].coeff != 1:
            failures.append(f"step {i}: a Shannon step must read 'I(A;B|C) >= 0' or 'H(A|B) >= 0'")
            return None
        return form
    if rel.op != "=":
        failures.append(f"step {i}: {step.kind} must be an equality")
        return None
    if step.kind in ("dependency-equality", "symmetry-rewrite"):
        if len(rel.lhs) != 1 or len(rel.rhs) != 1 or any(
            t.b is not None or t.c or t.coeff != 1 for t in (*rel.lhs, *rel.rhs)
        ):
            failures.append(f"step {i}: {step.kind} must read 'H(S) = H(T)'")
            return None
        s, t = rel.lhs[0].a, rel.rhs[0].a
        if step.kind == "dependency-equality":
            if u.closure(s) != u.closure(t):
                failures.append(f"step {i}: H({u.name_of(u.mask(s))}) and H({u.name_of(u.mask(t))}) have different closures")
                return None
        else:
            try:
                ok = any(
                    rw.rule == "sym" and _single_entropy(rw.lhs) == s and _single_entropy(rw.rhs) == t
                    for rw in step.rewrites
                )
            except ExpressionError:
                ok = False
            if not ok:
                failures.append(f"step {i}: symmetry-rewrite needs a matching sym rewrite naming the pair")
                return None
        return form
    # common-info-equality: must be (a multiple of) a declared universe equality
    cf = canonical_form(form, u)
    for ef in eq_forms:
        if ef and _proportional(cf, ef):
            return form
    failures.append(f"step {i}: '{step.ineq}' is not one of the universe's equalities")
    return None


def _proportional(f: dict[int, Fraction], g: dict[int, Fraction]) -> bool:
    if f.keys() != g.keys():
        return False
    k = next(iter(f))
    ratio = f[k] / g[k]
    return all(f[x] == ratio * g[x] for x in f)


def check_certificate(cert: Certificate, u: Universe | None = None) -> CheckResult:
    u = u or cert.universe
    if u is None:
        raise CertificateError("no universe given for the certificate")
    failures: list[str] = []
    eq_forms = [canonical_form(e.form(), u) for e in u.equalities]
    total: dict[int, Fraction] = {}
    for i, step in enumerate(cert.steps, 1):
        if step.coeff <= 0:
            failures.append(f"step {i}: coefficient {rational_str(step.coeff)} is not positive")
            continue
        for j, rw in enumerate(step.rewrites, 1):
            why = check_rewrite(rw, u)
            if why:
                failures.append(f"step {i} rewrite {j} ({rw.lhs} -> {rw.rhs}, {rw.rule}): {why}")
        form = _step_form(i, step, u, eq_forms, failures)
        if form is None:
            continue
        for r, c in canonical_form(form, u).items():
            v = total.get(r, Fraction(0)) + step.coeff * c
            if v:
                total[r] = v
            else:
                total.pop(r, None)
    tgt = cert.target
    for label, coeff in (("Z1", tgt.a), ("X123", tgt.b)):
        if label not in u.index:
            failures.append(f"objective variable {label} is not in the universe")
            continue
        r = u.canonical_mask(u.mask((label,)))
        v = total.get(r, Fraction(0)) - coeff
        if v:
            total[r] = v
        else:
            total.pop(r, None)
    derived = Fraction(0)
    residual: dict[str, Fraction] = {}
    for r, c in sorted(total.items()):
        val = file_only_value(r, u)
        if val is None:
            residual[u.name_of(r)] = c
        else:
            derived -= c * val
    if residual:
        failures.append("weighted sum leaves terms that are not fixed by the file normalisation")
        derived_out = None
    else:
        derived_out = derived
        if derived != tgt.c:
            failures.append(f"weighted sum proves c = {rational_str(derived)}, target says {rational_str(tgt.c)}")
    return CheckResult(not failures, tgt, derived_out, failures, residual)
