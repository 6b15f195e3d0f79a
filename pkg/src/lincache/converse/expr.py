"""Parsing of entropy expressions such as ``3*I(Z3;X123|W1,W2,Z1) >= 0``.

Variable lists may be comma separated or concatenated (``W1W2Z1``).  A parsed
expression is a linear form over variable sets: ``{frozenset: Fraction}``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Mapping

VAR_RE = re.compile(r"W[1-3]|Z[1-3]|X[1-3]{3}|K[12]|G")

LinearForm = dict[frozenset[str], Fraction]


class ExpressionError(ValueError):
    pass


def parse_vars(text: str) -> frozenset[str]:
    text = text.strip()
    if not text:
        return frozenset()
    labels = VAR_RE.findall(text)
    if VAR_RE.sub("", text).replace(",", "").strip():
        raise ExpressionError(f"cannot parse variable list {text!r}")
    return frozenset(labels)


def format_vars(s: Iterable[str], order: Mapping[str, int] | None = None) -> str:
    key = (lambda v: order[v]) if order else _default_key
    return ",".join(sorted(s, key=key))


def _default_key(v: str):
    return ("WZXKG".index(v[0]), v)


@dataclass(frozen=True)
class Term:
    """``coeff * H(a | c)`` (``b`` is None) or ``coeff * I(a; b | c)``."""

    coeff: Fraction
    a: frozenset[str]
    b: frozenset[str] | None
    c: frozenset[str]

    def form(self) -> LinearForm:
        out: LinearForm = {}
        if self.b is None:
            _add(out, self.a | self.c, self.coeff)
            _add(out, self.c, -self.coeff)
        else:
            _add(out, self.a | self.c, self.coeff)
            _add(out, self.b | self.c, self.coeff)
            _add(out, self.a | self.b | self.c, -self.coeff)
            _add(out, self.c, -self.coeff)
        return out

    def __str__(self) -> str:
        cond = f"|{format_vars(self.c)}" if self.c else ""
        body = (f"H({format_vars(self.a)}{cond})" if self.b is None
                else f"I({format_vars(self.a)};{format_vars(self.b)}{cond})")
        if self.coeff == 1:
            return body
        return f"{self.coeff}*{body}"


def _add(form: LinearForm, s: frozenset[str], coeff: Fraction) -> None:
    if not s or not coeff:
        return
    v = form.get(s, Fraction(0)) + coeff
    if v:
        form[s] = v
    else:
        form.pop(s, None)


def add_forms(*forms: tuple[Fraction, LinearForm]) -> LinearForm:
    out: LinearForm = {}
    for scale, f in forms:
        for s, c in f.items():
            _add(out, s, scale * c)
    return out


_TERM_RE = re.compile(
    r"\s*([+-])?\s*(?:(\d+(?:/\d+)?)\s*\*?\s*)?([HI])\(([^()]*)\)\s*"
)


def parse_side(text: str) -> list[Term]:
    text = text.strip()
    if text == "0":
        return []
    terms = []
    pos = 0
    while pos < len(text):
        m = _TERM_RE.match(text, pos)
        if not m or m.end() == pos:
            raise ExpressionError(f"cannot parse {text[pos:]!r}")
        sign, coeff, kind, body = m.groups()
        if terms and sign is None:
            raise ExpressionError(f"missing operator before {m.group(0).strip()!r}")
        k = Fraction(coeff) if coeff else Fraction(1)
        if sign == "-":
            k = -k
        main, _, cond = body.partition("|")
        c = parse_vars(cond)
        if kind == "H":
            a, b = parse_vars(main), None
            if not a:
                raise ExpressionError(f"empty entropy term in {text!r}")
        else:
            parts = re.split(r"[;:]", main)
            if len(parts) != 2:
                raise ExpressionError(f"mutual information needs two arguments: {body!r}")
            a, b = parse_vars(parts[0]), parse_vars(parts[1])
            if not a or not b:
                raise ExpressionError(f"empty argument in {body!r}")
        terms.append(Term(k, a, b, c))
        pos = m.end()
    return terms


@dataclass(frozen=True)
class Relation:
    lhs: tuple[Term, ...]
    op: str  # ">=", "<=", "="
    rhs: tuple[Term, ...]

    def form(self) -> LinearForm:
        """``lhs - rhs``; ``<=`` is normalised to ``>=`` by negation."""
        f = add_forms(*((Fraction(1), t.form()) for t in self.lhs),
                      *((Fraction(-1), t.form()) for t in self.rhs))
        if self.op == "<=":
            f = {s: -c for s, c in f.items()}
        return f

    def variables(self) -> frozenset[str]:
        out = set()
        for t in (*self.lhs, *self.rhs):
            out |= t.a | (t.b or frozenset()) | t.c
        return frozenset(out)

    def __str__(self) -> str:
        def side(ts):
            if not ts:
                return "0"
            return " + ".join(str(t) for t in ts).replace("+ -", "- ")
        return f"{side(self.lhs)} {self.op} {side(self.rhs)}"


def parse_relation(text: str) -> Relation:
    m = re.fullmatch(r"(.*?)(>=|<=|=)(.*)", text.strip())
    if not m:
        raise ExpressionError(f"no relation in {text!r}")
    return Relation(tuple(parse_side(m.group(1))), m.group(2), tuple(parse_side(m.group(3))))


def parse_target(text: str) -> tuple[Fraction, Fraction, Fraction]:
    """``"10*M + 6*R >= 15"`` -> ``(10, 6, 15)``."""
    m = re.fullmatch(
        r"\s*(?:(\d+(?:/\d+)?)\s*\*?\s*)?M\s*\+\s*(?:(\d+(?:/\d+)?)\s*\*?\s*)?R\s*>=\s*(\d+(?:/\d+)?)\s*",
        text,
    )
    if not m:
        raise ExpressionError(f"bad target {text!r}; expected 'a*M + b*R >= c'")
    a, b, c = (Fraction(x) if x else Fraction(1) for x in m.groups())
    return a, b, c
