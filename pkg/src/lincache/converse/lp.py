"""Symmetry-reduced entropy LPs and certificate extraction from their duals.

LP variables are the term classes of a universe.  The constraints are the
elemental Shannon inequalities mapped to classes, the file normalisation
``H(W_S) = |S|`` and the universe's own equalities.  The optimum is found in
floating point; the dual multipliers are then rounded to rationals and turned
into a certificate, and only the certificate's exact value is reported.
"""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from scipy.optimize import linprog
from scipy.sparse import csr_matrix

from .certificate import Certificate, CheckResult, LinearBound, Step, check_certificate
from .expr import format_vars
from .universe import Universe, UniverseError, class_table

log = logging.getLogger(__name__)

MAX_VARIABLES = 14
CLASS_CAP = 100_000
DENOMINATOR_CAPS = (1_000, 100_000, 1_000_000)


class LPBuildError(ValueError):
    pass


class Uncertified(RuntimeError):
    def __init__(self, optimum: float, detail: str = ""):
        self.optimum = optimum
        super().__init__(f"numeric optimum {optimum:.9g}, uncertified" + (f" ({detail})" if detail else ""))


Row = dict[int, int]


@dataclass
class EntropyLP:
    universe: Universe
    objective: tuple[Fraction, Fraction]
    classes: list[int]
    column: dict[int, int]
    table: dict[int, int] = field(repr=False)
    ineqs: list[Row] = field(repr=False)
    ineq_text: list[str] = field(repr=False)
    eqs: list[Row] = field(repr=False)
    eq_rhs: list[int] = field(repr=False)
    eq_source: list[tuple] = field(repr=False)

    @property
    def n_classes(self) -> int:
        return len(self.classes)

    def summary(self) -> str:
        return (f"{self.universe.n} variables, {self.n_classes} term classes, "
                f"{len(self.ineqs)} distinct Shannon rows, {len(self.eqs)} equalities")


def _add(row: Row, col: int, c: int) -> None:
    v = row.get(col, 0) + c
    if v:
        row[col] = v
    else:
        row.pop(col, None)


def build_lp(u: Universe, objective: tuple, *, allow_large: bool = False,
             class_cap: int = CLASS_CAP) -> EntropyLP:
    """Instantiate the elemental inequalities of ``u`` over its term classes."""
    a, b = (Fraction(x) for x in objective)
    if a < 0 or b < 0:
        raise LPBuildError("objective weights must be nonnegative")
    for need in ("Z1", "X123"):
        if need not in u.index:
            raise LPBuildError(f"the objective needs {need} in the universe")
    if u.n > MAX_VARIABLES and not allow_large:
        raise LPBuildError(f"{u.n} variables exceeds the limit of {MAX_VARIABLES}; pass allow_large to proceed")
    try:
        table = class_table(u, class_cap)
    except UniverseError as exc:
        raise LPBuildError(str(exc)) from exc
    classes = sorted(set(table.values()))
    column = {r: i for i, r in enumerate(classes)}

    def col(m: int) -> int | None:
        return column[table[m]] if m else None

    ineqs: list[Row] = []
    texts: list[str] = []
    seen: set[tuple] = set()

    def push(terms, text):
        row: Row = {}
        for m, c in terms:
            j = col(m)
            if j is not None:
                _add(row, j, c)
        if not row:
            return
        key = tuple(sorted(row.items()))
        if key in seen:
            return
        seen.add(key)
        ineqs.append(row)
        texts.append(text)

    n, full = u.n, u.full
    names = u.variables
    for i in range(n):
        rest = full & ~(1 << i)
        cond = u.labels(rest)
        push(((full, 1), (rest, -1)),
             f"H({names[i]}|{format_vars(cond)}) >= 0" if cond else f"H({names[i]}) >= 0")
    for i, j in itertools.combinations(range(n), 2):
        others = [k for k in range(n) if k != i and k != j]
        bi, bj = 1 << i, 1 << j
        for r in range(len(others) + 1):
            for ks in itertools.combinations(others, r):
                k = sum(1 << x for x in ks)
                cond = "|" + format_vars(names[x] for x in ks) if ks else ""
                push(((bi | k, 1), (bj | k, 1), (bi | bj | k, -1), (k, -1)),
                     f"I({names[i]};{names[j]}{cond}) >= 0")

    eqs: list[Row] = []
    rhs: list[int] = []
    source: list[tuple] = []
    files = [w for w in ("W1", "W2", "W3") if w in u.index]
    by_class: dict[int, int] = {}
    for r in range(1, len(files) + 1):
        for s in itertools.combinations(files, r):
            j = col(u.mask(s))
            if j in by_class:
                if by_class[j] != len(s):
                    raise LPBuildError("file normalisation is inconsistent on this universe")
                continue
            by_class[j] = len(s)
            eqs.append({j: 1})
            rhs.append(len(s))
            source.append(("norm", s))
    for e_idx, rel in enumerate(u.equalities):
        row: Row = {}
        for s, c in rel.form().items():
            if c.denominator != 1:
                raise LPBuildError(f"equality {rel} has fractional coefficients")
            _add(row, col(u.mask(s)), int(c))  # type: ignore[arg-type]
        if row:
            eqs.append(row)
            rhs.append(0)
            source.append(("universe", e_idx))
    return EntropyLP(u, (a, b), classes, column, table, ineqs, texts, eqs, rhs, source)


def _matrix(rows: list[Row], n: int) -> csr_matrix:
    data, ri, ci = [], [], []
    for i, row in enumerate(rows):
        for j, c in row.items():
            ri.append(i)
            ci.append(j)
            data.append(c)
    return csr_matrix((data, (ri, ci)), shape=(len(rows), n), dtype=float)


def _cost(lp: EntropyLP) -> dict[int, Fraction]:
    u = lp.universe
    cost: dict[int, Fraction] = {}
    for label, w in (("Z1", lp.objective[0]), ("X123", lp.objective[1])):
        j = lp.column[lp.table[u.mask((label,))]]
        cost[j] = cost.get(j, Fraction(0)) + w
    return cost


@dataclass
class Solution:
    optimum: float
    bound: LinearBound
    certificate: Certificate
    check: CheckResult


def solve_lp(lp: EntropyLP):
    n = lp.n_classes
    c = np.zeros(n)
    for j, w in _cost(lp).items():
        c[j] = float(w)
    res = linprog(
        c,
        A_ub=-_matrix(lp.ineqs, n),
        b_ub=np.zeros(len(lp.ineqs)),
        A_eq=_matrix(lp.eqs, n) if lp.eqs else None,
        b_eq=np.array(lp.eq_rhs, dtype=float) if lp.eqs else None,
        bounds=[(None, None)] * n,
        method="highs",
    )
    if res.status != 0:
        raise Uncertified(float("nan"), f"solver status {res.status}: {res.message}")
    return res


def _exact_ok(lp: EntropyLP, z: dict[int, Fraction], y: dict[int, Fraction]) -> bool:
    total: dict[int, Fraction] = {}
    for i, coef in z.items():
        for j, v in lp.ineqs[i].items():
            total[j] = total.get(j, Fraction(0)) + coef * v
    for e, coef in y.items():
        for j, v in lp.eqs[e].items():
            total[j] = total.get(j, Fraction(0)) + coef * v
    cost = _cost(lp)
    keys = set(total) | set(cost)
    return all(total.get(j, 0) == cost.get(j, 0) for j in keys)


def _certificate(lp: EntropyLP, z: dict[int, Fraction], y: dict[int, Fraction]) -> Certificate:
    u = lp.universe
    steps = [Step(coef, "shannon", lp.ineq_text[i]) for i, coef in sorted(z.items())]
    for e, coef in sorted(y.items()):
        kind, ref = lp.eq_source[e]
        if kind != "universe":
            continue  # normalisation multipliers are implicit
        rel = u.equalities[ref]
        text = str(rel)
        if coef < 0:
            lhs, rhs = text.split(" = ")
            text = f"{rhs} = {lhs}"
        steps.append(Step(abs(coef), "common-info-equality", text))
    a, b = lp.objective
    c = sum((coef * lp.eq_rhs[e] for e, coef in y.items()), Fraction(0))
    return Certificate(steps, LinearBound(a, b, c), universe=u)


def solve_and_certify(lp: EntropyLP) -> Solution:
    """Solve, round the duals and return a certificate that checks exactly."""
    res = solve_lp(lp)
    zf = -np.asarray(res.ineqlin.marginals)
    yf = np.asarray(res.eqlin.marginals) if lp.eqs else np.zeros(0)
    log.info("numeric optimum %.9f", res.fun)
    for cap in DENOMINATOR_CAPS:
        z = {}
        for i, v in enumerate(zf):
            if v > 1e-9:
                q = Fraction(float(v)).limit_denominator(cap)
                if q > 0:
                    z[i] = q
        y = {}
        for e, v in enumerate(yf):
            q = Fraction(float(v)).limit_denominator(cap)
            if q:
                y[e] = q
        if not _exact_ok(lp, z, y):
            continue
        cert = _certificate(lp, z, y)
        check = check_certificate(cert, lp.universe)
        if check.ok:
            return Solution(float(res.fun), cert.target, cert, check)
        log.warning("rounded certificate failed the checker: %s", check.failures[:3])
    raise Uncertified(float(res.fun), "rounded duals do not cancel exactly")
