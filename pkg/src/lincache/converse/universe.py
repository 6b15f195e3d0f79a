"""Random-variable universes: functional dependencies and the symmetry group.

Subsets of a universe are bitmasks over its variable order.  A symmetry is a
pair ``(pibar, pihat)``: ``pibar`` permutes users (caches and demand
positions), ``pihat`` permutes files.  It maps ``W_j -> W_pihat(j)``,
``Z_k -> Z_pibar(k)`` and ``X^D -> X^D'`` with ``D'_pibar(k) = pihat(d_k)``.
Auxiliary variables (K1, K2, G) have no image, so symmetry only acts on
subsets free of them.
"""

from __future__ import annotations

import itertools
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import yaml

from .expr import ExpressionError, Relation, parse_relation, parse_vars, VAR_RE

AUX = ("K1", "K2", "G")
PERMS = tuple(itertools.permutations((1, 2, 3)))

Perm = tuple[int, int, int]


class UniverseError(ValueError):
    pass


def parse_perm(text: str | Sequence[int]) -> Perm:
    """``"(3,1,2)"`` or ``"312"`` -> ``(3, 1, 2)``; one-line notation."""
    if isinstance(text, str):
        digits = [int(c) for c in re.findall(r"\d", text)]
    else:
        digits = [int(c) for c in text]
    if sorted(digits) != [1, 2, 3]:
        raise UniverseError(f"{text!r} is not a permutation of 1,2,3")
    return tuple(digits)  # type: ignore[return-value]


def perm_str(p: Perm) -> str:
    return "(" + ",".join(map(str, p)) + ")"


def act(label: str, pibar: Perm, pihat: Perm) -> str | None:
    """Image of one variable; ``None`` for auxiliaries."""
    kind = label[0]
    if kind == "W":
        return f"W{pihat[int(label[1]) - 1]}"
    if kind == "Z":
        return f"Z{pibar[int(label[1]) - 1]}"
    if kind == "X":
        d = [int(c) for c in label[1:]]
        out = [0, 0, 0]
        for k in range(3):
            out[pibar[k] - 1] = pihat[d[k] - 1]
        return "X" + "".join(map(str, out))
    return None


def act_set(s: Iterable[str], pibar: Perm, pihat: Perm) -> frozenset[str] | None:
    out = set()
    for v in s:
        w = act(v, pibar, pihat)
        if w is None:
            return None
        out.add(w)
    return frozenset(out)


@dataclass(frozen=True)
class Dependency:
    premise: frozenset[str]
    target: str

    def __str__(self) -> str:
        return ",".join(sorted(self.premise)) + " -> " + self.target


def parse_dependency(text: str) -> Dependency:
    lhs, sep, rhs = text.partition("->")
    if not sep:
        raise UniverseError(f"dependency {text!r} needs '->'")
    target = rhs.strip()
    if not VAR_RE.fullmatch(target):
        raise UniverseError(f"bad dependency target {target!r}")
    return Dependency(parse_vars(lhs), target)


# Rules tying the auxiliaries to the base variables; used whenever the
# auxiliary and all premise variables are in the universe.
DEFAULT_AUX_RULES = (
    "Z1,X213 -> K1",
    "W1 -> K1",
    "W1,X123 -> K2",
    "W2 -> K2",
    "W1,X123 -> G",
)
DEFAULT_AUX_EQUALITIES = {
    "K1": ("H(K1) = I(Z1,X213;W1)",),
    "K2": ("H(K2) = I(W1,X123;W2)",),
    "G": (
        "H(W1|G) = H(W1|X213)",
        "H(X123|G) = H(X123|X213)",
        "H(W1,X123|G) = H(W1,X123|X213)",
    ),
}


def _order_key(v: str):
    return ("WZXKG".index(v[0]), v)


@dataclass
class Universe:
    variables: tuple[str, ...]
    dependencies: tuple[Dependency, ...] = ()
    equalities: tuple[Relation, ...] = ()
    name: str = ""
    index: dict[str, int] = field(init=False, repr=False)

    def __post_init__(self):
        if not self.variables:
            raise UniverseError("universe has no variables")
        for v in self.variables:
            if not VAR_RE.fullmatch(v):
                raise UniverseError(f"unknown variable {v!r}")
        if len(set(self.variables)) != len(self.variables):
            raise UniverseError("duplicate variable in universe")
        self.variables = tuple(sorted(self.variables, key=_order_key))
        self.index = {v: i for i, v in enumerate(self.variables)}
        for dep in self.dependencies:
            self._check_vars(dep.premise | {dep.target}, f"dependency {dep}")
        for eq in self.equalities:
            if eq.op != "=":
                raise UniverseError(f"universe equality must use '=': {eq}")
            self._check_vars(eq.variables(), f"equality {eq}")
        self._rules = self._build_rules()
        self._sym = self._build_symmetries()
        self._closure_cache: dict[int, int] = {}
        self._aux = self.mask(v for v in self.variables if v in AUX)

    # -- construction -------------------------------------------------------

    @classmethod
    def with_defaults(cls, variables: Iterable[str], name: str = "") -> "Universe":
        """Universe with the standard auxiliary rules and equalities."""
        vs = tuple(variables)
        present = set(vs)
        deps = tuple(
            d for d in map(parse_dependency, DEFAULT_AUX_RULES)
            if d.target in present and d.premise <= present
        )
        eqs = []
        for aux, texts in DEFAULT_AUX_EQUALITIES.items():
            if aux in present:
                for t in texts:
                    rel = parse_relation(t)
                    missing = rel.variables() - present
                    if missing:
                        raise UniverseError(f"{aux} needs {', '.join(sorted(missing))} in the universe")
                    eqs.append(rel)
        return cls(vs, deps, tuple(eqs), name)

    def _check_vars(self, vs: Iterable[str], what: str) -> None:
        missing = set(vs) - set(self.variables)
        if missing:
            raise UniverseError(f"{what} uses variables outside the universe: {', '.join(sorted(missing))}")

    def _build_rules(self) -> list[tuple[int, int]]:
        rules = []
        for v in self.variables:
            if v[0] != "X":
                continue
            for k in range(3):
                z, w = f"Z{k + 1}", f"W{v[1 + k]}"
                if z in self.index and w in self.index:
                    rules.append((self.mask((z, v)), self.mask((w,))))
        for dep in self.dependencies:
            rules.append((self.mask(dep.premise), self.mask((dep.target,))))
        files = [f"W{j}" for j in (1, 2, 3)]
        if all(w in self.index for w in files):
            rules.append((self.mask(files), self.full))
        return rules

    def _build_symmetries(self) -> list[tuple[Perm, Perm, list[int]]]:
        """For each group element, the image index of every variable (-1: none)."""
        out = []
        for pihat in PERMS:
            for pibar in PERMS:
                table = []
                for v in self.variables:
                    w = act(v, pibar, pihat)
                    table.append(self.index.get(w, -1) if w is not None else -1)
                out.append((pibar, pihat, table))
        return out

    # -- masks --------------------------------------------------------------

    @property
    def n(self) -> int:
        return len(self.variables)

    @property
    def full(self) -> int:
        return (1 << self.n) - 1

    @property
    def aux_mask(self) -> int:
        return self._aux

    def mask(self, labels: Iterable[str]) -> int:
        m = 0
        for v in labels:
            i = self.index.get(v)
            if i is None:
                raise UniverseError(f"variable {v!r} is not in the universe")
            m |= 1 << i
        return m

    def labels(self, m: int) -> tuple[str, ...]:
        return tuple(v for i, v in enumerate(self.variables) if m >> i & 1)

    def name_of(self, m: int) -> str:
        return "".join(self.labels(m)) or "(empty)"

    # -- closure and symmetry ----------------------------------------------

    def closure_mask(self, m: int) -> int:
        hit = self._closure_cache.get(m)
        if hit is not None:
            return hit
        out = m
        changed = True
        while changed:
            changed = False
            for prem, concl in self._rules:
                if out & prem == prem and out & concl != concl:
                    out |= concl
                    changed = True
        self._closure_cache[m] = out
        return out

    def closure(self, s: Iterable[str]) -> frozenset[str]:
        return frozenset(self.labels(self.closure_mask(self.mask(s))))

    def apply_mask(self, m: int, table: Sequence[int]) -> int | None:
        out = 0
        i = 0
        while m:
            if m & 1:
                j = table[i]
                if j < 0:
                    return None
                out |= 1 << j
            m >>= 1
            i += 1
        return out

    def apply(self, s: Iterable[str], pibar: Perm, pihat: Perm) -> frozenset[str] | None:
        """Image of ``s`` if it stays inside the universe and is auxiliary-free."""
        img = act_set(s, pibar, pihat)
        if img is None or not img <= set(self.variables):
            return None
        return img

    def canonical_mask(self, m: int) -> int:
        """Deterministic class representative of subset ``m``.

        The closure is taken first.  If the closure is auxiliary-free (or is
        generated by its auxiliary-free part) the class is the least closed
        image over every group element that keeps the subset in the universe.
        Least means smallest sorted index tuple.
        """
        c = self.closure_mask(m)
        if c == self.full:
            return c
        base = c & ~self._aux
        if self.closure_mask(base) != c:
            return c
        best = c
        best_key = _key(c)
        for _, _, table in self._sym:
            img = self.apply_mask(base, table)
            if img is None:
                continue
            ci = self.closure_mask(img)
            k = _key(ci)
            if k < best_key:
                best, best_key = ci, k
        return best

    def canonical(self, s: Iterable[str]) -> frozenset[str]:
        return frozenset(self.labels(self.canonical_mask(self.mask(s))))

    def symmetries(self) -> list[tuple[Perm, Perm]]:
        return [(a, b) for a, b, _ in self._sym]

    # -- io -----------------------------------------------------------------

    def to_dict(self) -> dict:
        d: dict = {"variables": list(self.variables)}
        if self.name:
            d = {"name": self.name, **d}
        d["dependencies"] = [str(x) for x in self.dependencies]
        d["equalities"] = [str(e) for e in self.equalities]
        return d


def _key(m: int) -> tuple[int, ...]:
    out = []
    i = 0
    while m:
        if m & 1:
            out.append(i)
        m >>= 1
        i += 1
    return tuple(out)


@dataclass(frozen=True)
class TermClass:
    canonical: frozenset[str]
    label: str
    members: int


def class_table(u: Universe, cap: int = 100_000) -> dict[int, int]:
    """Map every nonempty subset mask to its canonical mask."""
    table = {}
    reps = set()
    for m in range(1, 1 << u.n):
        r = u.canonical_mask(m)
        table[m] = r
        reps.add(r)
        if len(reps) > cap:
            raise UniverseError(f"more than {cap} term classes; raise the class cap to continue")
    return table


def term_classes(u: Universe) -> list[TermClass]:
    counts: dict[int, int] = {}
    for rep in class_table(u).values():
        counts[rep] = counts.get(rep, 0) + 1
    return [TermClass(frozenset(u.labels(r)), u.name_of(r), c) for r, c in sorted(counts.items(), key=lambda kv: _key(kv[0]))]


def parse_universe(data: dict | str, name: str = "") -> Universe:
    """Universe from YAML text or a loaded mapping.

    Keys: ``variables`` (list or concatenated string), optional
    ``dependencies`` and ``equalities``.  When both are omitted the standard
    auxiliary rules are used.
    """
    if isinstance(data, str):
        data = yaml.safe_load(data)
    if not isinstance(data, dict) or "variables" not in data:
        raise UniverseError("universe spec needs a 'variables' entry")
    raw = data["variables"]
    if isinstance(raw, str):
        variables = VAR_RE.findall(raw)
    else:
        variables = [str(v) for v in raw]
    name = str(data.get("name", name))
    if "dependencies" not in data and "equalities" not in data:
        return Universe.with_defaults(variables, name)
    try:
        deps = tuple(parse_dependency(t) for t in data.get("dependencies") or ())
        eqs = tuple(parse_relation(t) for t in data.get("equalities") or ())
    except ExpressionError as exc:
        raise UniverseError(str(exc)) from exc
    return Universe(tuple(variables), deps, eqs, name)


def load_universe(path: str | Path) -> Universe:
    path = Path(path)
    return parse_universe(path.read_text(), path.stem)
