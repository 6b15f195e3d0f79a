"""Linear (3,3) coded-caching schemes and their symmetry operators.

Files are A, B, C (indices 1..3), each split into ``t`` subfiles.  Column
``(f-1)*t + i`` (1-based) carries subfile ``i`` of file ``f``.

Two column permutations act on every generator matrix:

* ``f`` rotates the file blocks, A -> B -> C -> A, and fixes every cache row
  space of a symmetric placement;
* ``g`` shifts subfile indices inside each block (``i -> i + gshift`` on the
  non-fixed indices) and carries cache ``Z_k`` to ``Z_{k+1}``.

They commute, ``f^3 = g^3 = id``, so every word in them is ``f^a g^b``.
"""

from __future__ import annotations

import itertools
import re
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Iterable, Iterator, Mapping, Sequence

from .gf2 import BitMatrix, permute_columns, permute_row

FILE_LETTERS = "ABC"
N_FILES = 3
N_USERS = 3

Demand = tuple[int, int, int]


class SchemeFormatError(ValueError):
    """Raised for malformed scheme text or inconsistent scheme data."""


@dataclass(frozen=True)
class ProblemConfig:
    subfiles: int
    memory: Fraction
    rate: Fraction
    g_shift: int
    g_fixed: frozenset[int] = frozenset()
    n_files: int = N_FILES
    n_users: int = N_USERS

    def __post_init__(self):
        if self.n_files != N_FILES or self.n_users != N_USERS:
            raise ValueError("only the (N,K)=(3,3) problem is supported")
        if self.subfiles <= 0:
            raise ValueError("subfiles must be positive")
        object.__setattr__(self, "memory", Fraction(self.memory))
        object.__setattr__(self, "rate", Fraction(self.rate))
        object.__setattr__(self, "g_fixed", frozenset(self.g_fixed))
        for name, value in (("memory", self.memory), ("rate", self.rate)):
            if value < 0 or (value * self.subfiles).denominator != 1:
                raise ValueError(f"{name}*subfiles must be a non-negative integer")
        if not all(1 <= i <= self.subfiles for i in self.g_fixed):
            raise ValueError("gfixed indices must lie in 1..subfiles")
        cycle = self.subfiles - len(self.g_fixed)
        if cycle and (3 * self.g_shift) % cycle:
            raise ValueError(f"gshift={self.g_shift} does not give g^3 = id on {cycle} moving indices")

    @property
    def width(self) -> int:
        return self.n_files * self.subfiles

    @property
    def cache_rows(self) -> int:
        return int(self.memory * self.subfiles)

    @property
    def delivery_rows(self) -> int:
        return int(self.rate * self.subfiles)

    def column(self, file: int, index: int) -> int:
        """0-based column of subfile ``index`` (1-based) of ``file`` (1-based)."""
        if not 1 <= file <= self.n_files:
            raise SchemeFormatError(f"file index {file} out of range")
        if not 1 <= index <= self.subfiles:
            raise SchemeFormatError(f"subfile index {index} out of range 1..{self.subfiles}")
        return (file - 1) * self.subfiles + index - 1

    def file_generator(self, file: int) -> BitMatrix:
        return BitMatrix.identity_block(self.width, (file - 1) * self.subfiles, self.subfiles)

    def file_mask(self, file: int) -> int:
        return ((1 << self.subfiles) - 1) << ((file - 1) * self.subfiles)


MAIN_CONFIG = ProblemConfig(subfiles=10, memory=Fraction(3, 5), rate=Fraction(3, 2),
                            g_shift=3, g_fixed=frozenset({10}))
SMALL_CONFIG = ProblemConfig(subfiles=6, memory=Fraction(1, 2), rate=Fraction(5, 3),
                             g_shift=2, g_fixed=frozenset())


# -- permutations -----------------------------------------------------------

def f_permutation(cfg: ProblemConfig) -> list[int]:
    t = cfg.subfiles
    return [((j // t + 1) % N_FILES) * t + j % t for j in range(cfg.width)]


def g_permutation(cfg: ProblemConfig) -> list[int]:
    t = cfg.subfiles
    moving = [i for i in range(1, t + 1) if i not in cfg.g_fixed]
    index_map = {i: i for i in cfg.g_fixed}
    for pos, i in enumerate(moving):
        index_map[i] = moving[(pos + cfg.g_shift) % len(moving)]
    return [(j // t) * t + index_map[j % t + 1] - 1 for j in range(cfg.width)]


def word_permutation(cfg: ProblemConfig, f_power: int, g_power: int) -> list[int]:
    perm = list(range(cfg.width))
    fp, gp = f_permutation(cfg), g_permutation(cfg)
    for _ in range(f_power % 3):
        perm = [fp[p] for p in perm]
    for _ in range(g_power % 3):
        perm = [gp[p] for p in perm]
    return perm


def _check_width(m: BitMatrix, cfg: ProblemConfig) -> None:
    if m.width != cfg.width:
        raise ValueError(f"matrix width {m.width} != config width {cfg.width}")


def op_f(m: BitMatrix, cfg: ProblemConfig) -> BitMatrix:
    _check_width(m, cfg)
    return permute_columns(m, f_permutation(cfg))


def op_g(m: BitMatrix, cfg: ProblemConfig) -> BitMatrix:
    _check_width(m, cfg)
    return permute_columns(m, g_permutation(cfg))


@dataclass(frozen=True)
class Word:
    """The operator ``g^g_power o f^f_power`` (f and g commute)."""

    f_power: int = 0
    g_power: int = 0

    def __post_init__(self):
        object.__setattr__(self, "f_power", self.f_power % 3)
        object.__setattr__(self, "g_power", self.g_power % 3)

    def __mul__(self, other: "Word") -> "Word":
        return Word(self.f_power + other.f_power, self.g_power + other.g_power)

    def __pow__(self, k: int) -> "Word":
        return Word(self.f_power * k, self.g_power * k)

    def apply(self, m: BitMatrix, cfg: ProblemConfig) -> BitMatrix:
        _check_width(m, cfg)
        if not (self.f_power or self.g_power):
            return m
        return permute_columns(m, word_permutation(cfg, self.f_power, self.g_power))

    def apply_demand(self, d: Demand) -> Demand:
        # f relabels every requested file; g hands user k's request to user k+1
        shifted = tuple((x - 1 + self.f_power) % 3 + 1 for x in d)
        for _ in range(self.g_power):
            shifted = (shifted[2], shifted[0], shifted[1])
        return shifted  # type: ignore[return-value]

    def __str__(self) -> str:
        parts = []
        for name, power in (("g", self.g_power), ("f", self.f_power)):
            if power == 1:
                parts.append(name)
            elif power == 2:
                parts.append(f"{name}^2")
        return "∘".join(parts) if parts else "id"


IDENTITY = Word()
F = Word(1, 0)
G = Word(0, 1)
GF = Word(1, 1)


def relabel_h(label: str) -> str:
    """Cyclic relabelling Z1->Z2->Z3->Z1, W1->W2->W3->W1 (labels only)."""
    m = re.fullmatch(r"([ZW])([123])", label)
    if not m:
        raise ValueError(f"h acts on Z/W labels only, got {label!r}")
    return f"{m.group(1)}{int(m.group(2)) % 3 + 1}"


# -- demands and orbits -----------------------------------------------------

def parse_demand(text: str | Sequence[int]) -> Demand:
    if isinstance(text, str):
        text = text.strip().upper()
        if len(text) != 3:
            raise SchemeFormatError(f"bad demand {text!r}")
        if all(ch in FILE_LETTERS for ch in text):
            return tuple(FILE_LETTERS.index(ch) + 1 for ch in text)  # type: ignore[return-value]
        if all(ch in "123" for ch in text):
            return tuple(int(ch) for ch in text)  # type: ignore[return-value]
        raise SchemeFormatError(f"bad demand {text!r}")
    d = tuple(int(x) for x in text)
    if len(d) != 3 or not all(1 <= x <= 3 for x in d):
        raise SchemeFormatError(f"bad demand {text!r}")
    return d  # type: ignore[return-value]


def demand_str(d: Demand) -> str:
    return "".join(FILE_LETTERS[x - 1] for x in d)


ALL_DEMANDS: tuple[Demand, ...] = tuple(itertools.product((1, 2, 3), repeat=3))  # type: ignore[assignment]

REPRESENTATIVES: tuple[Demand, ...] = tuple(parse_demand(s) for s in ("AAA", "ABC", "ACB", "ABB", "ACC"))

# words allowed to move each representative around its part of the partition
_ORBIT_WORDS = {
    "AAA": [GF ** k for k in range(3)],
    "ABC": [F ** k for k in range(3)],
    "ACB": [(F ** 2) ** k for k in range(3)],
    "ABB": [Word(a, b) for a in range(3) for b in range(3)],
    "ACC": [Word(2 * a, b) for a in range(3) for b in range(3)],
}


@dataclass(frozen=True)
class DemandOrbit:
    representative: Demand
    transform: Word

    @property
    def part(self) -> int:
        return REPRESENTATIVES.index(self.representative) + 1


def resolve_orbit(d: Demand | str) -> DemandOrbit:
    d = parse_demand(d) if isinstance(d, str) else d
    for rep in REPRESENTATIVES:
        for w in _ORBIT_WORDS[demand_str(rep)]:
            if w.apply_demand(rep) == d:
                return DemandOrbit(rep, w)
    raise AssertionError(f"demand {d} not covered by the partition")  # unreachable


def stabilizer_word(d: Demand | str) -> Word | None:
    """Word ``g^b o f`` fixing demand ``d``, if any.

    Deliveries for such demands can be built from a seed closed under it.
    """
    d = parse_demand(d) if isinstance(d, str) else d
    for b in range(3):
        w = Word(1, b)
        if w.apply_demand(d) == d:
            return w
    return None


# -- scheme -----------------------------------------------------------------

@dataclass
class Scheme:
    config: ProblemConfig
    caches: tuple[BitMatrix, BitMatrix, BitMatrix]
    deliveries: dict[Demand, BitMatrix] = field(default_factory=dict)

    def __post_init__(self):
        if len(self.caches) != N_USERS:
            raise SchemeFormatError("a scheme needs exactly three caches")
        self.caches = tuple(self.caches)  # type: ignore[assignment]
        for m in (*self.caches, *self.deliveries.values()):
            if m.width != self.config.width:
                raise SchemeFormatError(f"matrix width {m.width} != {self.config.width}")

    def files(self) -> tuple[BitMatrix, BitMatrix, BitMatrix]:
        return tuple(self.config.file_generator(j) for j in (1, 2, 3))  # type: ignore[return-value]


def expand_cache_seed(seed: BitMatrix, cfg: ProblemConfig) -> tuple[BitMatrix, BitMatrix, BitMatrix]:
    """Caches ``Z1 = [s; f(s); f^2(s)]``, ``Z2 = g(Z1)``, ``Z3 = g(Z2)``."""
    _check_width(seed, cfg)
    if 3 * len(seed) != cfg.cache_rows:
        raise ValueError(f"seed has {len(seed)} rows, need M*t/3 = {Fraction(cfg.cache_rows, 3)}")
    fs = op_f(seed, cfg)
    z1 = BitMatrix(seed.rows + fs.rows + op_f(fs, cfg).rows, cfg.width)
    z2 = op_g(z1, cfg)
    return z1, z2, op_g(z2, cfg)


def expand_delivery_seed(seed: BitMatrix, cfg: ProblemConfig, word: Word = GF) -> BitMatrix:
    """``[s; w(s); w^2(s)]``; ``w`` defaults to ``g o f``."""
    _check_width(seed, cfg)
    if 3 * len(seed) != cfg.delivery_rows:
        raise ValueError(f"seed has {len(seed)} rows, need R*t/3 = {Fraction(cfg.delivery_rows, 3)}")
    once = word.apply(seed, cfg)
    return BitMatrix(seed.rows + once.rows + word.apply(once, cfg).rows, cfg.width)


def expand_all_deliveries(sch: Scheme, overwrite: bool = False) -> Scheme:
    """Fill every demand from its representative's delivery matrix.

    Demands already present are kept unless ``overwrite`` is set.
    """
    out = dict(sch.deliveries)
    for d in ALL_DEMANDS:
        if d in out and not overwrite:
            continue
        orbit = resolve_orbit(d)
        rep = sch.deliveries.get(orbit.representative)
        if rep is None:
            raise KeyError(f"missing delivery for representative {demand_str(orbit.representative)}")
        out[d] = orbit.transform.apply(rep, sch.config)
    return replace(sch, deliveries=dict(sorted(out.items())))


# -- text format ------------------------------------------------------------

_TOKEN = re.compile(r"([A-Za-z])(\d+)")


def parse_row(text: str, cfg: ProblemConfig) -> int:
    text = text.strip()
    if text == "0":
        return 0
    row = 0
    for tok in re.split(r"\s*\+\s*", text):
        m = _TOKEN.fullmatch(tok)
        if not m:
            raise SchemeFormatError(f"bad subfile token {tok!r}")
        letter, idx = m.group(1).upper(), int(m.group(2))
        if letter not in FILE_LETTERS:
            raise SchemeFormatError(f"unknown file letter {letter!r}")
        row ^= 1 << cfg.column(FILE_LETTERS.index(letter) + 1, idx)
    return row


def format_row(row: int, cfg: ProblemConfig) -> str:
    if row == 0:
        return "0"
    t = cfg.subfiles
    return "+".join(f"{FILE_LETTERS[j // t]}{j % t + 1}" for j in range(cfg.width) if row >> j & 1)


def parse_rows(lines: Iterable[str], cfg: ProblemConfig) -> BitMatrix:
    return BitMatrix(tuple(parse_row(line, cfg) for line in lines), cfg.width)


def _sections(text: str) -> Iterator[tuple[str, list[str]]]:
    name, body = None, []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        m = re.fullmatch(r"\[(.+)\]", line)
        if m:
            if name is not None:
                yield name, body
            name, body = " ".join(m.group(1).split()), []
        elif name is None:
            raise SchemeFormatError(f"line {lineno}: content before first section")
        else:
            body.append(line)
    if name is not None:
        yield name, body


def parse_config(lines: Sequence[str]) -> ProblemConfig:
    kv = {}
    for line in lines:
        key, sep, value = line.partition("=")
        if not sep:
            raise SchemeFormatError(f"bad config line {line!r}")
        kv[key.strip().lower()] = value.strip()
    try:
        if int(kv.pop("files", 3)) != 3 or int(kv.pop("users", 3)) != 3:
            raise SchemeFormatError("only files=3, users=3 is supported")
        gfixed = kv.pop("gfixed", "")
        cfg = ProblemConfig(
            subfiles=int(kv.pop("subfiles")),
            memory=Fraction(kv.pop("memory")),
            rate=Fraction(kv.pop("rate")),
            g_shift=int(kv.pop("gshift")),
            g_fixed=frozenset(int(x) for x in gfixed.split(",") if x.strip()),
        )
    except KeyError as exc:
        raise SchemeFormatError(f"missing config key {exc.args[0]!r}") from None
    except (TypeError, ValueError) as exc:
        if isinstance(exc, SchemeFormatError):
            raise
        raise SchemeFormatError(f"bad config: {exc}") from None
    if kv:
        raise SchemeFormatError(f"unknown config keys: {', '.join(sorted(kv))}")
    return cfg


def format_config(cfg: ProblemConfig) -> list[str]:
    return [
        "[config]",
        f"files={cfg.n_files}",
        f"users={cfg.n_users}",
        f"subfiles={cfg.subfiles}",
        f"memory={cfg.memory}",
        f"rate={cfg.rate}",
        f"gshift={cfg.g_shift}",
        f"gfixed={','.join(str(i) for i in sorted(cfg.g_fixed))}",
    ]


def parse_scheme(text: str) -> Scheme:
    sections = list(_sections(text))
    configs = [body for name, body in sections if name.lower() == "config"]
    if len(configs) != 1:
        raise SchemeFormatError("exactly one [config] section is required")
    cfg = parse_config(configs[0])
    caches: dict[int, BitMatrix] = {}
    deliveries: dict[Demand, BitMatrix] = {}
    for name, body in sections:
        kind, _, arg = name.partition(" ")
        kind = kind.lower()
        if kind == "config":
            continue
        if kind == "cache":
            m = re.fullmatch(r"Z([123])", arg.strip(), re.IGNORECASE)
            if not m:
                raise SchemeFormatError(f"bad cache section [{name}]")
            k = int(m.group(1))
            if k in caches:
                raise SchemeFormatError(f"duplicate section [{name}]")
            mat = parse_rows(body, cfg)
            if len(mat) != cfg.cache_rows:
                raise SchemeFormatError(f"[{name}] has {len(mat)} rows, expected M*t = {cfg.cache_rows}")
            caches[k] = mat
        elif kind == "delivery":
            d = parse_demand(arg)
            if d in deliveries:
                raise SchemeFormatError(f"duplicate section [{name}]")
            mat = parse_rows(body, cfg)
            if len(mat) > cfg.delivery_rows:
                raise SchemeFormatError(f"[{name}] has {len(mat)} rows, more than R*t = {cfg.delivery_rows}")
            deliveries[d] = mat
        else:
            raise SchemeFormatError(f"unknown section [{name}]")
    if sorted(caches) != [1, 2, 3]:
        raise SchemeFormatError("sections [cache Z1], [cache Z2], [cache Z3] are required")
    return Scheme(cfg, (caches[1], caches[2], caches[3]), dict(sorted(deliveries.items())))


def serialize_scheme(sch: Scheme) -> str:
    cfg = sch.config
    lines = format_config(cfg)
    for k, z in enumerate(sch.caches, 1):
        lines.append(f"[cache Z{k}]")
        lines.extend(format_row(r, cfg) for r in z.rows)
    for d, x in sorted(sch.deliveries.items()):
        lines.append(f"[delivery {demand_str(d)}]")
        lines.extend(format_row(r, cfg) for r in x.rows)
    return "\n".join(lines) + "\n"


def load_scheme(path) -> Scheme:
    with open(path, encoding="utf-8") as fh:
        return parse_scheme(fh.read())


def same_rowspace(a: BitMatrix, b: BitMatrix) -> bool:
    return a.width == b.width and a.rowspace_key() == b.rowspace_key()


def row_image(row: int, word: Word, cfg: ProblemConfig) -> int:
    return permute_row(row, word_permutation(cfg, word.f_power, word.g_power))


__all__ = [
    "ALL_DEMANDS", "Demand", "DemandOrbit", "F", "G", "GF", "IDENTITY", "MAIN_CONFIG",
    "ProblemConfig", "REPRESENTATIVES", "SMALL_CONFIG", "Scheme", "SchemeFormatError", "Word",
    "demand_str", "expand_all_deliveries", "expand_cache_seed", "expand_delivery_seed",
    "load_scheme", "op_f", "op_g", "parse_demand", "parse_row", "parse_scheme", "relabel_h",
    "resolve_orbit", "same_rowspace", "serialize_scheme", "stabilizer_word",
]
