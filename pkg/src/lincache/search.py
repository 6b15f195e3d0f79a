"""Brute-force search for symmetric cache seeds, plus a delivery-seed heuristic.

A cache seed is ``M*t/3`` rows; each row may only use the subfiles in its
active mask.  Candidate ``n`` sets row ``r``'s ``j``-th active subfile (in
file-major, index-minor order) iff bit ``offset_r + j`` of ``n`` is set, where
``offset_r`` is the total mask size of the rows before ``r``.  Indices are
therefore stable across runs, which makes ranges resumable and splittable.
"""

from __future__ import annotations

import itertools
import json
import re
from dataclasses import dataclass, field
from multiprocessing import Pool
from typing import Iterable, Iterator, Sequence

from .gf2 import BitMatrix, rank_rows
from .scheme import (
    FILE_LETTERS, Demand, ProblemConfig, Scheme, SchemeFormatError, Word, _sections,
    demand_str, expand_cache_seed, expand_delivery_seed, format_row, parse_config,
    parse_demand, row_image, stabilizer_word,
)
from .verify import (
    EntropyProfile, REFERENCE_PROFILE, check_type_symmetry, entropy_profile, parse_varset, varset_name,
)

DEFAULT_BUDGET = 1 << 24


class BudgetExceeded(RuntimeError):
    pass


@dataclass(frozen=True)
class SearchSpec:
    config: ProblemConfig
    masks: tuple[tuple[int, ...], ...]  # 0-based columns per seed row, ascending
    target: tuple[tuple[frozenset[str], int], ...]
    max_results: int = 0  # 0 means no limit
    budget: int = DEFAULT_BUDGET

    def __post_init__(self):
        masks = tuple(tuple(sorted(set(m))) for m in self.masks)
        object.__setattr__(self, "masks", masks)
        if 3 * len(masks) != self.config.cache_rows:
            raise ValueError(f"{len(masks)} seed rows cannot fill M*t = {self.config.cache_rows} cache rows")
        for m in masks:
            if any(not 0 <= c < self.config.width for c in m):
                raise ValueError("mask column out of range")

    @property
    def n_bits(self) -> int:
        return sum(len(m) for m in self.masks)

    @property
    def n_candidates(self) -> int:
        return 1 << self.n_bits

    def check_budget(self) -> None:
        if self.n_candidates > self.budget:
            raise BudgetExceeded(f"{self.n_candidates} candidates exceed the budget of {self.budget}")

    def seed(self, index: int) -> BitMatrix:
        rows = []
        for m in self.masks:
            row = 0
            for j, col in enumerate(m):
                if index >> j & 1:
                    row |= 1 << col
            index >>= len(m)
            rows.append(row)
        return BitMatrix(tuple(rows), self.config.width)

    def seed_index(self, seed: BitMatrix) -> int:
        """Inverse of :meth:`seed`; raises if a row leaves its mask."""
        index, shift = 0, 0
        for row, m in zip(seed.rows, self.masks):
            rest = row
            for j, col in enumerate(m):
                if row >> col & 1:
                    index |= 1 << (shift + j)
                    rest ^= 1 << col
            if rest:
                raise ValueError("seed row uses a subfile outside its mask")
            shift += len(m)
        return index


def reference_target() -> tuple[tuple[frozenset[str], int], ...]:
    return tuple((parse_varset(n), v) for n, v in REFERENCE_PROFILE)


def parse_target(lines: Iterable[str]) -> tuple[tuple[frozenset[str], int], ...]:
    out = []
    for line in lines:
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        name, sep, value = line.partition("=")
        if not sep:
            raise SchemeFormatError(f"bad target line {line!r}")
        out.append((parse_varset(name), int(value)))
    return tuple(out)


def _parse_tokens(text: str, cfg: ProblemConfig) -> list[int]:
    cols = []
    for tok in re.split(r"[\s,]+", text.strip()):
        if not tok:
            continue
        m = re.fullmatch(r"([A-Za-z])(\d+)", tok)
        if not m or m.group(1).upper() not in FILE_LETTERS:
            raise SchemeFormatError(f"bad subfile token {tok!r}")
        cols.append(cfg.column(FILE_LETTERS.index(m.group(1).upper()) + 1, int(m.group(2))))
    return cols


def parse_search_spec(text: str) -> SearchSpec:
    sections = list(_sections(text))
    cfg = None
    masks: dict[int, list[int]] = {}
    target: tuple = ()
    opts: dict[str, str] = {}
    for name, body in sections:
        kind, _, arg = name.partition(" ")
        kind = kind.lower()
        if kind == "config":
            cfg = parse_config(body)
    if cfg is None:
        raise SchemeFormatError("a [config] section is required")
    for name, body in sections:
        kind, _, arg = name.partition(" ")
        kind = kind.lower()
        if kind == "config":
            continue
        if kind == "mask":
            k = int(arg)
            if k in masks:
                raise SchemeFormatError(f"duplicate section [{name}]")
            masks[k] = _parse_tokens(" ".join(body), cfg)
        elif kind == "target":
            target = parse_target(body)
        elif kind == "search":
            for line in body:
                key, _, value = line.partition("=")
                opts[key.strip().lower()] = value.strip()
        else:
            raise SchemeFormatError(f"unknown section [{name}]")
    if sorted(masks) != list(range(1, len(masks) + 1)):
        raise SchemeFormatError("mask sections must be numbered 1..s")
    return SearchSpec(
        cfg,
        tuple(tuple(masks[k]) for k in sorted(masks)),
        target or reference_target(),
        max_results=int(opts.get("max_results", 0)),
        budget=int(opts.get("budget", DEFAULT_BUDGET)),
    )


def load_search_spec(path) -> SearchSpec:
    with open(path, encoding="utf-8") as fh:
        return parse_search_spec(fh.read())


@dataclass
class SearchResult:
    seed_index: int
    seed: BitMatrix
    profile: EntropyProfile
    matched: bool

    def to_dict(self, cfg: ProblemConfig) -> dict:
        return {
            "seed_index": self.seed_index,
            "seed": [format_row(r, cfg) for r in self.seed.rows],
            "profile": self.profile.as_dict(),
            "matched": self.matched,
        }


class _Evaluator:
    """Expands candidate seeds via lookup tables and checks staged targets."""

    def __init__(self, spec: SearchSpec):
        cfg = spec.config
        self.spec = spec
        self.t = cfg.subfiles
        words = [Word(a, b) for b in range(3) for a in range(3)]  # index 3*b + a
        # tables[r][w][sub] = image under word w of row r's masked pattern sub
        self.tables = []
        for m in spec.masks:
            per_word = []
            for w in words:
                unit = [row_image(1 << c, w, cfg) for c in m]
                tab = [0] * (1 << len(m))
                for sub in range(1, len(tab)):
                    low = (sub & -sub).bit_length() - 1
                    tab[sub] = tab[sub & (sub - 1)] ^ unit[low]
                per_word.append(tab)
            self.tables.append(per_word)
        self.splits = []
        shift = 0
        for m in spec.masks:
            self.splits.append((shift, (1 << len(m)) - 1))
            shift += len(m)
        staged = sorted(spec.target, key=lambda e: (sum(v[0] == "W" for v in e[0]), len(e[0])))
        self.stages = []
        for s, value in staged:
            caches = [int(v[1]) - 1 for v in sorted(s) if v[0] == "Z"]
            files = [int(v[1]) for v in s if v[0] == "W"]
            keep = ~sum(cfg.file_mask(j) for j in files)
            self.stages.append((s, value, caches, len(files) * self.t, keep))

    def caches(self, index: int) -> list[list[int]]:
        subs = [(index >> shift) & mask for shift, mask in self.splits]
        out = []
        for b in range(3):
            rows = []
            for a in range(3):
                w = 3 * b + a
                rows.extend(tab[w][sub] for tab, sub in zip(self.tables, subs))
            out.append(rows)
        return out

    def evaluate(self, index: int) -> tuple[dict[frozenset[str], int], bool]:
        zs = self.caches(index)
        got: dict[frozenset[str], int] = {}
        for s, value, caches, offset, keep in self.stages:
            r = offset + rank_rows(row & keep for k in caches for row in zs[k])
            got[s] = r
            if r != value:
                return got, False
        return got, True


def _confirm(spec: SearchSpec, seed: BitMatrix) -> bool:
    # independent recomputation through the scheme/verify path
    z = expand_cache_seed(seed, spec.config)
    sch = Scheme(spec.config, z)
    prof = entropy_profile(sch, [s for s, _ in spec.target])
    if any(prof.values[s] != v for s, v in spec.target):
        raise AssertionError(f"search evaluator disagrees with entropy_profile on seed {seed.rows}")
    return check_type_symmetry(sch)[0]


def enumerate_cache_seeds(spec: SearchSpec, start: int = 0, stop: int | None = None) -> Iterator[SearchResult]:
    """Yield one result per candidate index in ``[start, stop)``, in order."""
    spec.check_budget()
    stop = spec.n_candidates if stop is None else min(stop, spec.n_candidates)
    ev = _Evaluator(spec)
    for index in range(start, stop):
        got, matched = ev.evaluate(index)
        seed = spec.seed(index)
        if matched:
            matched = _confirm(spec, seed)
        yield SearchResult(index, seed, EntropyProfile(spec.config.subfiles, got), matched)


def _scan(args) -> list[tuple[int, dict]]:
    spec, start, stop = args
    ev = _Evaluator(spec)
    hits = []
    for index in range(start, stop):
        got, matched = ev.evaluate(index)
        if matched:
            hits.append((index, got))
    return hits


def iter_matches(spec: SearchSpec, start: int = 0, stop: int | None = None, jobs: int = 1,
                 chunk: int = 1 << 14) -> Iterator[SearchResult]:
    """Matched results in ``[start, stop)``, yielded in seed-index order.

    The outcome does not depend on ``jobs``: chunks are scanned independently
    and merged in index order.
    """
    spec.check_budget()
    stop = spec.n_candidates if stop is None else min(stop, spec.n_candidates)
    ranges = [(spec, lo, min(lo + chunk, stop)) for lo in range(start, stop, chunk)]
    found = 0
    pool = Pool(jobs) if jobs > 1 and len(ranges) > 1 else None
    try:
        batches = pool.imap(_scan, ranges) if pool else map(_scan, ranges)
        for hits in batches:
            for index, got in hits:
                seed = spec.seed(index)
                if not _confirm(spec, seed):
                    continue
                yield SearchResult(index, seed, EntropyProfile(spec.config.subfiles, got), True)
                found += 1
                if spec.max_results and found >= spec.max_results:
                    return
    finally:
        if pool:
            pool.terminate()


def find_matches(spec: SearchSpec, start: int = 0, stop: int | None = None, jobs: int = 1,
                 chunk: int = 1 << 14) -> list[SearchResult]:
    return list(iter_matches(spec, start, stop, jobs, chunk))


def default_delivery_pool(sch: Scheme, rep: Demand | str, max_weight: int = 4,
                          all_files: bool = False) -> list[int]:
    """Rows of weight <= ``max_weight`` on the demanded files' blocks, then cache rows."""
    rep = parse_demand(rep) if isinstance(rep, str) else rep
    cfg = sch.config
    files = (1, 2, 3) if all_files else sorted(set(rep))
    cols = [c for j in files for c in range(cfg.width) if cfg.file_mask(j) >> c & 1]
    pool = []
    for w in range(1, max_weight + 1):
        for combo in itertools.combinations(cols, w):
            pool.append(sum(1 << c for c in combo))
    seen = set(pool)
    for z in sch.caches:
        for r in z.rows:
            if r and r not in seen:
                seen.add(r)
                pool.append(r)
    return pool


def _user_deficits(sch: Scheme, rows: Sequence[int], rep: Demand) -> tuple[int, int, int]:
    files = sch.files()
    out = []
    for k in range(3):
        base = sch.caches[k].rows + tuple(rows)
        out.append(rank_rows(base + files[rep[k] - 1].rows) - rank_rows(base))
    return tuple(out)  # type: ignore[return-value]


def _deficit(sch: Scheme, rows: Sequence[int], rep: Demand) -> int:
    return sum(_user_deficits(sch, rows, rep))


def search_delivery(sch: Scheme, rep: Demand | str, pool: Sequence[int],
                    budget: int = 100_000, beam: int = 16) -> BitMatrix | None:
    """Greedy depth-first search for a decoding delivery seed.

    When ``3 | R*t`` and some ``g^b o f`` fixes ``rep``, seeds have ``R*t/3``
    rows and expand through :func:`stabilizer_word`; otherwise the seed is the
    whole delivery matrix.  Each node expands at most ``beam`` candidates,
    lowest deficit first.  ``None`` means the budget or pool ran out, not that
    no delivery exists.
    """
    rep = parse_demand(rep) if isinstance(rep, str) else rep
    cfg = sch.config
    if len(set(rep)) == 1:
        gen = cfg.file_generator(rep[0])
        return gen if len(gen) <= cfg.delivery_rows else None
    word = stabilizer_word(rep)
    if word is not None and cfg.delivery_rows % 3 == 0:
        depth = cfg.delivery_rows // 3

        def expand(v: int) -> list[int]:
            v1 = row_image(v, word, cfg)
            return [v, v1, row_image(v1, word, cfg)]
    else:
        depth = cfg.delivery_rows

        def expand(v: int) -> list[int]:
            return [v]

    images = [expand(v) for v in pool]
    nodes = 0
    visited: set[frozenset[int]] = set()
    per_row = 3 * len(images[0]) if images else 0

    def dfs(chosen: list[int], rows: list[int], deficit: int) -> list[int] | None:
        nonlocal nodes
        if deficit == 0:
            return chosen
        # each matrix row lowers the deficit by at most one per user
        if deficit > per_row * (depth - len(chosen)):
            return None
        key = frozenset(chosen)
        if key in visited:
            return None
        visited.add(key)
        scored = []
        for i in range(len(pool)):
            if i in key:
                continue
            nodes += 1
            if nodes > budget:
                raise BudgetExceeded
            per_user = _user_deficits(sch, rows + images[i], rep)
            d = sum(per_user)
            # a row can be useless alone and still needed later, so ties stay in;
            # among equal totals prefer the most balanced progress across users
            if d <= deficit:
                scored.append((d, max(per_user), i))
        scored.sort()
        for d, _, i in scored[:beam]:
            found = dfs(chosen + [i], rows + images[i], d)
            if found is not None:
                return found
        return None

    try:
        found = dfs([], [], _deficit(sch, [], rep))
    except BudgetExceeded:
        return None
    if found is None:
        return None
    return BitMatrix(tuple(pool[i] for i in found), cfg.width)


def expand_found_delivery(sch: Scheme, rep: Demand | str, seed: BitMatrix) -> BitMatrix:
    rep = parse_demand(rep) if isinstance(rep, str) else rep
    word = stabilizer_word(rep)
    cfg = sch.config
    if len(set(rep)) > 1 and word is not None and cfg.delivery_rows % 3 == 0:
        rows = []
        for v in seed.rows:
            v1 = row_image(v, word, cfg)
            rows += [v, v1, row_image(v1, word, cfg)]
        return BitMatrix(tuple(rows), cfg.width)
    return seed


def results_to_jsonl(results: Iterable[SearchResult], cfg: ProblemConfig) -> str:
    return "".join(json.dumps(r.to_dict(cfg)) + "\n" for r in results)
