"""Acceptance criteria, one test each; outcomes are also printed as a summary block."""

from __future__ import annotations

import random
import time
from fractions import Fraction

from conftest import record
from oracle import dense_rank, file_rows, user_decodes

from lincache.converse import LinearBound, build_lp, check_certificate, load_certificate, load_universe, solve_and_certify
from lincache.gf2 import BitMatrix, rank_rows
from lincache.scheme import (
    ALL_DEMANDS,
    REPRESENTATIVES,
    SMALL_CONFIG,
    Scheme,
    demand_str,
    expand_all_deliveries,
    expand_cache_seed,
    op_g,
)
from lincache.search import find_matches, load_search_spec
from lincache.verify import REFERENCE_PROFILE, check_decodability, check_type_symmetry, reference_report

CORNER = (Fraction(3, 5), Fraction(3, 2))


def test_01_scheme_verification(main_scheme):
    start = time.perf_counter()
    report = check_decodability(expand_all_deliveries(main_scheme))
    elapsed = time.perf_counter() - start
    ok = (report.ok and len(report.decoded) == 81 and report.cache_ranks == (6, 6, 6)
          and max(report.delivery_ranks.values()) <= 15 and (report.memory, report.rate) == CORNER
          and elapsed < 1.0)
    record("1", ok, f"{len(report.decoded)} checks, cache ranks {report.cache_ranks}, "
                    f"max delivery rank {max(report.delivery_ranks.values())}, {elapsed:.3f} s")
    assert ok


def test_02_entropy_profile(main_scheme):
    start = time.perf_counter()
    rows = reference_report(main_scheme)
    elapsed = time.perf_counter() - start
    got = {r.name: r.actual for r in rows if not r.note}
    full = next(r.actual for r in rows if r.name == "Z1Z2Z3W1W2W3")
    ok = all(got[name] == value for name, value in REFERENCE_PROFILE) and full == 30 and elapsed < 1.0
    record("2", ok, f"{len(REFERENCE_PROFILE)} table values and full set {full}, {elapsed:.3f} s")
    assert ok


def test_03_small_scheme(small_scheme):
    start = time.perf_counter()
    cfg = small_scheme.config
    z1, z2, z3 = small_scheme.caches
    ranks = tuple(rank_rows(z.rows) for z in small_scheme.caches)
    x_ranks = {demand_str(d): rank_rows(small_scheme.deliveries[d].rows) for d in REPRESENTATIVES}
    row_for_row = op_g(z1, cfg).rows == z2.rows and op_g(z2, cfg).rows == z3.rows
    reps = check_decodability(small_scheme, REPRESENTATIVES)
    full = check_decodability(expand_all_deliveries(small_scheme))
    elapsed = time.perf_counter() - start
    ok = (ranks == (3, 3, 3) and max(x_ranks.values()) <= 10 and row_for_row
          and reps.ok and full.ok and elapsed < 1.0)
    bad = sorted({f"{d}/user{k}" for d, k in full.failures()})
    record("3", ok, f"cache ranks {ranks}, max delivery rank {max(x_ranks.values())}, "
                    f"Z2=g(Z1) row-for-row {row_for_row}, representatives decode {reps.ok}, "
                    f"27 demands decode {full.ok}" + (f"; failing {', '.join(bad)}" if bad else ""))
    assert ok


def test_04_search_reproduction(data, main_scheme, enlarged_run):
    simple = load_search_spec(data / "search" / "simple.spec")
    start = time.perf_counter()
    hits = find_matches(simple)
    spec, enlarged = enlarged_run
    z1 = main_scheme.caches[0]
    seed = BitMatrix((z1.rows[0], z1.rows[3]), z1.width)
    index = spec.seed_index(seed)
    found = {r.seed_index for r in enlarged}
    ok = len(hits) >= 1 and index in found
    record("4", ok, f"2^{simple.n_bits} run: {len(hits)} matched seeds ({time.perf_counter() - start:.1f} s); "
                    f"2^{spec.n_bits} run: {len(enlarged)} matched, printed seed index {index} "
                    f"{'present' if index in found else 'absent'}")
    assert ok


def test_05_certificates(data):
    details, ok = [], True
    for name, c in (("bound_10_6", 15), ("bound_5_4", 9)):
        start = time.perf_counter()
        result = check_certificate(load_certificate(data / "certs" / f"{name}.cert"))
        elapsed = time.perf_counter() - start
        good = result.ok and result.derived == c and not result.residual and elapsed < 1.0
        ok &= good
        details.append(f"{result.target} {'accepted' if good else 'rejected'} in {elapsed:.3f} s")
    record("5", ok, "; ".join(details))
    assert ok


def test_06_lp_bounds(data):
    cases = [("bound_10_6", (10, 6), 15), ("bound_5_4", (5, 4), 9),
             ("cutset_3_1", (3, 1), 3), ("cutset_1_1", (1, 1), 2), ("cutset_1_3", (1, 3), 3)]
    details, ok = [], True
    for name, obj, c in cases:
        start = time.perf_counter()
        sol = solve_and_certify(build_lp(load_universe(data / "universes" / f"{name}.universe"), obj))
        elapsed = time.perf_counter() - start
        good = sol.bound.c == c and sol.check.ok and elapsed < 300
        ok &= good
        details.append(f"{obj}->{sol.bound.c} ({elapsed:.2f} s)")
    record("6", ok, ", ".join(details))
    assert ok


def test_07_non_shannon_separation(data):
    u = load_universe(data / "universes" / "no_aux_10_6.universe")
    assert not any(v.startswith("K") for v in u.variables)
    sol = solve_and_certify(build_lp(u, (10, 6)))
    ok = sol.check.ok and sol.bound.c < 15
    record("7", ok, f"without K1, K2 the certified bound is 10M+6R >= {sol.bound.c} "
                    f"(~{float(sol.bound.c):.4f}) < 15")
    assert ok


def _greedy_delivery(caches, d, cfg, rng):
    """Rows of the requested files added until every user decodes, then randomly mixed."""
    t = cfg.subfiles
    rows: list[int] = []
    for k in range(3):
        for r in file_rows(d[k], t):
            if not user_decodes(list(caches[k].rows), rows, d[k], t):
                if dense_rank(list(caches[k].rows) + rows + [r], 3 * t) > dense_rank(list(caches[k].rows) + rows, 3 * t):
                    rows.append(r)
    # an invertible mix keeps the row space
    mixed = list(rows)
    for i in range(len(mixed)):
        for j in range(len(mixed)):
            if i != j and rng.random() < 0.5:
                mixed[i] ^= mixed[j]
    assert dense_rank(mixed, 3 * t) == dense_rank(rows, 3 * t)
    return BitMatrix(tuple(mixed), cfg.width)


def test_08a_transform_invariance():
    rng = random.Random(20261016)
    cfg = SMALL_CONFIG
    t = cfg.subfiles
    trials, checked = 120, 0
    for _ in range(trials):
        seed = BitMatrix((rng.getrandbits(cfg.width),), cfg.width)
        caches = expand_cache_seed(seed, cfg)
        deliveries = {d: _greedy_delivery(caches, d, cfg, rng) for d in REPRESENTATIVES}
        sch = expand_all_deliveries(Scheme(cfg, caches, deliveries))
        for d in ALL_DEMANDS:
            x = list(sch.deliveries[d].rows)
            for k in range(3):
                assert user_decodes(list(caches[k].rows), x, d[k], t), (seed.rows, demand_str(d), k + 1)
                checked += 1
    record("8a", True, f"{trials} random symmetric seeds, {checked} (seed,demand,user) checks decode")


def test_08b_type_symmetry(main_scheme, small_scheme):
    results = {name: check_type_symmetry(s) for name, s in (("p06_15", main_scheme), ("p05_53", small_scheme))}
    ok = all(r[0] for r in results.values())
    record("8b", ok, ", ".join(f"{n}: {'type symmetric' if r[0] else f'{len(r[1])} counterexamples'}"
                               for n, r in results.items()) + " over all 63 subsets")
    assert ok


def test_08c_rank_fuzz():
    # the hypothesis suite in test_gf2 covers 10^4 cases; this is a seeded copy for the summary
    rng = random.Random(4)
    n = 10_000
    for _ in range(n):
        w = rng.randint(1, 12)
        a, b, c = ([rng.getrandbits(w) for _ in range(rng.randint(0, 6))] for _ in range(3))
        assert rank_rows(a) == dense_rank(a, w)
        assert rank_rows(a) <= rank_rows(a + b) <= rank_rows(a) + len(b)
        assert rank_rows(a + c) + rank_rows(b + c) >= rank_rows(a + b + c) + rank_rows(c)
    record("8c", True, f"{n} random matrices: rank agrees with dense oracle, monotone and submodular")


def test_08d_tightness(main_scheme):
    report = check_decodability(expand_all_deliveries(main_scheme))
    assert report.ok
    m, r = report.memory, report.rate
    bounds = [LinearBound(10, 6, 15), LinearBound(5, 4, 9)]
    ok = all(b.holds_at(m, r) and b.a * m + b.b * r == b.c for b in bounds)
    record("8d", ok, f"at verified (M,R)=({m},{r}): 10M+6R={10 * m + 6 * r}, 5M+4R={5 * m + 4 * r}")
    assert ok


def test_info_common_information_bound(data):
    u = load_universe(data / "universes" / "common_g.universe")
    sol = solve_and_certify(build_lp(u, (41, 31)))
    # reported, not gated
    record("9 (info)", True, f"41M+31R >= {sol.bound.c} certified on {len(u.variables)} variables")
