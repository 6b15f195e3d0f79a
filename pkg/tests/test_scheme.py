from __future__ import annotations

import random
import re
from collections import Counter
from fractions import Fraction

import pytest

from lincache.gf2 import BitMatrix
from lincache.scheme import (
    ALL_DEMANDS,
    F,
    G,
    GF,
    IDENTITY,
    MAIN_CONFIG,
    REPRESENTATIVES,
    SMALL_CONFIG,
    ProblemConfig,
    Scheme,
    SchemeFormatError,
    Word,
    demand_str,
    expand_all_deliveries,
    expand_cache_seed,
    expand_delivery_seed,
    op_f,
    op_g,
    parse_demand,
    parse_row,
    parse_scheme,
    relabel_h,
    resolve_orbit,
    same_rowspace,
    serialize_scheme,
    stabilizer_word,
)


def unit(cfg, token):
    return parse_row(token, cfg)


def test_f_cycles_files():
    cfg = MAIN_CONFIG
    m = BitMatrix((unit(cfg, "A1"), unit(cfg, "B7"), unit(cfg, "C10")), cfg.width)
    assert op_f(m, cfg).rows == tuple(unit(cfg, t) for t in ("B1", "C7", "A10"))


def test_g_shifts_indices_and_fixes_ten():
    cfg = MAIN_CONFIG
    m = BitMatrix((unit(cfg, "A1"), unit(cfg, "B7"), unit(cfg, "C10"), unit(cfg, "A9")), cfg.width)
    assert op_g(m, cfg).rows == tuple(unit(cfg, t) for t in ("A4", "B1", "C10", "A3"))
    s = SMALL_CONFIG
    assert op_g(BitMatrix((unit(s, "A5"),), s.width), s).rows == (unit(s, "A1"),)


@pytest.mark.parametrize("cfg", [MAIN_CONFIG, SMALL_CONFIG])
def test_operator_group_relations(cfg):
    rng = random.Random(1)
    m = BitMatrix(tuple(rng.getrandbits(cfg.width) for _ in range(5)), cfg.width)
    assert op_f(op_f(op_f(m, cfg), cfg), cfg) == m
    assert op_g(op_g(op_g(m, cfg), cfg), cfg) == m
    assert op_f(op_g(m, cfg), cfg) == op_g(op_f(m, cfg), cfg)
    assert GF.apply(m, cfg) == op_g(op_f(m, cfg), cfg)
    assert (F ** 2).apply(m, cfg) == op_f(op_f(m, cfg), cfg)
    assert IDENTITY.apply(m, cfg) == m


def test_word_algebra_and_names():
    assert F * G == GF
    assert GF ** 3 == IDENTITY
    assert str(GF) == "g∘f"
    assert str(Word(1, 2)) == "g^2∘f"
    assert str(IDENTITY) == "id"


def test_demand_actions():
    assert F.apply_demand(parse_demand("ABC")) == parse_demand("BCA")
    # g hands user k's request to user k+1
    assert G.apply_demand(parse_demand("ABB")) == parse_demand("BAB")
    assert parse_demand("213") == parse_demand("BAC")
    with pytest.raises(SchemeFormatError):
        parse_demand("ABD")


def test_partition_covers_all_demands_once():
    parts = Counter(resolve_orbit(d).part for d in ALL_DEMANDS)
    assert parts == {1: 3, 2: 3, 3: 3, 4: 9, 5: 9}
    for d in ALL_DEMANDS:
        o = resolve_orbit(d)
        assert o.transform.apply_demand(o.representative) == d


def test_stabilizers():
    assert stabilizer_word("AAA") is None
    assert stabilizer_word("ABC") == GF
    assert stabilizer_word("ACB") == Word(1, 2)
    assert stabilizer_word("ABB") is None
    for d in ALL_DEMANDS:
        w = stabilizer_word(d)
        if w is not None:
            assert w.apply_demand(d) == d


def test_relabel_h():
    assert relabel_h("Z3") == "Z1"
    assert relabel_h("W1") == "W2"
    with pytest.raises(ValueError):
        relabel_h("X123")


@pytest.mark.parametrize("fixture", ["main_scheme", "small_scheme"])
def test_bundled_caches_are_symmetric(fixture, request):
    sch = request.getfixturevalue(fixture)
    cfg = sch.config
    z1, z2, z3 = sch.caches
    for z in sch.caches:
        assert same_rowspace(op_f(z, cfg), z)
    assert same_rowspace(op_g(z1, cfg), z2)
    assert same_rowspace(op_g(z2, cfg), z3)


def test_small_scheme_g_is_row_for_row(small_scheme):
    cfg = small_scheme.config
    z1, z2, z3 = small_scheme.caches
    assert op_g(z1, cfg).rows == z2.rows
    assert op_g(z2, cfg).rows == z3.rows


def test_cache_seed_expansion_reproduces_table(main_scheme):
    cfg = main_scheme.config
    z1 = main_scheme.caches[0]
    # printed order is s1, f(s1), f^2(s1), s2, f(s2), f^2(s2)
    seed = BitMatrix((z1.rows[0], z1.rows[3]), cfg.width)
    got = expand_cache_seed(seed, cfg)
    for a, b in zip(got, main_scheme.caches):
        assert same_rowspace(a, b)
    with pytest.raises(ValueError):
        expand_cache_seed(BitMatrix(z1.rows[:1], cfg.width), cfg)


def test_printed_abc_acb_are_closed_under_their_stabilizer(main_scheme):
    cfg = main_scheme.config
    for rep in ("ABC", "ACB"):
        x = main_scheme.deliveries[parse_demand(rep)]
        w = stabilizer_word(rep)
        assert same_rowspace(w.apply(x, cfg), x), rep
    # g∘f does not fix ACB, and the printed rows are not closed under it
    x = main_scheme.deliveries[parse_demand("ACB")]
    assert not same_rowspace(GF.apply(x, cfg), x)


def test_delivery_seed_expansion():
    cfg = MAIN_CONFIG
    seed = BitMatrix(tuple(parse_row(t, cfg) for t in ("A1+B2", "C3", "A4", "B5", "C6")), cfg.width)
    x = expand_delivery_seed(seed, cfg)
    assert len(x) == 15
    assert x.rows[5:10] == GF.apply(seed, cfg).rows
    with pytest.raises(ValueError):
        expand_delivery_seed(BitMatrix(seed.rows[:4], cfg.width), cfg)


def test_expand_all_requires_representatives(main_scheme):
    partial = Scheme(main_scheme.config, main_scheme.caches,
                     {d: x for d, x in main_scheme.deliveries.items() if demand_str(d) != "ACC"})
    with pytest.raises(KeyError):
        expand_all_deliveries(partial)
    full = expand_all_deliveries(main_scheme)
    assert len(full.deliveries) == 27


def test_roundtrip(main_scheme):
    text = serialize_scheme(main_scheme)
    again = parse_scheme(text)
    assert again.caches == main_scheme.caches
    assert again.deliveries == main_scheme.deliveries
    assert serialize_scheme(again) == text


BASE = """[config]
subfiles=6
memory=1/2
rate=5/3
gshift=2
[cache Z1]
A1
B1
C1
[cache Z2]
A3
B3
C3
[cache Z3]
A5
B5
C5
"""


@pytest.mark.parametrize("bad, msg", [
    (BASE.replace("A1\n", "A7\n", 1), "out of range"),
    (BASE.replace("A1\n", "D1\n", 1), "unknown file letter"),
    (BASE.replace("A1\nB1\n", "A1\n", 1), "expected M*t"),
    (BASE + "[cache Z1]\nA1\nB1\nC1\n", "duplicate"),
    (BASE.replace("gshift=2", "gshift=1"), "g^3 = id"),
    (BASE.replace("memory=1/2", "memory=1/4"), "integer"),
    (BASE + "[delivery ABC]\n" + "A1\n" * 11, "more than R*t"),
    (BASE.replace("[config]", "[config]\ncolour=blue"), "unknown config"),
])
def test_format_errors(bad, msg):
    with pytest.raises(SchemeFormatError, match=re.escape(msg)):
        parse_scheme(bad)


def test_config_validation():
    with pytest.raises(ValueError):
        ProblemConfig(subfiles=10, memory=Fraction(1, 3), rate=Fraction(3, 2), g_shift=3)
    assert MAIN_CONFIG.cache_rows == 6 and MAIN_CONFIG.delivery_rows == 15


def test_zero_row_token():
    assert parse_row("0", MAIN_CONFIG) == 0
    assert parse_row("A1 + A1", MAIN_CONFIG) == 0
