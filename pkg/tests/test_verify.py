from __future__ import annotations

import json
from dataclasses import replace
from fractions import Fraction

import pytest

from oracle import dense_rank, user_decodes

from lincache.gf2 import BitMatrix
from lincache.scheme import (
    ALL_DEMANDS,
    REPRESENTATIVES,
    Scheme,
    demand_str,
    expand_all_deliveries,
    parse_demand,
)
from lincache.verify import (
    REFERENCE_PROFILE,
    MissingDeliveryError,
    UnknownVariableError,
    all_subsets,
    check_decodability,
    check_type_symmetry,
    entropy_profile,
    parse_varset,
    reference_report,
    type_vector,
)


def test_main_scheme_all_demands(main_scheme):
    report = check_decodability(expand_all_deliveries(main_scheme))
    assert report.ok, report.violations
    assert len(report.decoded) == 81
    assert report.cache_ranks == (6, 6, 6)
    assert max(report.delivery_ranks.values()) == 15
    assert (report.memory, report.rate) == (Fraction(3, 5), Fraction(3, 2))


def test_decodability_agrees_with_oracle(main_scheme):
    sch = expand_all_deliveries(main_scheme)
    t = sch.config.subfiles
    for d in ALL_DEMANDS[::4]:
        x = list(sch.deliveries[d].rows)
        for k in range(3):
            assert user_decodes(list(sch.caches[k].rows), x, d[k], t)


@pytest.mark.parametrize("rep", ["ABC", "ACB"])
def test_deleting_a_delivery_row_is_caught(main_scheme, rep):
    d = parse_demand(rep)
    x = main_scheme.deliveries[d]
    t = main_scheme.config.subfiles
    cut = BitMatrix(x.rows[1:], x.width)
    sch = replace(main_scheme, deliveries={**main_scheme.deliveries, d: cut})
    report = check_decodability(sch, REPRESENTATIVES)
    assert not report.ok
    expected = {
        (rep, k + 1)
        for k in range(3)
        if not user_decodes(list(sch.caches[k].rows), list(cut.rows), d[k], t)
    }
    assert expected, "oracle should see a rank deficiency"
    assert set(report.failures()) == expected


def test_reference_values(main_scheme):
    rows = {(r.name, r.note): r for r in reference_report(main_scheme)}
    for name, value in REFERENCE_PROFILE:
        assert rows[(name, "")].actual == value
    full = [r for r in rows.values() if r.name == "Z1Z2Z3W1W2W3"][0]
    assert full.actual == 30 and full.ok
    literal = [r for r in rows.values() if "literally" in r.note][0]
    assert literal.actual == 27 and not literal.ok


def test_profile_matches_oracle(main_scheme):
    prof = entropy_profile(main_scheme, all_subsets())
    t = main_scheme.config.subfiles
    gens = {f"Z{k}": list(z.rows) for k, z in enumerate(main_scheme.caches, 1)}
    for j in (1, 2, 3):
        gens[f"W{j}"] = [1 << ((j - 1) * t + i) for i in range(t)]
    for s, r in prof.items():
        assert r == dense_rank([row for v in s for row in gens[v]], 3 * t)


@pytest.mark.parametrize("fixture", ["main_scheme", "small_scheme"])
def test_type_symmetry_bundled(fixture, request):
    ok, bad = check_type_symmetry(request.getfixturevalue(fixture))
    assert ok and not bad


def test_type_symmetry_counterexample(main_scheme):
    z1, z2, z3 = main_scheme.caches
    broken = replace(main_scheme, caches=(z1, z2, BitMatrix(z3.rows[:-1] + (z1.rows[0],), z3.width)))
    ok, bad = check_type_symmetry(broken)
    assert not ok and bad
    assert all(b.first_rank != b.second_rank for b in bad)


def test_small_scheme_profile(small_scheme):
    prof = entropy_profile(small_scheme, ["Z1", "Z1Z2Z3W1W2W3"])
    assert prof["Z1"] == 3 and prof["Z1Z2Z3W1W2W3"] == 18
    assert prof.in_files("Z1") == Fraction(1, 2)


def test_empty_caches_profile(main_scheme):
    cfg = main_scheme.config
    empty = Scheme(cfg, tuple(BitMatrix.empty(cfg.width) for _ in range(3)))
    prof = entropy_profile(empty, ["Z1", "Z1Z2", "Z1Z2Z3", "Z1W1"])
    assert prof["Z1"] == prof["Z1Z2"] == prof["Z1Z2Z3"] == 0
    assert prof["Z1W1"] == 10


def test_missing_delivery(main_scheme):
    with pytest.raises(MissingDeliveryError):
        check_decodability(main_scheme)  # only representatives present


def test_rate_violation_is_reported(main_scheme):
    d = parse_demand("AAA")
    cfg = main_scheme.config
    fat = BitMatrix(main_scheme.deliveries[d].rows + tuple(1 << (10 + i) for i in range(6)), cfg.width)
    sch = replace(main_scheme, deliveries={d: fat})
    report = check_decodability(sch, [d])
    assert not report.ok
    assert any("exceeds R*t" in v for v in report.violations)


def test_report_serialisation(small_fixed_scheme):
    report = check_decodability(expand_all_deliveries(small_fixed_scheme))
    data = json.loads(report.to_json())
    assert data["accepted"] is True
    assert data["memory"] == "1/2" and data["rate"] == "5/3"
    assert len(data["decoding"]) == 27
    assert "ACCEPTED" in report.to_text()


def test_varset_parsing():
    assert parse_varset("Z1,W2") == parse_varset("W2Z1") == frozenset({"Z1", "W2"})
    assert type_vector("Z1Z2W3") == (1, 2)
    with pytest.raises(UnknownVariableError):
        parse_varset("Z4")
    assert len(all_subsets()) == 63


def test_printed_small_scheme_fails_only_on_acb_orbit(small_scheme):
    report = check_decodability(expand_all_deliveries(small_scheme))
    failing = {d for d, _ in report.failures()}
    assert failing == {"ACB", "BAC", "CBA"}
    assert demand_str(parse_demand("ACB")) == "ACB"
