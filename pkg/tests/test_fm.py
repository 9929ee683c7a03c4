import pytest
from hypothesis import given
from hypothesis import strategies as st

from cpco.fm import (
    Configuration, EnumerationOverflow, FeatureModelError, GroupKind, ParseError,
    ViolationKind, bundled_model, bundled_models, check_validity, count_valid_configurations,
    enumerate_valid_configurations, is_valid, iter_valid_configurations, parse_feature_model,
    serialize_feature_model,
)

from cpco.sat import solve, to_cnf

from conftest import brute_force_valid, random_models

C1 = ["MobileMedia", "MediaSelection", "Music", "MediaManagement", "ScreenSize", "Screen3"]


def test_mobilemedia_shape(mobilemedia):
    assert mobilemedia.size == 43
    assert len(mobilemedia.requires) + len(mobilemedia.excludes) == 3
    assert sum(g is not GroupKind.NONE for g in mobilemedia.group_kind) == 7


def test_root_only_document():
    fm = parse_feature_model("Root\n")
    assert fm.size == 1 and not fm.requires and not fm.excludes
    assert enumerate_valid_configurations(fm, 10) == [Configuration(1, 1)]


def test_ids_follow_document_order(mm_small):
    assert mm_small.names[:4] == ("MobileMedia", "MediaSelection", "Photo", "Music")
    assert all(p is None or p < f for f, p in enumerate(mm_small.parent))


@pytest.mark.parametrize("text, fragment", [
    ("Root\n  G [optional] <xor>\n    A\n", "2 children"),
    ("Root\n  A [optional]\n  A [optional]\n", "duplicate"),
    ("Root\n  A [optional]\nconstraints:\n  A requires B\n", "unknown feature"),
    ("Root\n  A [optional]\n  B [optional]\nconstraints:\n  A or B\n", "requires"),
    ("Root\n  A [sometimes]\n", "line 2"),
    ("Root\n   A [optional]\n", "line 2"),
])
def test_parse_errors(text, fragment):
    with pytest.raises(FeatureModelError, match=fragment):
        parse_feature_model(text)


def test_parse_error_carries_position():
    with pytest.raises(ParseError) as info:
        parse_feature_model("Root\n  A [sometimes]\n")
    assert info.value.line == 2


def test_c1_is_valid(mm_small):
    assert check_validity(mm_small, mm_small.configuration(C1)) == []


def test_adding_screen1_breaks_xor(mm_small):
    violations = check_validity(mm_small, mm_small.configuration(C1 + ["Screen1"]))
    assert [(v.kind, mm_small.names[v.subject]) for v in violations] == [(ViolationKind.CXor, "ScreenSize")]


def test_empty_configuration_lacks_root(mm_small):
    kinds = {v.kind for v in check_validity(mm_small, Configuration(0, mm_small.size))}
    assert ViolationKind.CRoot in kinds


def test_width_mismatch(mm_small):
    with pytest.raises(ValueError):
        check_validity(mm_small, Configuration(1, 3))


@pytest.mark.parametrize("extra, kind", [
    (["SMSTransfer", "ReceivePhoto", "SendPhoto"], ViolationKind.CReq),
    (["SMSTransfer", "CopyMedia"], ViolationKind.CMand),
    (["SetFavourites"], ViolationKind.CPar),
])
def test_each_violation_kind_is_reported(mm_small, extra, kind):
    assert kind in {v.kind for v in check_validity(mm_small, mm_small.configuration(C1 + extra))}


def test_or_group_needs_a_member(mm_small):
    c = mm_small.configuration([n for n in C1 if n != "Music"])
    assert [v.kind for v in check_validity(mm_small, c)] == [ViolationKind.COr]


def test_exclusion(mobilemedia):
    auto, low = mobilemedia.id("AutoBackup"), mobilemedia.id("LowPowerMode")
    model = solve(to_cnf(mobilemedia), assumptions=[auto + 1, -(low + 1)])
    c = Configuration.from_bools(model).set(low, True)
    violations = check_validity(mobilemedia, c)
    assert [(v.kind, v.subject, v.witness) for v in violations] == [(ViolationKind.CExcl, auto, low)]


def test_wget_count():
    assert count_valid_configurations(bundled_model("wget")) == 8192


@pytest.mark.slow
def test_mobilemedia_count(mobilemedia):
    assert count_valid_configurations(mobilemedia, cap=2_200_000) == 2_128_896


def test_enumeration_overflow(mm_small):
    with pytest.raises(EnumerationOverflow):
        enumerate_valid_configurations(mm_small, 100)


@pytest.mark.parametrize("name", ["two_groups", "two_groups_tree", "cyclic_pair", "cyclic_vehicle"])
def test_enumeration_matches_brute_force(name):
    fm = bundled_model(name)
    assert enumerate_valid_configurations(fm, 10**6) == brute_force_valid(fm)


@given(random_models(max_n=9))
def test_enumeration_oracle_on_random_models(fm):
    got = enumerate_valid_configurations(fm, 10**6)
    assert got == brute_force_valid(fm)
    assert all(is_valid(fm, c) for c in got)


@given(random_models(max_n=12))
def test_enumeration_is_lexicographic(fm):
    # lexicographic over the bit vector read feature 0 first
    keys = [tuple(c >> i & 1 for i in range(fm.size)) for c in iter_valid_configurations(fm)]
    assert keys == sorted(keys)


@given(random_models(max_n=9), st.data())
def test_valid_means_structure_holds(fm, data):
    configs = brute_force_valid(fm)
    c = data.draw(st.sampled_from(configs))
    assert 0 in c
    for f in c.active():
        p = fm.parent[f]
        assert p is None or p in c
        if fm.group_kind[f] is GroupKind.XOR:
            assert sum(k in c for k in fm.children[f]) == 1
        if fm.group_kind[f] is GroupKind.OR:
            assert any(k in c for k in fm.children[f])
    for a, b in fm.requires:
        assert a not in c or b in c
    for a, b in fm.excludes:
        assert not (a in c and b in c)


@pytest.mark.parametrize("name", bundled_models())
def test_bundled_round_trip(name):
    fm = bundled_model(name)
    text = serialize_feature_model(fm)
    assert parse_feature_model(text) == fm
    assert serialize_feature_model(parse_feature_model(text)) == text


@given(random_models(max_n=15))
def test_round_trip_random(fm):
    assert parse_feature_model(serialize_feature_model(fm)) == fm


def test_configuration_helpers():
    c = Configuration.from_ids(5, [0, 2, 4])
    assert c.active() == (0, 2, 4) and c.count() == 3
    assert c.set(2, False).active() == (0, 4)
    assert Configuration.from_bools(c.to_bools()) == c
    with pytest.raises(ValueError):
        Configuration.from_ids(3, [3])
