import json

import pytest

from cpco.generate import generate_suite
from cpco.suite_io import (
    FORMAT_VERSION, dumps_suite, load_suite, loads_suite, log_csv, rule_from_dict, rule_to_dict,
    save_suite,
)


@pytest.fixture(scope="module")
def suite(pipeline):
    fm, cls, fad = pipeline("cyclic_vehicle")
    return generate_suite(fm, cls, fad, limit=3, seed=2)


def test_rule_round_trip(suite):
    for rule in suite.rules.values():
        assert rule_from_dict(rule_to_dict(rule)) == rule


def test_suite_round_trip(suite, tmp_path):
    path = tmp_path / "suite.json"
    save_suite(suite, path)
    back = load_suite(path)
    assert back.fm == suite.fm
    assert back.rules == suite.rules and back.variants == suite.variants
    assert back.limit == suite.limit and back.seed == suite.seed and back.missing == suite.missing
    assert dumps_suite(back) == dumps_suite(suite)


def test_unbounded_limit_round_trip(pipeline):
    fm, cls, fad = pipeline("two_groups")
    s = generate_suite(fm, cls, fad, limit=float("inf"))
    assert json.loads(dumps_suite(s))["limit"] is None
    assert loads_suite(dumps_suite(s)).limit == float("inf")


def test_bytes_are_deterministic(pipeline):
    fm, cls, fad = pipeline("mobilemedia")
    a = dumps_suite(generate_suite(fm, cls, fad, seed=1))
    b = dumps_suite(generate_suite(fm, cls, fad, seed=1))
    assert a == b and "seconds" not in a


def test_truncated_suite_keeps_missing(pipeline):
    fm, cls, fad = pipeline("two_groups")
    s = generate_suite(fm, cls, fad, time_budget=0)
    assert loads_suite(dumps_suite(s)).missing == s.missing


def test_format_version_checked(suite):
    data = json.loads(dumps_suite(suite))
    data["format"] = FORMAT_VERSION + 1
    with pytest.raises(ValueError, match="format"):
        loads_suite(json.dumps(data))


def test_log_csv(suite):
    lines = log_csv(suite.log).splitlines()
    assert lines[0] == "Rule,Seconds,Variants,Nodes"
    assert len(lines) == 1 + len(suite.log)
    name, seconds, variants, nodes = lines[1].split(",")
    assert name == suite.log[0].rule and float(seconds) >= 0
    assert int(variants) == suite.log[0].variants and int(nodes) == suite.log[0].nodes
