import itertools

import pytest
from hypothesis import given
from hypothesis import strategies as st

from cpco.fm import Configuration, bundled_model, enumerate_valid_configurations, parse_feature_model
from cpco.sat import (
    Cnf, DpllSolver, UnsatisfiableModel, classify_features, count_models, dimacs_for_model,
    iter_models, parse_dimacs, solve, splitmix64, to_cnf,
)

from conftest import SMALL_FIXTURES, brute_force_valid, random_models


def brute_models(cnf: Cnf) -> list[tuple[bool, ...]]:
    return [a for a in itertools.product((False, True), repeat=cnf.var_count) if cnf.satisfied_by(a)]


cnfs = st.integers(1, 7).flatmap(lambda n: st.builds(
    lambda cl: Cnf.of(n, cl),
    st.lists(st.lists(st.integers(1, n).flatmap(lambda v: st.sampled_from([v, -v])),
                      min_size=1, max_size=3), max_size=14)))


def test_root_only_translation():
    assert to_cnf(parse_feature_model("Root\n")) == Cnf.of(1, [[1]])


def test_mandatory_child_translation():
    cnf = to_cnf(parse_feature_model("Root\n  A [mandatory]\n"))
    assert set(cnf.clauses) == {(1,), (-2, 1), (-1, 2)}


def test_unit_clause_solving():
    assert solve(Cnf.of(1, [[1]])) == [True]
    assert solve(Cnf.of(1, [[1]]), assumptions=[-1]) is None


def test_literal_range_checked():
    with pytest.raises(ValueError):
        Cnf.of(2, [[3]])


@pytest.mark.parametrize("seed", range(5))
def test_sms_transfer_forces_copy_media(mobilemedia, seed):
    sms, copy = mobilemedia.id("SMSTransfer"), mobilemedia.id("CopyMedia")
    model = solve(to_cnf(mobilemedia), assumptions=[sms + 1], polarity_seed=seed)
    assert model[sms] and model[copy]


def test_mobilemedia_model_count(mobilemedia):
    assert count_models(to_cnf(mobilemedia)) == 2_128_896


@given(cnfs)
def test_solver_agrees_with_brute_force(cnf):
    models = brute_models(cnf)
    got = solve(cnf)
    if models:
        assert got is not None and cnf.satisfied_by(got)
    else:
        assert got is None


@given(cnfs, st.integers(0, 2**32))
def test_enumeration_is_complete(cnf, seed):
    got = sorted(tuple(m) for m in iter_models(cnf, polarity_seed=seed))
    assert got == sorted(brute_models(cnf))


@given(cnfs)
def test_model_counter_agrees_with_brute_force(cnf):
    assert count_models(cnf) == len(brute_models(cnf))


@given(cnfs, st.lists(st.integers(1, 7).flatmap(lambda v: st.sampled_from([v, -v])), max_size=3))
def test_assumptions_are_respected(cnf, assumptions):
    assumptions = [a for a in assumptions if abs(a) <= cnf.var_count]
    got = solve(cnf, assumptions)
    expected = [m for m in brute_models(cnf) if all(m[abs(a) - 1] == (a > 0) for a in assumptions)]
    if expected:
        assert got is not None and cnf.satisfied_by(got)
        assert all(got[abs(a) - 1] == (a > 0) for a in assumptions)
    else:
        assert got is None


def test_fixed_seed_is_deterministic(mobilemedia):
    cnf = to_cnf(mobilemedia)
    assert solve(cnf, polarity_seed=7) == solve(cnf, polarity_seed=7)
    distinct = {tuple(solve(cnf, polarity_seed=s)) for s in range(20)}
    assert len(distinct) > 1


def test_phases_steer_the_model(mobilemedia):
    cnf = to_cnf(mobilemedia)
    low = solve(cnf, phases={v: False for v in range(1, cnf.var_count + 1)})
    high = solve(cnf, phases={v: True for v in range(1, cnf.var_count + 1)})
    assert sum(low) < sum(high)


def test_incremental_clauses():
    solver = DpllSolver(Cnf.of(2, [[1, 2]]))
    solver.add_clause([-1])
    assert solver.solve() == [False, True]
    solver.add_clause([-2])
    assert solver.solve() is None


@pytest.mark.parametrize("name", SMALL_FIXTURES)
def test_cnf_models_are_the_valid_configurations(name):
    fm = bundled_model(name)
    cnf = to_cnf(fm)
    models = {Configuration.from_bools(m) for m in iter_models(cnf)}
    assert models == set(enumerate_valid_configurations(fm, 10**6))


@given(random_models(max_n=9))
def test_cnf_equivalence_random(fm):
    cnf = to_cnf(fm)
    assert {Configuration.from_bools(m) for m in brute_models(cnf)} == set(brute_force_valid(fm))


def brute_classification(fm):
    configs = brute_force_valid(fm)
    core = {f for f in range(fm.size) if all(f in c for c in configs)}
    dead = {f for f in range(fm.size) if not any(f in c for c in configs)}
    return core, dead


@pytest.mark.parametrize("name, core", [("mobilemedia", 10), ("wget", 2), ("mobilemedia_small", 4), ("two_groups", 1)])
def test_core_counts(name, core):
    cls = classify_features(bundled_model(name))
    assert len(cls.core) == core
    assert not cls.dead


def test_root_only_classification():
    cls = classify_features(parse_feature_model("Root\n"))
    assert cls.core == {0} and not cls.dead and not cls.real_optional


@given(random_models(max_n=9, max_ctcs=4))
def test_classification_matches_oracle(fm):
    cls = classify_features(fm)
    core, dead = brute_classification(fm)
    assert cls.core == core and cls.dead == dead
    assert cls.core | cls.dead | cls.real_optional == set(range(fm.size))
    assert len(cls.real_optional) == fm.size - len(cls.core) - len(cls.dead)


def test_unsatisfiable_model_rejected():
    fm = parse_feature_model("R\n  A [mandatory]\n  B [mandatory]\nconstraints:\n  A excludes B\n")
    with pytest.raises(UnsatisfiableModel):
        classify_features(fm)


def test_dimacs_round_trip(mobilemedia):
    text = dimacs_for_model(mobilemedia)
    assert text.splitlines()[0] == "c feature 0 MobileMedia"
    assert f"p cnf 43 {len(to_cnf(mobilemedia).clauses)}" in text
    assert parse_dimacs(text) == to_cnf(mobilemedia)


def test_splitmix_is_a_fixed_function():
    assert splitmix64(0) == splitmix64(0)
    assert len({splitmix64(i) & 1 for i in range(64)}) == 2


@given(cnfs, st.integers(0, 2**32))
def test_projected_enumeration_is_distinct_on_projection(cnf, seed):
    project = list(range(1, cnf.var_count // 2 + 2))
    got = [tuple(m[v - 1] for v in project) for m in iter_models(cnf, seed, project=project)]
    assert len(got) == len(set(got))
    assert set(got) == {tuple(m[v - 1] for v in project) for m in brute_models(cnf)}
