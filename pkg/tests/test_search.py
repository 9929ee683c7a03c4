import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cpco.fad import build_fad
from cpco.fm import Configuration, bundled_model, check_validity, is_valid, parse_feature_model
from cpco.generate import CpcoSuite, generate_suite
from cpco.rules import apply_flat_rule
from cpco.sat import DpllSolver, classify_features, to_cnf
from cpco.search import (
    AttributeTable, SearchParams, Solution, bit_crossover, crossover, environmental_selection,
    eps_indicator_matrix, evaluate, generate_attributes, ibea_run, initial_population, mutate,
    repair_mutation,
)

C1 = ["MobileMedia", "MediaSelection", "Music", "MediaManagement", "ScreenSize", "Screen3"]


class ScriptedRng:
    """Stands in for a numpy Generator; ``integers`` returns queued values in order."""

    def __init__(self, *values):
        self.values = list(values)

    def integers(self, *args, **kwargs):
        return self.values.pop(0)


@pytest.fixture(scope="module")
def small_setup():
    fm = bundled_model("mobilemedia_small")
    cls = classify_features(fm)
    suite = generate_suite(fm, cls, build_fad(fm, cls), limit=float("inf"))
    return fm, cls, suite


@pytest.fixture(scope="module")
def mm_setup():
    fm = bundled_model("mobilemedia")
    cls = classify_features(fm)
    suite = generate_suite(fm, cls, build_fad(fm, cls), limit=1)
    return fm, cls, to_cnf(fm), suite


def test_attributes_deterministic(mobilemedia):
    a, b = generate_attributes(mobilemedia, 3), generate_attributes(mobilemedia, 3)
    assert np.array_equal(a.usability, b.usability) and np.array_equal(a.footprint, b.footprint)
    c = generate_attributes(mobilemedia, 4)
    assert not np.array_equal(a.usability, c.usability)


def test_attribute_ranges_and_mean():
    fm = parse_feature_model("Root\n" + "".join(f"  F{i} [optional]\n" for i in range(99_999)))
    attrs = generate_attributes(fm, 0)
    assert abs(attrs.usability.mean() - 5.0) <= 0.1
    assert attrs.usability.min() >= 0 and attrs.usability.max() <= 10
    assert attrs.battery.min() >= 0 and attrs.battery.max() <= 10
    assert attrs.footprint.min() >= 0 and attrs.footprint.max() <= 100


def test_attribute_table_checks_lengths():
    with pytest.raises(ValueError):
        AttributeTable(np.zeros(2), np.zeros(3), np.zeros(2))


def test_evaluate_root_only_zero_attributes():
    fm = parse_feature_model("Root\n  A [optional]\n  B [optional]\n")
    zeros = AttributeTable(np.zeros(3), np.zeros(3), np.zeros(3))
    assert evaluate(fm.configuration(["Root"]), zeros) == (0.0, 0.0, 0.0, 2.0)


@given(st.integers(0, 2**5 - 1), st.integers(0, 4), st.integers(0, 1000))
def test_evaluate_additivity(bits, f, seed):
    fm = parse_feature_model("Root\n" + "".join(f"  F{i} [optional]\n" for i in range(4)))
    attrs = generate_attributes(fm, seed)
    c = Configuration(bits, 5)
    off, on = evaluate(c.set(f, False), attrs), evaluate(c.set(f, True), attrs)
    assert on[0] == pytest.approx(off[0] - attrs.usability[f])
    assert on[1] == pytest.approx(off[1] + attrs.battery[f])
    assert on[2] == pytest.approx(off[2] + attrs.footprint[f])
    assert evaluate(c, attrs)[3] == 5 - c.count()


def test_evaluate_width_mismatch(mobilemedia):
    with pytest.raises(ValueError):
        evaluate(Configuration(1, 3), generate_attributes(mobilemedia, 0))


@pytest.mark.parametrize("kwargs", [{"population": 1}, {"population": 10, "evaluations": 5},
                                    {"mode": "random"}])
def test_search_params_validation(kwargs):
    with pytest.raises(ValueError):
        SearchParams(**kwargs)


def test_initial_population(mm_setup):
    fm, cls, cnf, _ = mm_setup
    pop = initial_population(fm, cnf, 100, seed=1)
    assert len(pop) == 100
    assert all(check_validity(fm, s.activation) == [] for s in pop)
    assert all(s.history == () for s in pop)
    assert [s.ancestor for s in pop] == list(range(100))
    assert len({s.activation for s in pop}) >= 2


def test_initial_population_root_only():
    fm = parse_feature_model("Root\n")
    [s] = initial_population(fm, to_cnf(fm), 1, seed=0)
    assert s.activation == Configuration(1, 1)


def test_mutate_c1_on_screen3(small_setup):
    fm, cls, suite = small_setup
    features = sorted(cls.real_optional)
    s3 = fm.id("Screen3")
    outcomes = set()
    for pick in range(2):
        s = Solution(fm.configuration(C1))
        out = mutate(s, suite, cls, ScriptedRng(features.index(s3), pick))
        assert check_validity(fm, out.activation) == []
        assert len(out.history) == 1 and out.history[0].startswith("De_Screen3@")
        outcomes.add(frozenset(fm.names[f] for f in out.activation.active()) - set(C1))
    assert outcomes == {frozenset({"Screen1"}), frozenset({"Screen2"})}


def test_mutate_with_empty_suite(small_setup):
    fm, cls, _ = small_setup
    s = Solution(fm.configuration(C1))
    assert mutate(s, CpcoSuite(fm), cls, np.random.default_rng(0)) is s


def test_mutate_redraws_past_missing_rules(small_setup):
    fm, cls, suite = small_setup
    features = sorted(cls.real_optional)
    s3 = fm.id("Screen3")
    partial = CpcoSuite(fm, variants={d: v for d, v in suite.variants.items() if d.feature == s3})
    photo = features.index(fm.id("Photo"))
    out = mutate(Solution(fm.configuration(C1)), partial, cls,
                 ScriptedRng(photo, features.index(s3), 0))
    assert out.history and out.history[0].startswith("De_Screen3@")


@settings(max_examples=30)
@given(st.integers(0, 10**6))
def test_mutation_keeps_validity(small_setup, seed):
    fm, cls, suite = small_setup
    rng = np.random.default_rng(seed)
    s = initial_population(fm, to_cnf(fm), 1, seed)[0]
    for _ in range(20):
        s = mutate(s, suite, cls, rng)
        assert is_valid(fm, s.activation)


def test_crossover_with_empty_histories(small_setup):
    fm, _, suite = small_setup
    a, b = Solution(fm.configuration(C1)), Solution(fm.configuration(C1).set(fm.id("Photo"), True))
    assert crossover(a, b, suite) == (a, b)


def test_crossover_replays_other_history(small_setup):
    fm, cls, suite = small_setup
    flat = suite.flat_rules()
    de_s3 = next(i for i in flat if i.startswith("De_Screen3@"))
    act_sms = next(i for i in flat if i.startswith("Act_SMSTransfer@"))
    base = fm.configuration(C1)
    a = Solution(apply_flat_rule(flat[de_s3], base), (de_s3,))
    b = Solution(apply_flat_rule(flat[act_sms], base), (act_sms,))
    c1, c2 = crossover(a, b, suite)
    # manual application of the other parent's variant
    assert c1.activation == apply_flat_rule(flat[act_sms], a.activation)
    assert c1.history == (de_s3, act_sms)
    assert c2.activation == apply_flat_rule(flat[de_s3], b.activation)
    assert c2.history == (act_sms, de_s3)
    assert is_valid(fm, c1.activation) and is_valid(fm, c2.activation)


def test_crossover_skips_inapplicable(small_setup):
    fm, _, suite = small_setup
    flat = suite.flat_rules()
    de_s3 = next(i for i in flat if i.startswith("De_Screen3@"))
    a = Solution(fm.configuration(C1).set(fm.id("Screen3"), False).set(fm.id("Screen1"), True))
    b = Solution(a.activation, (de_s3,))
    c1, _ = crossover(a, b, suite)
    assert c1 == a


def test_bit_crossover_mixes_parents():
    a = Solution(Configuration(0b0000, 4))
    b = Solution(Configuration(0b1111, 4))
    c1, c2 = bit_crossover(a, b, ScriptedRng(2))
    assert c1.activation.bits == 0b1100 and c2.activation.bits == 0b0011


def test_repair_keeps_valid_flip(mm_small):
    solver = DpllSolver(to_cnf(mm_small))
    s = Solution(mm_small.configuration(C1))
    photo = mm_small.id("Photo")
    out = repair_mutation(s, mm_small, solver, ScriptedRng(photo))
    assert out.activation == s.activation.set(photo, True)


def test_repair_screen3_off(mm_small):
    solver = DpllSolver(to_cnf(mm_small))
    out = repair_mutation(Solution(mm_small.configuration(C1)), mm_small, solver,
                          ScriptedRng(mm_small.id("Screen3")))
    assert check_validity(mm_small, out.activation) == []
    assert mm_small.id("Screen3") not in out.activation
    assert mm_small.id("Screen1") in out.activation or mm_small.id("Screen2") in out.activation


def test_repair_reverts_impossible_flip(mm_small):
    solver = DpllSolver(to_cnf(mm_small))
    s = Solution(mm_small.configuration(C1))
    assert repair_mutation(s, mm_small, solver, ScriptedRng(mm_small.id("ScreenSize"))) is s


def test_eps_indicator_and_selection():
    objs = np.array([[0.0, 1.0], [1.0, 0.0], [1.0, 1.0]])
    ind = eps_indicator_matrix(objs)
    assert ind[0, 2] == 0.0 and ind[2, 0] == 1.0
    assert sorted(environmental_selection(objs, 2, 0.05)) == [0, 1]


def test_ibea_is_deterministic(mm_setup):
    fm, cls, cnf, suite = mm_setup
    attrs = generate_attributes(fm, 0)
    params = SearchParams(population=20, evaluations=100, seed=4)
    r1 = ibea_run(fm, cnf, cls, attrs, suite, params)
    r2 = ibea_run(fm, cnf, cls, attrs, suite, params)
    assert [(c.nfe, c.front, c.valid_ratio) for c in r1.checkpoints] == \
        [(c.nfe, c.front, c.valid_ratio) for c in r2.checkpoints]
    assert [c.nfe for c in r1.checkpoints] == [20, 40, 60, 80, 100]


def test_budget_of_one_population(mm_setup):
    fm, cls, cnf, suite = mm_setup
    attrs = generate_attributes(fm, 0)
    r = ibea_run(fm, cnf, cls, attrs, suite, SearchParams(population=10, evaluations=10))
    assert len(r.checkpoints) == 1
    assert r.population == r.initial


def test_cpco_needs_suite(mm_setup):
    fm, cls, cnf, _ = mm_setup
    with pytest.raises(ValueError):
        ibea_run(fm, cnf, cls, generate_attributes(fm, 0), None, SearchParams(population=4, evaluations=4))


@pytest.mark.parametrize("mode", ["cpco", "repair-baseline"])
def test_ibea_run_properties(mm_setup, mode):
    fm, cls, cnf, suite = mm_setup
    attrs = generate_attributes(fm, 1)
    r = ibea_run(fm, cnf, cls, attrs, suite,
                 SearchParams(population=20, evaluations=300, seed=2, mode=mode))
    for s in r.population:
        assert s.objectives == evaluate(s.activation, attrs)
    if mode == "cpco":
        assert all(c.valid_ratio == 1.0 for c in r.checkpoints)
        assert all(is_valid(fm, s.activation) for s in r.population)
        flat = suite.flat_rules()
        for s in r.population:
            c = r.initial[s.ancestor].activation
            for rid in s.history:
                c = apply_flat_rule(flat[rid], c)
                assert c is not None
            assert c == s.activation
    else:
        assert all(0.0 <= c.valid_ratio <= 1.0 for c in r.checkpoints)
