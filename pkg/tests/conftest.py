from __future__ import annotations

import itertools

import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from cpco.fad import build_fad
from cpco.fm import Configuration, FeatureModel, bundled_model, is_valid
from cpco.sat import UnsatisfiableModel, classify_features
from cpco.synth import random_feature_model

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow, HealthCheck.filter_too_much])
settings.load_profile("default")

SMALL_FIXTURES = ["two_groups", "two_groups_tree", "mobilemedia_small", "wget",
                  "cyclic_pair", "cyclic_vehicle", "cyclic_storage"]
CYCLIC_FIXTURES = ["two_groups", "cyclic_pair", "cyclic_vehicle", "cyclic_storage"]


def brute_force_valid(fm: FeatureModel) -> list[Configuration]:
    """Every assignment checked one by one; only usable for small models."""
    out = []
    for bits in itertools.product((False, True), repeat=fm.size):
        c = Configuration.from_bools(bits)
        if is_valid(fm, c):
            out.append(c)
    return out


def satisfiable_random_model(seed: int, n: int, ctcs: int) -> FeatureModel | None:
    fm = random_feature_model(seed, n=n, ctc_count=ctcs)
    try:
        classify_features(fm)
    except UnsatisfiableModel:
        return None
    return fm


@st.composite
def random_models(draw, min_n: int = 2, max_n: int = 10, max_ctcs: int = 3):
    seed = draw(st.integers(0, 10**6))
    n = draw(st.integers(min_n, max_n))
    ctcs = draw(st.integers(0, max_ctcs))
    fm = satisfiable_random_model(seed, n, ctcs)
    if fm is None:
        from hypothesis import assume
        assume(False)
    return fm


@pytest.fixture(scope="session")
def mobilemedia():
    return bundled_model("mobilemedia")


@pytest.fixture(scope="session")
def mm_small():
    return bundled_model("mobilemedia_small")


@pytest.fixture(scope="session")
def pipeline():
    """Cached (fm, classification, diagram) per bundled model name."""
    cache = {}

    def get(name: str):
        if name not in cache:
            fm = bundled_model(name)
            cls = classify_features(fm)
            cache[name] = (fm, cls, build_fad(fm, cls))
        return cache[name]

    return get
