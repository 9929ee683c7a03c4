"""IBEA over product configurations with operator-based or repair-based variation."""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace
from typing import Literal

import numpy as np

from .fm import Configuration, FeatureModel, is_valid
from .generate import CpcoSuite
from .rules import FlatRule, apply_flat_rule
from .sat import Cnf, DpllSolver, FeatureClassification

Mode = Literal["cpco", "repair-baseline"]
MODES: tuple[str, ...] = ("cpco", "repair-baseline")

USABILITY_RANGE = (0.0, 10.0)
BATTERY_RANGE = (0.0, 10.0)
FOOTPRINT_RANGE = (0.0, 100.0)
OBJECTIVE_NAMES = ("neg_usability", "battery", "footprint", "inactive")


@dataclass(frozen=True)
class AttributeTable:
    """Per-feature quality attributes drawn uniformly from fixed ranges."""

    usability: np.ndarray
    battery: np.ndarray
    footprint: np.ndarray
    seed: int | None = None

    def __post_init__(self):
        n = len(self.usability)
        if len(self.battery) != n or len(self.footprint) != n:
            raise ValueError("attribute columns differ in length")

    def __len__(self) -> int:
        return len(self.usability)


def generate_attributes(fm: FeatureModel, seed: int) -> AttributeTable:
    rng = np.random.default_rng(seed)
    n = fm.size
    return AttributeTable(rng.uniform(*USABILITY_RANGE, n), rng.uniform(*BATTERY_RANGE, n),
                          rng.uniform(*FOOTPRINT_RANGE, n), seed)


def evaluate(c: Configuration, attrs: AttributeTable) -> tuple[float, float, float, float]:
    """Four minimized objectives; the last one counts inactive features."""
    if c.width != len(attrs):
        raise ValueError("configuration width does not match attribute table")
    mask = np.fromiter((c.bits >> i & 1 for i in range(c.width)), dtype=bool, count=c.width)
    return (-float(attrs.usability[mask].sum()), float(attrs.battery[mask].sum()),
            float(attrs.footprint[mask].sum()), float(c.width - int(mask.sum())))


@dataclass(frozen=True)
class Solution:
    """A configuration, the operator variants applied to reach it, and its objectives.

    ``ancestor`` indexes the initial-population member the history starts from.
    """

    activation: Configuration
    history: tuple[str, ...] = ()
    objectives: tuple[float, ...] = ()
    ancestor: int = -1


@dataclass(frozen=True)
class SearchParams:
    population: int = 100
    evaluations: int = 5000
    kappa: float = 0.05
    crossover_rate: float = 0.8
    seed: int = 0
    mode: Mode = "cpco"

    def __post_init__(self):
        if self.population < 2:
            raise ValueError("population must be at least 2")
        if self.evaluations < self.population:
            raise ValueError("evaluations must be at least the population size")
        if self.mode not in MODES:
            raise ValueError(f"unknown mode {self.mode!r}")


# ---------------------------------------------------------------------------
# variation


def initial_population(fm: FeatureModel, cnf: Cnf, size: int, seed: int) -> list[Solution]:
    """Valid configurations, each from one of three solver strategies.

    The strategies are a seeded random polarity, a preference for inactive
    features and a preference for active ones; the last two still vary
    because the polarity seed decides unlisted variables.
    """
    rng = np.random.default_rng(seed)
    solver = DpllSolver(cnf)
    out = []
    for i in range(size):
        strategy = int(rng.integers(3))
        polarity = int(rng.integers(2**62))
        phases = None
        if strategy:
            prefer = strategy == 2
            # leave a random half of the variables to the polarity stream
            chosen = rng.random(cnf.var_count) < 0.5
            phases = {v + 1: prefer for v in range(cnf.var_count) if chosen[v]}
        model = solver.solve((), polarity, phases)
        if model is None:
            raise ValueError("feature model has no valid configuration")
        out.append(Solution(Configuration.from_bools(model[: fm.size]), ancestor=i))
    return out


def mutate(s: Solution, suite: CpcoSuite, cls: FeatureClassification,
           rng: np.random.Generator) -> Solution:
    """Apply one operator variant for a uniformly drawn real-optional feature.

    A draw whose rule is missing from the suite is repeated, at most once per
    real-optional feature; after that ``s`` comes back unchanged.
    """
    features = sorted(cls.real_optional)
    if not features or not suite.variants:
        return s
    for _ in range(len(features)):
        f = features[int(rng.integers(len(features)))]
        variants = suite.variants_for(f, f not in s.activation)
        if not variants:
            continue
        v = variants[int(rng.integers(len(variants)))]
        c = apply_flat_rule(v, s.activation)
        if c is not None:
            return replace(s, activation=c, history=s.history + (v.id,), objectives=())
    return s


def replay(s: Solution, other: Solution, flat: dict[str, FlatRule]) -> Solution:
    """Apply ``other``'s history to ``s`` in order, skipping known or inapplicable variants."""
    c, hist = s.activation, list(s.history)
    seen = set(hist)
    for rid in other.history:
        if rid in seen:
            continue
        c2 = apply_flat_rule(flat[rid], c)
        if c2 is None:
            continue
        c = c2
        hist.append(rid)
        seen.add(rid)
    return replace(s, activation=c, history=tuple(hist), objectives=())


def crossover(a: Solution, b: Solution, suite: CpcoSuite,
              rng: np.random.Generator | None = None,
              flat: dict[str, FlatRule] | None = None) -> tuple[Solution, Solution]:
    """History splice: each child replays the other parent's variants onto a copy of its own."""
    flat = flat if flat is not None else suite.flat_rules()
    return replay(a, b, flat), replay(b, a, flat)


def bit_crossover(a: Solution, b: Solution, rng: np.random.Generator) -> tuple[Solution, Solution]:
    """Single-point crossover on the activation bits (no validity guarantee)."""
    width = a.activation.width
    if width < 2:
        return a, b
    cut = int(rng.integers(1, width))
    low = (1 << cut) - 1
    x, y = a.activation.bits, b.activation.bits
    c1 = Configuration((x & low) | (y & ~low), width)
    c2 = Configuration((y & low) | (x & ~low), width)
    return replace(a, activation=c1, objectives=()), replace(b, activation=c2, objectives=())


def repair_mutation(s: Solution, fm: FeatureModel, solver: DpllSolver,
                    rng: np.random.Generator) -> Solution:
    """Flip one bit; if that breaks validity, let the solver repair around the flip.

    The repair fixes the flipped bit by assumption and keeps every other bit
    as a soft preference. Without a model under the assumption the flip is
    undone.
    """
    f = int(rng.integers(fm.size))
    flipped = s.activation.set(f, f not in s.activation)
    if is_valid(fm, flipped):
        return replace(s, activation=flipped, objectives=())
    want = f in flipped
    phases = {i + 1: i in flipped for i in range(fm.size)}
    model = solver.solve([(f + 1) if want else -(f + 1)], 0, phases)
    if model is None:
        return s
    return replace(s, activation=Configuration.from_bools(model[: fm.size]), objectives=())


# ---------------------------------------------------------------------------
# IBEA


def eps_indicator_matrix(objs: np.ndarray) -> np.ndarray:
    """``I[y, x]``: additive epsilon by which ``y`` must shift to weakly dominate ``x``."""
    lo, hi = objs.min(axis=0), objs.max(axis=0)
    span = np.where(hi > lo, hi - lo, 1.0)
    z = (objs - lo) / span
    return (z[:, None, :] - z[None, :, :]).max(axis=2)


def ibea_fitness(ind: np.ndarray, kappa: float) -> tuple[np.ndarray, float]:
    c = float(np.abs(ind).max()) or 1.0
    contrib = -np.exp(-ind / (c * kappa))
    np.fill_diagonal(contrib, 0.0)
    return contrib.sum(axis=0), c


def environmental_selection(objs: np.ndarray, keep: int, kappa: float) -> list[int]:
    """Indices that survive after repeatedly dropping the lowest-fitness member."""
    ind = eps_indicator_matrix(objs)
    fit, c = ibea_fitness(ind, kappa)
    alive = list(range(len(objs)))
    while len(alive) > keep:
        worst = min(alive, key=lambda i: (fit[i], i))
        alive.remove(worst)
        for i in alive:
            fit[i] += np.exp(-ind[worst, i] / (c * kappa))
    return alive


def tournament(fit: np.ndarray, rng: np.random.Generator) -> int:
    i, j = rng.integers(len(fit), size=2)
    return int(i if fit[i] >= fit[j] else j)


@dataclass
class Checkpoint:
    nfe: int
    front: list[tuple[float, ...]]
    seconds: float
    valid_ratio: float


@dataclass
class RunResult:
    population: list[Solution]
    checkpoints: list[Checkpoint] = field(default_factory=list)
    initial: list[Solution] = field(default_factory=list)


def ibea_run(fm: FeatureModel, cnf: Cnf, cls: FeatureClassification, attrs: AttributeTable,
             suite: CpcoSuite | None, params: SearchParams) -> RunResult:
    """One seeded IBEA run, checkpointing once per population worth of evaluations.

    A checkpoint holds the objective vectors (all four) of the valid members,
    the elapsed time and the share of members that are valid configurations.
    """
    if params.mode == "cpco" and suite is None:
        raise ValueError("cpco mode needs an operator suite")
    rng = np.random.default_rng(params.seed)
    start = time.perf_counter()
    solver = DpllSolver(cnf)
    flat = suite.flat_rules() if suite is not None else {}
    mu = params.population

    def scored(s: Solution) -> Solution:
        return replace(s, objectives=evaluate(s.activation, attrs))

    initial = [scored(s) for s in initial_population(fm, cnf, mu, params.seed)]
    pop = list(initial)
    nfe = mu
    result = RunResult(pop, initial=initial)

    def checkpoint() -> None:
        # invalid members are not products and add nothing to the front
        valid = [s.objectives for s in pop if is_valid(fm, s.activation)]
        result.checkpoints.append(Checkpoint(nfe, valid, time.perf_counter() - start,
                                             len(valid) / len(pop)))

    checkpoint()
    while nfe < params.evaluations:
        objs = np.array([s.objectives for s in pop])
        fit, _ = ibea_fitness(eps_indicator_matrix(objs), params.kappa)
        n_off = min(mu, params.evaluations - nfe)
        offspring: list[Solution] = []
        while len(offspring) < n_off:
            a, b = pop[tournament(fit, rng)], pop[tournament(fit, rng)]
            if rng.random() < params.crossover_rate:
                if params.mode == "cpco":
                    a, b = crossover(a, b, suite, rng, flat)
                else:
                    a, b = bit_crossover(a, b, rng)
            for child in (a, b):
                if len(offspring) == n_off:
                    break
                if params.mode == "cpco":
                    child = mutate(child, suite, cls, rng)
                else:
                    child = repair_mutation(child, fm, solver, rng)
                offspring.append(scored(child))
        nfe += len(offspring)
        union = pop + offspring
        keep = environmental_selection(np.array([s.objectives for s in union]), mu, params.kappa)
        pop = [union[i] for i in keep]
        result.population = pop
        checkpoint()
    return result
