"""Operator generation: activation sub-diagram traversal to VB rules, plus suites."""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Mapping

from .fad import FeatureActivationDiagram, FeatureDecision, decision_key
from .fm import FeatureModel
from .rules import (
    ROOT, Formula, Implies, And, Not, RuleConstraint, RuleNode, Var, VBRule,
    FlatRule, alt_name, conj, disj, flatten, implies, or_name, remove_dead_rule_features, rule_name,
)
from .sat import FeatureClassification


@dataclass(frozen=True)
class GenerationOptions:
    """Which optional simplification steps run after the basic encoding."""

    or_overlap: bool = True
    cycle_blocking: bool = True
    dead_removal: bool = True


BASIC = GenerationOptions(or_overlap=False, cycle_blocking=False, dead_removal=False)
FULL = GenerationOptions()


@dataclass
class Traversal:
    """What one depth-first sweep of an activation sub-diagram collects.

    Presence conditions and follow-or sets are first recorded as proxies
    (references to other decisions) and resolved afterwards.
    """

    root: FeatureDecision
    decisions: list[FeatureDecision] = field(default_factory=list)
    or_order: list[int] = field(default_factory=list)
    pc_sources: dict[FeatureDecision, list[str]] = field(default_factory=dict)
    pc_proxies: dict[FeatureDecision, list[FeatureDecision]] = field(default_factory=dict)
    follow_ors: dict[FeatureDecision, list[int]] = field(default_factory=dict)
    follow_proxies: dict[FeatureDecision, list[FeatureDecision]] = field(default_factory=dict)
    alternatives: dict[int, tuple[tuple[str, FeatureDecision], ...]] = field(default_factory=dict)
    # resolved
    pc: dict[FeatureDecision, tuple[str, ...]] = field(default_factory=dict)
    follow: dict[FeatureDecision, tuple[int, ...]] = field(default_factory=dict)

    def source_target(self, s: str) -> FeatureDecision:
        if s == ROOT:
            return self.root
        k, j = _parse_alt(s)
        return self.alternatives[k][j - 1][1]

    def sources(self) -> list[str]:
        out = [ROOT]
        for k in self.or_order:
            out.extend(a for a, _ in self.alternatives[k])
        return out

    def closure(self, s: str) -> set[FeatureDecision]:
        return {d for d, srcs in self.pc.items() if s in srcs}

    def source_follow(self, s: str) -> tuple[int, ...]:
        return self.follow[self.source_target(s)]


def _parse_alt(name: str) -> tuple[int, int]:
    _, k, j = name.split("_")
    return int(k), int(j)


def traverse(fad: FeatureActivationDiagram, d: FeatureDecision) -> Traversal:
    """Single depth-first sweep from ``d`` with proxy resolution afterwards."""
    if d not in fad:
        raise KeyError(f"{d} not in diagram")
    t = Traversal(d)
    seen_dec: set[FeatureDecision] = set()
    seen_or: set[int] = set()

    def add_pc(x: FeatureDecision, src: str | None, proxy: FeatureDecision | None) -> None:
        if src is not None:
            t.pc_sources.setdefault(x, []).append(src)
        else:
            t.pc_proxies.setdefault(x, []).append(proxy)

    # explicit stack of (node kind, payload); decisions pushed with their incoming pc
    add_pc(d, ROOT, None)
    stack: list[tuple[str, object]] = [("d", d)]
    while stack:
        kind, item = stack.pop()
        if kind == "d":
            x = item
            if x in seen_dec:
                continue
            seen_dec.add(x)
            t.decisions.append(x)
            ands, ors = fad.successors(x)
            t.follow_ors[x] = list(ors)
            t.follow_proxies[x] = list(ands)
            children: list[tuple[str, object]] = []
            for y in ands:
                add_pc(y, None, x)
                children.append(("d", y))
            children.extend(("o", k) for k in ors)
            stack.extend(reversed(children))
        else:
            k = item
            if k in seen_or:
                continue
            seen_or.add(k)
            t.or_order.append(k)
            alts = []
            for j, y in enumerate(fad.or_nodes[k].alternatives, start=1):
                name = alt_name(k, j)
                alts.append((name, y))
                add_pc(y, name, None)
            t.alternatives[k] = tuple(alts)
            stack.extend(("d", y) for _, y in reversed(alts))

    # proxy resolution: a proxy y in x's list means x inherits y's value;
    # self-references are dropped by taking plain reachability
    for x in t.decisions:
        srcs: list[str] = []
        ors: list[int] = []
        visited = {x}
        work = [x]
        while work:
            y = work.pop()
            for s in t.pc_sources.get(y, ()):
                if s not in srcs:
                    srcs.append(s)
            for z in t.pc_proxies.get(y, ()):
                if z not in visited:
                    visited.add(z)
                    work.append(z)
        visited = {x}
        work = [x]
        while work:
            y = work.pop()
            for k in t.follow_ors[y]:
                if k not in ors:
                    ors.append(k)
            for z in t.follow_proxies[y]:
                if z not in visited:
                    visited.add(z)
                    work.append(z)
        order = {s: i for i, s in enumerate(t.sources())}
        t.pc[x] = tuple(sorted(srcs, key=order.__getitem__))
        pos = {k: i for i, k in enumerate(t.or_order)}
        t.follow[x] = tuple(sorted(ors, key=pos.__getitem__))
    return t


# ---------------------------------------------------------------------------
# constraint families


def or_implication_constraints(t: Traversal) -> list[RuleConstraint]:
    """Each source forces a decision on every or-node that directly follows it."""
    out = []
    for s in t.sources():
        for m in t.source_follow(s):
            out.append(RuleConstraint("or-implication", Implies(Var(s), Var(or_name(m)))))
    return out


def or_support_constraints(t: Traversal) -> list[RuleConstraint]:
    """An or-group may only be active if some source leading to it is active."""
    pre: dict[int, list[str]] = {k: [] for k in t.or_order}
    for s in t.sources():
        for m in t.source_follow(s):
            pre[m].append(s)
    out = []
    for m in t.or_order:
        out.append(RuleConstraint("or-support", implies(Var(or_name(m)), disj(Var(s) for s in pre[m]))))
    return out


def mutex_constraints(t: Traversal) -> list[RuleConstraint]:
    """No variant may contain both polarities of one feature."""
    out = []
    for x in sorted(t.pc, key=decision_key):
        if not x.activate:
            continue
        y = x.negated()
        if y in t.pc:
            out.append(RuleConstraint("mutex", Not(conj((_pc_formula(t.pc[x]), _pc_formula(t.pc[y]))))))
    return out


def or_overlap_constraints(t: Traversal) -> list[RuleConstraint]:
    """Pick one canonical choice where an earlier alternative already covers several.

    For an alternative ``a`` of an earlier-discovered or-node and a later or-node
    ``m`` of which two or more alternatives lead to decisions that ``a`` already
    brings in, all of those choices yield the same decision set. With ``a`` and
    ``OR_m`` active only the first covered alternative (or an uncovered one) may
    be picked, so each such variant is produced once.
    """
    out = []
    pos = {k: i for i, k in enumerate(t.or_order)}
    closures = {s: t.closure(s) for s in t.sources()}
    for k in t.or_order:
        for a, _ in t.alternatives[k]:
            cov = closures[a]
            for m in t.or_order:
                if pos[m] <= pos[k]:
                    continue
                alts = t.alternatives[m]
                hits = [b for b, y in alts if y in cov]
                if len(hits) < 2:
                    continue
                keep = [hits[0]] + [b for b, y in alts if y not in cov]
                out.append(RuleConstraint("or-overlap", Implies(
                    And((Var(a), Var(or_name(m)))), disj(Var(b) for b in keep))))
    return out


@dataclass(frozen=True)
class OrGraph:
    """Or-implication graph: root -> OR_k, OR_k -> O_k_j, O_k_j -> OR_m."""

    edges: Mapping[str, tuple[str, ...]]

    def pre_alternatives(self) -> dict[str, set[str]]:
        pre: dict[str, set[str]] = {}
        for src, dsts in self.edges.items():
            for dst in dsts:
                if dst.startswith("OR_"):
                    pre.setdefault(dst, set()).add(src)
        return pre


def or_graph(t: Traversal) -> OrGraph:
    edges: dict[str, tuple[str, ...]] = {ROOT: tuple(or_name(m) for m in t.source_follow(ROOT))}
    for k in t.or_order:
        edges[or_name(k)] = tuple(a for a, _ in t.alternatives[k])
        for a, _ in t.alternatives[k]:
            edges[a] = tuple(or_name(m) for m in t.source_follow(a))
    return OrGraph(edges)


def _is_or_feature(name: str) -> bool:
    return name.startswith("OR")


def block_self_activating_cycles(graph: OrGraph, root: str = ROOT) -> dict[str, set[str]]:
    """Cycle breaking on the or-implication graph.

    Returns, for each or-feature where a cycle is broken, the set of entry
    alternatives at least one of which must be active for it to be active.
    Runs the add/delete bookkeeping depth-first search without recursion.
    """
    pre = graph.pre_alternatives()
    visited: set[str] = set()
    stack: list[str] = []
    entries: dict[str, list[tuple[frozenset[str], frozenset[str]]]] = {}

    def record(f: str, add, delete) -> None:
        entries.setdefault(f, []).append((frozenset(add), frozenset(delete)))

    # frames: [feature, coming_from, edge iterator, accumulated result]
    def enter(feature: str, coming_from: str | None):
        if feature in visited:
            if feature == root or not _is_or_feature(feature):
                return set()
            if feature in stack:
                record(feature, pre.get(feature, ()), [coming_from] if coming_from else [])
                return {feature}
            return set()
        visited.add(feature)
        if not _is_or_feature(feature) and feature != root:
            for orf in stack:
                if orf in entries:
                    record(orf, (), [feature])
        elif _is_or_feature(feature):
            stack.append(feature)
        return [feature, coming_from, iter(graph.edges.get(feature, ())), set()]

    def leave(frame) -> set[str]:
        feature, coming_from, _, result = frame
        if _is_or_feature(feature):
            stack.remove(feature)
            delete = [coming_from] if coming_from else []
            if feature in entries:
                result.discard(feature)
                own = list(entries[feature])
                for f in result:
                    entries.setdefault(f, []).extend(own)
                    record(f, (), delete)
            else:
                for f in result:
                    record(f, pre.get(feature, ()), delete)
        return result

    frames = [enter(root, None)]
    while frames:
        frame = frames[-1]
        child = next(frame[2], None)
        if child is None:
            frames.pop()
            res = leave(frame)
            if frames:
                frames[-1][3].update(res)
            continue
        sub = enter(child, frame[0])
        if isinstance(sub, set):
            frame[3].update(sub)
        else:
            frames.append(sub)

    out = {}
    for f, tuples in entries.items():
        add = set().union(*(a for a, _ in tuples))
        delete = set().union(*(d for _, d in tuples))
        out[f] = add - delete
    return out


def entries_avoiding(graph: OrGraph, f: str, root: str = ROOT) -> set[str]:
    """Pre-alternatives of ``f`` reachable from ``root`` without passing ``f``."""
    seen = {root}
    stack = [root]
    while stack:
        x = stack.pop()
        for y in graph.edges.get(x, ()):
            if y != f and y not in seen:
                seen.add(y)
                stack.append(y)
    return graph.pre_alternatives().get(f, set()) & seen


def cycle_entry_constraints(t: Traversal) -> list[RuleConstraint]:
    """Guard every or-feature on a broken cycle by its entry alternatives.

    The depth-first entry sets only see entries along the search tree, so each
    is widened by the entries that some root path can use; no rooted variant
    is lost that way.
    """
    graph = or_graph(t)
    eff = block_self_activating_cycles(graph)
    pos = {or_name(k): i for i, k in enumerate(t.or_order)}
    order = {s: i for i, s in enumerate(t.sources())}
    out = []
    for f in sorted(eff, key=pos.__getitem__):
        entry = sorted(eff[f] | entries_avoiding(graph, f), key=order.__getitem__)
        out.append(RuleConstraint("cycle-entry", implies(Var(f), disj(Var(s) for s in entry))))
    return out


# ---------------------------------------------------------------------------
# rules and suites


def _pc_formula(sources) -> Formula:
    return disj(Var(s) for s in sources)


def generate_vb_rule(fad: FeatureActivationDiagram, d: FeatureDecision,
                     options: GenerationOptions = FULL) -> VBRule:
    t = traverse(fad, d)
    nodes = []
    for x in sorted(t.decisions, key=lambda y: (y != d, decision_key(y))):
        pc = Var(ROOT) if x == d else _pc_formula(t.pc[x])
        nodes.append(RuleNode(x, (not d.activate) if x == d else None, x.activate, pc))
    groups = tuple((or_name(k), tuple(a for a, _ in t.alternatives[k])) for k in t.or_order)
    constraints = or_implication_constraints(t) + or_support_constraints(t) + mutex_constraints(t)
    if options.or_overlap:
        constraints += or_overlap_constraints(t)
    if options.cycle_blocking:
        constraints += cycle_entry_constraints(t)
    rule = VBRule(rule_name(fad.fm, d), d, tuple(nodes), groups, tuple(constraints),
                  supported_only=options.cycle_blocking)
    if options.dead_removal:
        rule = remove_dead_rule_features(rule)
    return rule


@dataclass(frozen=True)
class RuleLog:
    rule: str
    decision: FeatureDecision
    seconds: float
    variants: int
    nodes: int


@dataclass
class CpcoSuite:
    fm: FeatureModel
    rules: dict[FeatureDecision, VBRule] = field(default_factory=dict)
    variants: dict[FeatureDecision, list[FlatRule]] = field(default_factory=dict)
    log: list[RuleLog] = field(default_factory=list)
    missing: list[FeatureDecision] = field(default_factory=list)
    limit: int | float = 1
    seed: int = 0

    def __len__(self) -> int:
        return len(self.rules)

    @property
    def truncated(self) -> bool:
        return bool(self.missing)

    def flat_rules(self) -> dict[str, FlatRule]:
        return {v.id: v for vs in self.variants.values() for v in vs}

    def variants_for(self, feature: int, activate: bool) -> list[FlatRule]:
        return self.variants.get(FeatureDecision(feature, activate), [])


def suite_decisions(cls: FeatureClassification) -> list[FeatureDecision]:
    return [FeatureDecision(f, a) for f in sorted(cls.real_optional) for a in (True, False)]


def generate_suite(fm: FeatureModel, cls: FeatureClassification, fad: FeatureActivationDiagram,
                   limit: int | float = 1, time_budget: float = 600.0, seed: int = 0,
                   options: GenerationOptions = FULL) -> CpcoSuite:
    """One VB rule and up to ``limit`` variants per real-optional decision.

    No new rule is started once ``time_budget`` seconds have elapsed; the
    decisions left out are listed in ``missing``.
    """
    suite = CpcoSuite(fm, limit=limit, seed=seed)
    start = time.perf_counter()
    for i, d in enumerate(suite_decisions(cls)):
        if time.perf_counter() - start >= time_budget:
            suite.missing.append(d)
            continue
        t0 = time.perf_counter()
        rule = generate_vb_rule(fad, d, options)
        variants = flatten(rule, limit=limit, seed=seed * 1_000_003 + i)
        suite.rules[d] = rule
        suite.variants[d] = variants
        suite.log.append(RuleLog(rule.name, d, time.perf_counter() - t0, len(variants), len(rule.nodes)))
    return suite
