"""Feature decisions, the (de)activation principles and activation diagrams.

A feature-activation diagram links every feature decision to its direct
consequences. And-consequences are plain edges between decisions; alternative
repairs go through an or-node whose outgoing edges lead to decisions only.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple

from .fm import ChildKind, Configuration, FeatureModel, GroupKind
from .sat import FeatureClassification


class FeatureDecision(NamedTuple):
    feature: int
    activate: bool

    def label(self) -> str:
        return f"F{self.feature}{'+' if self.activate else '-'}"

    def describe(self, fm: FeatureModel) -> str:
        return f"{fm.names[self.feature]}{'+' if self.activate else '-'}"

    def negated(self) -> "FeatureDecision":
        return FeatureDecision(self.feature, not self.activate)


def decision_key(d: FeatureDecision) -> tuple[int, int]:
    """Order by feature id, activation before deactivation."""
    return (d.feature, 0 if d.activate else 1)


def sort_decisions(ds: Iterable[FeatureDecision]) -> tuple[FeatureDecision, ...]:
    return tuple(sorted(set(ds), key=decision_key))


class InvalidDecision(ValueError):
    """Decision targets a core or dead feature."""


@dataclass(frozen=True)
class Consequences:
    """Direct consequences: every ``ands`` decision plus one pick per ``ors`` group."""

    ands: tuple[FeatureDecision, ...] = ()
    ors: tuple[tuple[FeatureDecision, ...], ...] = ()

    def is_empty(self) -> bool:
        return not self.ands and not self.ors


def apply_principles(fm: FeatureModel, cls: FeatureClassification, d: FeatureDecision) -> Consequences:
    """Direct consequences of ``d`` under the activation/deactivation principles.

    Consequences on core features are dropped where they would be no-ops
    (activating a core feature) and consequences on dead features are dropped
    likewise (deactivating a dead feature, or picking it as a repair option).
    Deactivating a core feature or activating a dead one can only arise from a
    decision that is itself not real-optional, which the precondition rules out.
    """
    f = d.feature
    if f not in cls.real_optional:
        raise InvalidDecision(f"{fm.names[f]} is not real-optional")
    core, dead = cls.core, cls.dead
    ands: list[FeatureDecision] = []
    ors: list[tuple[FeatureDecision, ...]] = []

    def activate(g: int) -> None:
        if g in core:
            return
        assert g not in dead, f"activation of dead feature {fm.names[g]} implied by {d}"
        ands.append(FeatureDecision(g, True))

    def deactivate(g: int) -> None:
        if g in dead:
            return
        assert g not in core, f"deactivation of core feature {fm.names[g]} implied by {d}"
        ands.append(FeatureDecision(g, False))

    def alternatives(options: list[FeatureDecision]) -> None:
        # a single remaining option is not a choice
        if len(options) == 1:
            ands.append(options[0])
        else:
            assert options, f"no repair option for {d}"
            ors.append(tuple(options))

    p = fm.parent[f]
    if d.activate:
        for g in fm.mandatory_children(f):  # ActMand
            activate(g)
        if p is not None:  # ActPar
            activate(p)
        for g in fm.requirements[f]:  # ActReq
            activate(g)
        if fm.group_kind[f] is not GroupKind.NONE:  # ActGroup
            kids = fm.children[f]
            if not any(k in core for k in kids):
                alternatives([FeatureDecision(k, True) for k in kids if k not in dead])
        if p is not None and fm.group_kind[p] is GroupKind.XOR:  # ActXor
            for s in fm.siblings(f):
                deactivate(s)
        for g in fm.exclusions[f]:  # ActExc
            deactivate(g)
    else:
        for g in fm.children[f]:  # DeChild
            deactivate(g)
        if p is not None and fm.group_kind[p] is not GroupKind.NONE:  # DeXor / DeOr
            sibs = fm.siblings(f)
            if not any(s in core for s in sibs):
                options = [] if p in core else [FeatureDecision(p, False)]
                options += [FeatureDecision(s, True) for s in sibs if s not in dead]
                alternatives(options)
        if fm.child_kind[f] is ChildKind.MANDATORY:  # DeParent
            deactivate(p)
        for g in fm.required_by[f]:  # DeReq
            deactivate(g)

    return Consequences(sort_decisions(a for a in ands if a != d),
                        tuple(sort_decisions(o) for o in ors))


@dataclass(frozen=True)
class OrNode:
    index: int
    source: FeatureDecision
    alternatives: tuple[FeatureDecision, ...]


@dataclass
class FeatureActivationDiagram:
    """Decision nodes plus or-nodes; frozen by convention once built."""

    fm: FeatureModel
    decisions: list[FeatureDecision] = field(default_factory=list)
    and_edges: dict[FeatureDecision, tuple[FeatureDecision, ...]] = field(default_factory=dict)
    or_edges: dict[FeatureDecision, tuple[int, ...]] = field(default_factory=dict)
    or_nodes: list[OrNode] = field(default_factory=list)

    def __contains__(self, d: FeatureDecision) -> bool:
        return d in self.and_edges

    @property
    def node_count(self) -> int:
        return len(self.decisions) + len(self.or_nodes)

    @property
    def edge_count(self) -> int:
        return (sum(len(v) for v in self.and_edges.values())
                + sum(len(v) for v in self.or_edges.values())
                + sum(len(o.alternatives) for o in self.or_nodes))

    def successors(self, d: FeatureDecision) -> tuple[tuple[FeatureDecision, ...], tuple[int, ...]]:
        return self.and_edges[d], self.or_edges[d]

    def to_dot(self) -> str:
        lines = ["digraph fad {"]
        for d in sorted(self.decisions, key=decision_key):
            lines.append(f'  "{d.label()}" [shape=box, tooltip="{self.fm.names[d.feature]}"];')
        for o in self.or_nodes:
            lines.append(f'  "OR{o.index}" [shape=diamond];')
        for d in sorted(self.decisions, key=decision_key):
            for t in self.and_edges[d]:
                lines.append(f'  "{d.label()}" -> "{t.label()}";')
            for i in self.or_edges[d]:
                lines.append(f'  "{d.label()}" -> "OR{i}";')
        for o in self.or_nodes:
            for t in o.alternatives:
                lines.append(f'  "OR{o.index}" -> "{t.label()}";')
        lines.append("}")
        return "\n".join(lines) + "\n"


def add_feature_decision(fad: FeatureActivationDiagram, cls: FeatureClassification,
                         d: FeatureDecision) -> FeatureDecision:
    """Insert ``d`` and everything it transitively implies; existing nodes are reused."""
    if d in fad:
        return d
    pending = deque([d])
    fad.and_edges[d] = ()
    fad.or_edges[d] = ()
    fad.decisions.append(d)
    while pending:
        node = pending.popleft()
        cons = apply_principles(fad.fm, cls, node)
        targets = list(cons.ands)
        or_ids = []
        for alts in cons.ors:
            o = OrNode(len(fad.or_nodes), node, alts)
            fad.or_nodes.append(o)
            or_ids.append(o.index)
            targets.extend(alts)
        for t in targets:
            if t not in fad:
                fad.and_edges[t] = ()
                fad.or_edges[t] = ()
                fad.decisions.append(t)
                pending.append(t)
        fad.and_edges[node] = cons.ands
        fad.or_edges[node] = tuple(or_ids)
    return d


def build_fad(fm: FeatureModel, cls: FeatureClassification) -> FeatureActivationDiagram:
    """Complete diagram: both polarities of every real-optional feature."""
    fad = FeatureActivationDiagram(fm)
    for f in sorted(cls.real_optional):
        for act in (True, False):
            add_feature_decision(fad, cls, FeatureDecision(f, act))
    return fad


# ---------------------------------------------------------------------------
# toggle graphs


class ToggleGraphOverflow(RuntimeError):
    def __init__(self, cap: int):
        super().__init__(f"more than {cap} toggle graphs")
        self.cap = cap


@dataclass(frozen=True)
class ToggleGraph:
    decisions: frozenset[FeatureDecision]
    chosen_or_edges: tuple[tuple[int, FeatureDecision], ...]

    def is_valid(self) -> bool:
        features = [d.feature for d in self.decisions]
        return len(features) == len(set(features))


def enumerate_toggle_graphs(fad: FeatureActivationDiagram, d: FeatureDecision,
                            cap: int = 100_000) -> list[ToggleGraph]:
    """All valid toggle graphs rooted at ``d``.

    Only graphs whose nodes are reachable from ``d`` are produced: every
    included decision brings all its outgoing edges, every included or-node
    picks exactly one. Branches that would hold both polarities of a feature
    are pruned as soon as the clash appears.
    """
    if d not in fad:
        raise KeyError(f"{d} not in diagram")
    out: list[ToggleGraph] = []
    # state: (included decisions by feature, chosen or-edges, decisions still to close)
    stack: list[tuple[dict[int, bool], dict[int, FeatureDecision], list[FeatureDecision]]] = [
        ({}, {}, [d])
    ]
    while stack:
        included, chosen, work = stack.pop()
        included = dict(included)
        chosen = dict(chosen)
        work = list(work)
        ok = True
        while work:
            x = work.pop()
            have = included.get(x.feature)
            if have is not None:
                if have != x.activate:
                    ok = False
                    break
                continue
            included[x.feature] = x.activate
            work.extend(fad.and_edges[x])
        if not ok:
            continue
        # or-nodes reached by included decisions that have not been decided yet
        pending = sorted(i for i in _reached_ors(fad, included) if i not in chosen)
        if not pending:
            out.append(ToggleGraph(
                frozenset(FeatureDecision(f, a) for f, a in included.items()),
                tuple(sorted(chosen.items()))))
            if len(out) > cap:
                raise ToggleGraphOverflow(cap)
            continue
        i = pending[0]
        for alt in reversed(fad.or_nodes[i].alternatives):
            c2 = dict(chosen)
            c2[i] = alt
            stack.append((included, c2, [alt]))
    out.sort(key=lambda g: (len(g.decisions), sorted(map(decision_key, g.decisions))))
    return out


def _reached_ors(fad: FeatureActivationDiagram, included: dict[int, bool]) -> set[int]:
    reached: set[int] = set()
    for f, a in included.items():
        reached.update(fad.or_edges[FeatureDecision(f, a)])
    return reached


def apply_decisions(c: Configuration, decisions: Iterable[FeatureDecision]) -> Configuration:
    """Activations first, then deactivations."""
    decisions = list(decisions)
    bits = c.bits
    for d in decisions:
        if d.activate:
            bits |= 1 << d.feature
    for d in decisions:
        if not d.activate:
            bits &= ~(1 << d.feature)
    return Configuration(bits, c.width)
