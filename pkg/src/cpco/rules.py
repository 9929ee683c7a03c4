"""Variability-based rules, their flattening and application.

A VB rule bundles every variant of one operator. Its rule-specific feature
model has a mandatory ``root`` plus one optional xor group ``OR_k`` per or-node
reached, with alternatives ``O_k_j``. Each rule node is a feature decision
guarded by a presence condition over those rule features; a configuration of
the rule feature model selects the nodes whose presence condition holds.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterable, Iterator, Mapping, Sequence

from .fad import FeatureDecision, apply_decisions, decision_key, sort_decisions
from .fm import Configuration, FeatureModel
from .sat import Cnf, DpllSolver

# ---------------------------------------------------------------------------
# propositional formulas


class Formula:
    """Immutable propositional formula over named variables."""

    def evaluate(self, env: Mapping[str, bool]) -> bool:
        raise NotImplementedError

    def variables(self) -> set[str]:
        raise NotImplementedError

    def substitute(self, values: Mapping[str, bool]) -> "Formula":
        raise NotImplementedError

    def to_prefix(self) -> str:
        raise NotImplementedError

    def __str__(self) -> str:
        return self.to_prefix()


@dataclass(frozen=True)
class Const(Formula):
    value: bool

    def evaluate(self, env):
        return self.value

    def variables(self):
        return set()

    def substitute(self, values):
        return self

    def to_prefix(self):
        return "true" if self.value else "false"


TRUE = Const(True)
FALSE = Const(False)


@dataclass(frozen=True)
class Var(Formula):
    name: str

    def evaluate(self, env):
        return env[self.name]

    def variables(self):
        return {self.name}

    def substitute(self, values):
        if self.name in values:
            return Const(values[self.name])
        return self

    def to_prefix(self):
        return self.name


@dataclass(frozen=True)
class Not(Formula):
    arg: Formula

    def evaluate(self, env):
        return not self.arg.evaluate(env)

    def variables(self):
        return self.arg.variables()

    def substitute(self, values):
        return neg(self.arg.substitute(values))

    def to_prefix(self):
        return f"(not {self.arg.to_prefix()})"


@dataclass(frozen=True)
class And(Formula):
    args: tuple[Formula, ...]

    def evaluate(self, env):
        return all(a.evaluate(env) for a in self.args)

    def variables(self):
        return set().union(*(a.variables() for a in self.args))

    def substitute(self, values):
        return conj(a.substitute(values) for a in self.args)

    def to_prefix(self):
        return "(and " + " ".join(a.to_prefix() for a in self.args) + ")"


@dataclass(frozen=True)
class Or(Formula):
    args: tuple[Formula, ...]

    def evaluate(self, env):
        return any(a.evaluate(env) for a in self.args)

    def variables(self):
        return set().union(*(a.variables() for a in self.args))

    def substitute(self, values):
        return disj(a.substitute(values) for a in self.args)

    def to_prefix(self):
        return "(or " + " ".join(a.to_prefix() for a in self.args) + ")"


@dataclass(frozen=True)
class Implies(Formula):
    lhs: Formula
    rhs: Formula

    def evaluate(self, env):
        return (not self.lhs.evaluate(env)) or self.rhs.evaluate(env)

    def variables(self):
        return self.lhs.variables() | self.rhs.variables()

    def substitute(self, values):
        return implies(self.lhs.substitute(values), self.rhs.substitute(values))

    def to_prefix(self):
        return f"(implies {self.lhs.to_prefix()} {self.rhs.to_prefix()})"


def neg(a: Formula) -> Formula:
    if isinstance(a, Const):
        return Const(not a.value)
    if isinstance(a, Not):
        return a.arg
    return Not(a)


def conj(args: Iterable[Formula]) -> Formula:
    out: list[Formula] = []
    for a in args:
        if a == FALSE:
            return FALSE
        if a == TRUE or a in out:
            continue
        out.append(a)
    if not out:
        return TRUE
    return out[0] if len(out) == 1 else And(tuple(out))


def disj(args: Iterable[Formula]) -> Formula:
    out: list[Formula] = []
    for a in args:
        if a == TRUE:
            return TRUE
        if a == FALSE or a in out:
            continue
        out.append(a)
    if not out:
        return FALSE
    return out[0] if len(out) == 1 else Or(tuple(out))


def implies(lhs: Formula, rhs: Formula) -> Formula:
    if lhs == FALSE or rhs == TRUE:
        return TRUE
    if lhs == TRUE:
        return rhs
    if rhs == FALSE:
        return neg(lhs)
    return Implies(lhs, rhs)


_TOKEN = re.compile(r"\(|\)|[^\s()]+")


def parse_formula(text: str) -> Formula:
    """Inverse of ``Formula.to_prefix``."""
    tokens = _TOKEN.findall(text)
    pos = 0

    def parse() -> Formula:
        nonlocal pos
        if pos >= len(tokens):
            raise ValueError("unexpected end of formula")
        tok = tokens[pos]
        pos += 1
        if tok == "(":
            if pos >= len(tokens):
                raise ValueError("unexpected end of formula")
            op = tokens[pos]
            pos += 1
            args = []
            while pos < len(tokens) and tokens[pos] != ")":
                args.append(parse())
            if pos >= len(tokens):
                raise ValueError("missing ')'")
            pos += 1
            if op == "and":
                return And(tuple(args))
            if op == "or":
                return Or(tuple(args))
            if op == "not" and len(args) == 1:
                return Not(args[0])
            if op == "implies" and len(args) == 2:
                return Implies(args[0], args[1])
            raise ValueError(f"bad operator {op!r} with {len(args)} operands")
        if tok == ")":
            raise ValueError("unexpected ')'")
        if tok == "true":
            return TRUE
        if tok == "false":
            return FALSE
        return Var(tok)

    f = parse()
    if pos != len(tokens):
        raise ValueError(f"trailing tokens in formula: {tokens[pos:]}")
    return f


def to_clauses(f: Formula, var: Mapping[str, int]) -> list[tuple[int, ...]]:
    """CNF by negation normal form and distribution (formulas here are small)."""

    def nnf(g: Formula, positive: bool) -> Formula:
        if isinstance(g, Const):
            return Const(g.value == positive)
        if isinstance(g, Var):
            return g if positive else Not(g)
        if isinstance(g, Not):
            return nnf(g.arg, not positive)
        if isinstance(g, Implies):
            return nnf(Or((Not(g.lhs), g.rhs)), positive)
        parts = tuple(nnf(a, positive) for a in g.args)
        if isinstance(g, And) == positive:
            return And(parts)
        return Or(parts)

    def cnf(g: Formula) -> list[frozenset[int]]:
        if isinstance(g, Const):
            return [] if g.value else [frozenset()]
        if isinstance(g, Var):
            return [frozenset([var[g.name]])]
        if isinstance(g, Not):
            return [frozenset([-var[g.arg.name]])]
        if isinstance(g, And):
            return [c for a in g.args for c in cnf(a)]
        acc: list[frozenset[int]] = [frozenset()]
        for a in g.args:
            acc = [x | y for x in acc for y in cnf(a)]
        return acc

    out = []
    for c in cnf(nnf(f, True)):
        if any(-l in c for l in c):
            continue
        out.append(tuple(sorted(c, key=lambda l: (abs(l), l < 0))))
    return out


# ---------------------------------------------------------------------------
# VB rules

ROOT = "root"


def or_name(k: int) -> str:
    return f"OR_{k}"


def alt_name(k: int, j: int) -> str:
    return f"O_{k}_{j}"


@dataclass(frozen=True)
class RuleNode:
    decision: FeatureDecision
    old: bool | None
    new: bool
    pc: Formula

    @property
    def attribute(self) -> str:
        return "active"


@dataclass(frozen=True)
class RuleConstraint:
    kind: str  # or-implication | or-support | mutex | or-overlap | cycle-entry
    formula: Formula


@dataclass(frozen=True)
class VBRule:
    name: str
    root_decision: FeatureDecision
    nodes: tuple[RuleNode, ...]
    groups: tuple[tuple[str, tuple[str, ...]], ...]  # (OR_k, (O_k_1, ...)), ordered
    constraints: tuple[RuleConstraint, ...]
    # when set, only configurations whose active or-groups are reachable from
    # root through active alternatives count (see ``unsupported_groups``)
    supported_only: bool = False

    @property
    def rule_features(self) -> tuple[str, ...]:
        out = [ROOT]
        for g, alts in self.groups:
            out.append(g)
            out.extend(alts)
        return tuple(out)

    def group_map(self) -> dict[str, tuple[str, ...]]:
        return dict(self.groups)

    def node_for(self, d: FeatureDecision) -> RuleNode | None:
        for n in self.nodes:
            if n.decision == d:
                return n
        return None

    def without(self, *kinds: str) -> "VBRule":
        return VBRule(self.name, self.root_decision, self.nodes, self.groups,
                      tuple(c for c in self.constraints if c.kind not in kinds),
                      self.supported_only and "cycle-entry" not in kinds)

    def check(self) -> None:
        """Raise AssertionError when a structural invariant is broken."""
        feats = set(self.rule_features)
        root_nodes = [n for n in self.nodes if n.decision == self.root_decision]
        assert len(root_nodes) == 1 and root_nodes[0].pc == Var(ROOT), "root node must have pc root"
        assert all(n.old is None for n in self.nodes if n.decision != self.root_decision)
        assert root_nodes[0].old == (not self.root_decision.activate)
        for n in self.nodes:
            assert n.pc.variables() <= feats, f"unknown rule feature in pc of {n.decision}"
        for c in self.constraints:
            assert c.formula.variables() <= feats, f"unknown rule feature in {c.formula}"


def rule_name(fm: FeatureModel, d: FeatureDecision) -> str:
    return ("Act_" if d.activate else "De_") + fm.names[d.feature]


def rule_cnf(rule: VBRule) -> tuple[Cnf, dict[str, int]]:
    """Rule feature model plus constraints as CNF; returns the variable map."""
    feats = rule.rule_features
    var = {name: i + 1 for i, name in enumerate(feats)}
    clauses: list[tuple[int, ...]] = [(var[ROOT],)]
    for g, alts in rule.groups:
        clauses.append((-var[g], var[ROOT]))
        clauses.append((-var[g],) + tuple(var[a] for a in alts))
        for i, a in enumerate(alts):
            clauses.append((-var[a], var[g]))
            for b in alts[i + 1:]:
                clauses.append((-var[a], -var[b]))
    for c in rule.constraints:
        clauses.extend(to_clauses(c.formula, var))
    return Cnf.of(len(feats), clauses), var


@dataclass(frozen=True)
class FlatRule:
    """One concrete operator variant.

    Applicable when ``root_decision.feature`` is currently in the opposite of
    its target state; applying it sets every listed feature to its target.
    """

    id: str
    origin: str
    root_decision: FeatureDecision
    decisions: tuple[FeatureDecision, ...]

    @property
    def precondition(self) -> bool:
        """Required current state of the root decision's feature."""
        return not self.root_decision.activate

    def decision_set(self) -> frozenset[FeatureDecision]:
        return frozenset(self.decisions)

    def is_applicable(self, c: Configuration) -> bool:
        return (self.root_decision.feature in c) == self.precondition

    def describe(self, fm: FeatureModel) -> str:
        return "{" + ", ".join(d.describe(fm) for d in self.decisions) + "}"


def instantiate(rule: VBRule, env: Mapping[str, bool]) -> tuple[FeatureDecision, ...]:
    return sort_decisions(n.decision for n in rule.nodes if n.pc.evaluate(env))


class RuleUnsatisfiable(ValueError):
    pass


def or_links(rule: VBRule) -> list[tuple[str, str]]:
    """(source, OR_m) pairs taken from the or-implication constraints."""
    out = []
    for c in rule.constraints:
        f = c.formula
        if c.kind == "or-implication" and isinstance(f, Implies) and isinstance(f.lhs, Var) \
                and isinstance(f.rhs, Var):
            out.append((f.lhs.name, f.rhs.name))
    return out


def unsupported_groups(rule: VBRule, env: Mapping[str, bool],
                       links: Sequence[tuple[str, str]] | None = None) -> set[str]:
    """Active or-groups that no chain of active alternatives connects to root."""
    links = or_links(rule) if links is None else links
    succ: dict[str, list[str]] = {}
    for s, m in links:
        succ.setdefault(s, []).append(m)
    groups = rule.group_map()
    reached: set[str] = set()
    work = [ROOT]
    while work:
        s = work.pop()
        for m in succ.get(s, ()):
            if m in reached or not env.get(m, False):
                continue
            reached.add(m)
            work.extend(a for a in groups.get(m, ()) if env.get(a, False))
    return {g for g, _ in rule.groups if env.get(g, False) and g not in reached}


def _loop_clauses(rule: VBRule, unfounded: set[str], links, var: Mapping[str, int]) -> list[tuple[int, ...]]:
    inside = {a for g, alts in rule.groups if g in unfounded for a in alts}
    external = sorted({s for s, m in links if m in unfounded and s not in inside}, key=var.__getitem__)
    return [(-var[g],) + tuple(var[s] for s in external) for g in sorted(unfounded, key=var.__getitem__)]


def rule_models(rule: VBRule, seed: int = 0) -> Iterator[dict[str, bool]]:
    """Configurations of the rule feature model, as rule-feature assignments.

    For ``supported_only`` rules an unsupported configuration is never
    yielded; instead its unfounded or-groups get a loop clause (some external
    entry alternative must be active), which no supported configuration
    violates.
    """
    cnf, var = rule_cnf(rule)
    feats = rule.rule_features
    solver = DpllSolver(cnf)
    links = or_links(rule) if rule.supported_only else ()
    k = 0
    while True:
        model = solver.solve((), seed + k)
        if model is None:
            return
        k += 1
        env = {name: model[var[name] - 1] for name in feats}
        if rule.supported_only:
            unfounded = unsupported_groups(rule, env, links)
            if unfounded:
                for clause in _loop_clauses(rule, unfounded, links, var):
                    solver.add_clause(clause)
                continue
        yield env
        solver.add_clause([-var[n] if env[n] else var[n] for n in feats])


def flatten(rule: VBRule, limit: int | float = 1, seed: int = 0,
            diagnostics: list[str] | None = None) -> list[FlatRule]:
    """Enumerate up to ``limit`` distinct variants via SAT with blocking clauses.

    Configurations are blocked on every rule feature; configurations that
    induce an already-seen decision set are skipped. The polarity seed makes
    ``limit=1`` pick a pseudo-random variant.
    """
    if limit < 1:
        raise ValueError("limit must be >= 1")
    seen: set[frozenset[FeatureDecision]] = set()
    order: list[tuple[FeatureDecision, ...]] = []
    for env in rule_models(rule, seed):
        ds = instantiate(rule, env)
        key = frozenset(ds)
        if key in seen:
            continue
        seen.add(key)
        order.append(ds)
        if len(order) >= limit:
            break
    if not order and diagnostics is not None:
        diagnostics.append(f"{rule.name}: rule feature model is unsatisfiable")
    return [FlatRule(f"{rule.name}@v{i + 1}", rule.name, rule.root_decision, ds)
            for i, ds in enumerate(order)]


def flat_decision_sets(rule: VBRule) -> set[frozenset[FeatureDecision]]:
    return {r.decision_set() for r in flatten(rule, limit=float("inf"))}


def count_rule_configurations(rule: VBRule) -> int:
    from .sat import count_models

    cnf, _ = rule_cnf(rule)
    return count_models(cnf)


def remove_dead_rule_features(rule: VBRule) -> VBRule:
    """Drop rule features that no configuration sets true.

    Dead features are replaced by ``false`` in presence conditions and
    constraints; nodes whose presence condition becomes ``false`` disappear,
    as do groups left without alternatives.
    """
    cnf, var = rule_cnf(rule)
    solver = DpllSolver(cnf)
    alive: set[str] = set()
    model = solver.solve()
    if model is None:
        return rule
    alive.update(n for n in rule.rule_features if model[var[n] - 1])
    for name in rule.rule_features:
        if name in alive:
            continue
        m = solver.solve([var[name]])
        if m is not None:
            alive.update(n for n in rule.rule_features if m[var[n] - 1])
    dead = {n: False for n in rule.rule_features if n not in alive}
    if not dead:
        return rule
    nodes = []
    for n in rule.nodes:
        pc = n.pc.substitute(dead)
        if pc != FALSE:
            nodes.append(RuleNode(n.decision, n.old, n.new, pc))
    groups = []
    for g, alts in rule.groups:
        if g in dead:
            continue
        kept = tuple(a for a in alts if a not in dead)
        if kept:
            groups.append((g, kept))
    constraints = []
    for c in rule.constraints:
        f = c.formula.substitute(dead)
        if f != TRUE:
            constraints.append(RuleConstraint(c.kind, f))
    return VBRule(rule.name, rule.root_decision, tuple(nodes), tuple(groups), tuple(constraints),
                  rule.supported_only)


def apply_flat_rule(rule: FlatRule, c: Configuration) -> Configuration | None:
    """Apply the variant, or return None when its precondition fails."""
    if not rule.is_applicable(c):
        return None
    return apply_decisions(c, rule.decisions)


def net_decisions(rule: FlatRule, fm: FeatureModel, cnf: Cnf) -> tuple[FeatureDecision, ...]:
    """Decisions that change at least one valid configuration meeting the precondition.

    A decision whose target state already holds in every valid configuration
    where the root feature is in its old state is a no-op and is left out.
    """
    solver = DpllSolver(cnf)
    root_lit = (rule.root_decision.feature + 1) * (1 if rule.precondition else -1)
    out = []
    for d in rule.decisions:
        if d == rule.root_decision:
            out.append(d)
            continue
        lit = (d.feature + 1) * (-1 if d.activate else 1)
        if solver.solve([root_lit, lit]) is not None:
            out.append(d)
    return tuple(sorted(out, key=decision_key))
