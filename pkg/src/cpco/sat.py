"""CNF translation of feature models and a small DPLL solver.

The solver is deliberately simple: chronological backtracking with unit
propagation over occurrence lists. It is adequate for feature models and rule
feature models with up to a few thousand variables.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Iterator, Protocol, Sequence

from .fm import ChildKind, FeatureModel, GroupKind

MASK64 = (1 << 64) - 1


def splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & MASK64
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


@dataclass(frozen=True)
class Cnf:
    """Clauses over variables ``1..var_count`` using signed-integer literals."""

    var_count: int
    clauses: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        for clause in self.clauses:
            for lit in clause:
                if lit == 0 or abs(lit) > self.var_count:
                    raise ValueError(f"literal {lit} outside 1..{self.var_count}")

    @classmethod
    def of(cls, var_count: int, clauses: Iterable[Iterable[int]]) -> "Cnf":
        return cls(var_count, tuple(tuple(c) for c in clauses))

    def with_clauses(self, extra: Iterable[Iterable[int]]) -> "Cnf":
        return Cnf(self.var_count, self.clauses + tuple(tuple(c) for c in extra))

    def satisfied_by(self, assignment: Sequence[bool]) -> bool:
        """``assignment[v-1]`` is the value of variable v."""
        return all(any((lit > 0) == assignment[abs(lit) - 1] for lit in c) for c in self.clauses)

    def to_dimacs(self, comments: Iterable[str] = ()) -> str:
        lines = [f"c {c}" for c in comments]
        lines.append(f"p cnf {self.var_count} {len(self.clauses)}")
        lines.extend(" ".join(map(str, c)) + " 0" for c in self.clauses)
        return "\n".join(lines) + "\n"


def to_cnf(fm: FeatureModel) -> Cnf:
    """Standard translation; variable ``i + 1`` stands for feature ``i``."""
    v = lambda f: f + 1  # noqa: E731
    clauses: list[tuple[int, ...]] = [(v(0),)]
    for f in range(1, fm.size):
        p = fm.parent[f]
        clauses.append((-v(f), v(p)))
        if fm.child_kind[f] is ChildKind.MANDATORY:
            clauses.append((-v(p), v(f)))
    for g in fm.groups:
        kids = fm.children[g]
        clauses.append((-v(g),) + tuple(v(k) for k in kids))
        if fm.group_kind[g] is GroupKind.XOR:
            for i, a in enumerate(kids):
                for b in kids[i + 1:]:
                    clauses.append((-v(a), -v(b)))
    for a, b in fm.requires:
        clauses.append((-v(a), v(b)))
    for a, b in fm.excludes:
        clauses.append((-v(a), -v(b)))
    return Cnf(fm.size, tuple(clauses))


def dimacs_for_model(fm: FeatureModel) -> str:
    comments = [f"feature {i} {name}" for i, name in enumerate(fm.names)]
    return to_cnf(fm).to_dimacs(comments)


def parse_dimacs(text: str) -> Cnf:
    var_count = None
    clauses: list[tuple[int, ...]] = []
    current: list[int] = []
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("c"):
            continue
        if line.startswith("p"):
            parts = line.split()
            if len(parts) != 4 or parts[1] != "cnf":
                raise ValueError(f"bad problem line {line!r}")
            var_count = int(parts[2])
            continue
        for tok in line.split():
            lit = int(tok)
            if lit == 0:
                clauses.append(tuple(current))
                current = []
            else:
                current.append(lit)
    if var_count is None:
        raise ValueError("missing 'p cnf' line")
    if current:
        clauses.append(tuple(current))
    return Cnf(var_count, tuple(clauses))


# ---------------------------------------------------------------------------
# solver


class SatSolver(Protocol):
    """Minimal interface so an external solver can replace the built-in one."""

    def solve(self, assumptions: Sequence[int] = (), polarity_seed: int = 0,
              phases: dict[int, bool] | None = None) -> list[bool] | None: ...

    def add_clause(self, clause: Sequence[int]) -> None: ...


class DpllSolver:
    """DPLL with unit propagation, variables decided in index order.

    Decision polarity comes from ``phases`` when the variable is listed there,
    otherwise from a splitmix64 stream keyed by ``polarity_seed`` and the
    variable index, so a fixed seed always yields the same model.
    """

    def __init__(self, cnf: Cnf):
        self.var_count = cnf.var_count
        self.clauses: list[tuple[int, ...]] = []
        # occ[lit]: indices of clauses containing lit, scanned when lit becomes false
        self._occ: dict[int, list[int]] = {}
        self._units: list[int] = []
        self._empty = False
        for c in cnf.clauses:
            self.add_clause(c)

    def add_clause(self, clause: Sequence[int]) -> None:
        c = tuple(dict.fromkeys(clause))
        if any(-lit in c for lit in c):
            return  # tautology
        for lit in c:
            if lit == 0 or abs(lit) > self.var_count:
                raise ValueError(f"literal {lit} outside 1..{self.var_count}")
        idx = len(self.clauses)
        self.clauses.append(c)
        if not c:
            self._empty = True
        elif len(c) == 1:
            self._units.append(c[0])
        for lit in c:
            self._occ.setdefault(lit, []).append(idx)

    def solve(self, assumptions: Sequence[int] = (), polarity_seed: int = 0,
              phases: dict[int, bool] | None = None) -> list[bool] | None:
        return next(self.models(assumptions, polarity_seed, phases), None)

    def models(self, assumptions: Sequence[int] = (), polarity_seed: int = 0,
               phases: dict[int, bool] | None = None) -> Iterator[list[bool]]:
        """Every model under the assumptions, each exactly once.

        The search resumes after each model by backtracking, so no blocking
        clauses are needed. Clauses added while iterating are not seen.
        """
        if self._empty:
            return
        n = self.var_count
        val = [0] * (n + 1)  # 0 unassigned, 1 true, -1 false
        trail: list[int] = []
        clauses, occ = self.clauses, self._occ

        def assign(lit: int) -> bool:
            var = abs(lit)
            want = 1 if lit > 0 else -1
            if val[var]:
                return val[var] == want
            val[var] = want
            trail.append(lit)
            return True

        def propagate(start: int) -> bool:
            i = start
            while i < len(trail):
                false_lit = -trail[i]
                i += 1
                for ci in occ.get(false_lit, ()):
                    unassigned = 0
                    last = 0
                    sat = False
                    for lit in clauses[ci]:
                        s = val[abs(lit)]
                        if s == 0:
                            unassigned += 1
                            last = lit
                            if unassigned > 1:
                                break
                        elif (s > 0) == (lit > 0):
                            sat = True
                            break
                    if sat or unassigned > 1:
                        continue
                    if unassigned == 0:
                        return False
                    assign(last)
            return True

        for lit in list(self._units) + list(assumptions):
            if abs(lit) > n or lit == 0:
                raise ValueError(f"assumption {lit} outside 1..{n}")
            if not assign(lit):
                return
        if not propagate(0):
            return

        # decision stack entries: (trail length before decision, literal, flipped?)
        decisions: list[tuple[int, int, bool]] = []
        next_var = 1
        while True:
            while next_var <= n and val[next_var]:
                next_var += 1
            if next_var > n:
                yield [val[v] > 0 for v in range(1, n + 1)]
                ok = False  # continue the search past this model
            else:
                if phases is not None and next_var in phases:
                    positive = phases[next_var]
                else:
                    positive = bool(splitmix64((polarity_seed * 0x100000001B3 + next_var) & MASK64) & 1)
                lit = next_var if positive else -next_var
                decisions.append((len(trail), lit, False))
                assign(lit)
                ok = propagate(len(trail) - 1)
            while not ok:
                # backtrack to the most recent unflipped decision
                while decisions and decisions[-1][2]:
                    decisions.pop()
                if not decisions:
                    return
                mark, dlit, _ = decisions.pop()
                for undone in trail[mark:]:
                    val[abs(undone)] = 0
                del trail[mark:]
                decisions.append((mark, -dlit, True))
                assign(-dlit)
                ok = propagate(mark)
            next_var = 1


def solve(cnf: Cnf, assumptions: Sequence[int] = (), polarity_seed: int = 0,
          phases: dict[int, bool] | None = None) -> list[bool] | None:
    """One-shot solve. Returns ``assignment[v-1]`` values or None when UNSAT."""
    return DpllSolver(cnf).solve(assumptions, polarity_seed, phases)


def iter_models(cnf: Cnf, polarity_seed: int = 0, project: Sequence[int] | None = None,
                assumptions: Sequence[int] = ()) -> Iterator[list[bool]]:
    """Enumerate models.

    Without ``project`` one resumable search yields every model once. With
    ``project`` given, blocking clauses mention only those variables, so each
    yielded model is distinct on the projection.
    """
    solver = DpllSolver(cnf)
    if project is None:
        yield from solver.models(assumptions, polarity_seed)
        return
    variables = list(project)
    k = 0
    while True:
        model = solver.solve(assumptions, polarity_seed + k)
        if model is None:
            return
        yield model
        k += 1
        block = [-v if model[v - 1] else v for v in variables]
        if not block:
            return
        solver.add_clause(block)


def count_models(cnf: Cnf) -> int:
    """Exact model count by DPLL with component decomposition and caching."""
    cache: dict[frozenset, int] = {}
    clauses = [frozenset(c) for c in cnf.clauses]
    if any(not c for c in clauses):
        return 0
    mentioned = {abs(l) for c in clauses for l in c}
    free = cnf.var_count - len(mentioned)
    return _count(frozenset(clauses), cache) << free


def _simplify(clauses: Iterable[frozenset], lit: int) -> frozenset | None:
    out = []
    for c in clauses:
        if lit in c:
            continue
        if -lit in c:
            c = c - {-lit}
            if not c:
                return None
        out.append(c)
    return frozenset(out)


def _components(clauses: frozenset) -> list[frozenset]:
    parent: dict[int, int] = {}

    def find(x: int) -> int:
        while parent.setdefault(x, x) != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for c in clauses:
        vs = [abs(l) for l in c]
        r = find(vs[0])
        for v in vs[1:]:
            rv = find(v)
            if rv != r:
                parent[rv] = r
    groups: dict[int, list] = {}
    for c in clauses:
        groups.setdefault(find(abs(next(iter(c)))), []).append(c)
    return [frozenset(g) for g in groups.values()]


def _vars(clauses: frozenset) -> set[int]:
    return {abs(l) for c in clauses for l in c}


def _count(clauses: frozenset, cache: dict) -> int:
    if not clauses:
        return 1
    hit = cache.get(clauses)
    if hit is not None:
        return hit
    # unit propagation first
    for c in clauses:
        if len(c) == 1:
            lit = next(iter(c))
            before = _vars(clauses)
            rest = _simplify(clauses, lit)
            result = 0 if rest is None else _count(rest, cache) << (len(before) - 1 - len(_vars(rest)))
            cache[clauses] = result
            return result
    comps = _components(clauses)
    if len(comps) > 1:
        result = 1
        for comp in comps:
            result *= _count(comp, cache)
            if not result:
                break
        cache[clauses] = result
        return result
    before = _vars(clauses)
    var = min(before)
    total = 0
    for lit in (var, -var):
        rest = _simplify(clauses, lit)
        if rest is not None:
            total += _count(rest, cache) << (len(before) - 1 - len(_vars(rest)))
    cache[clauses] = total
    return total


# ---------------------------------------------------------------------------
# feature classification


class UnsatisfiableModel(ValueError):
    pass


@dataclass(frozen=True)
class FeatureClassification:
    core: frozenset[int]
    dead: frozenset[int]
    real_optional: frozenset[int]
    solver_calls: int = field(default=0, compare=False)

    def is_real_optional(self, f: int) -> bool:
        return f in self.real_optional


def classify_features(fm: FeatureModel, cnf: Cnf | None = None) -> FeatureClassification:
    """Core/dead/real-optional split with one SAT call per undecided polarity.

    Every model found is recorded, so a feature already seen both active and
    inactive needs no further call.
    """
    cnf = cnf or to_cnf(fm)
    solver = DpllSolver(cnf)
    first = solver.solve()
    calls = 1
    if first is None:
        raise UnsatisfiableModel("feature model has no valid configuration (root call UNSAT)")
    seen_true = [False] * fm.size
    seen_false = [False] * fm.size

    def record(model: list[bool]) -> None:
        for i, b in enumerate(model):
            if b:
                seen_true[i] = True
            else:
                seen_false[i] = True

    record(first)
    core, dead = set(), set()
    for f in range(fm.size):
        if not seen_false[f]:
            m = solver.solve([-(f + 1)], polarity_seed=f)
            calls += 1
            if m is None:
                core.add(f)
            else:
                record(m)
        if f not in core and not seen_true[f]:
            m = solver.solve([f + 1], polarity_seed=f)
            calls += 1
            if m is None:
                dead.add(f)
            else:
                record(m)
    optional = frozenset(range(fm.size)) - core - dead
    return FeatureClassification(frozenset(core), frozenset(dead), optional, calls)
