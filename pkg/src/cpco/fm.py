"""Feature models, configurations and validity checking.

Feature models are read from a small line-based text format::

    MobileMedia
      MediaSelection [mandatory] <or>
        Photo
        Music
      Extras [optional]
    constraints:
      Music requires Extras

Two spaces of indentation per tree level. Children of a plain feature carry
``[mandatory]`` or ``[optional]``; members of an ``<or>``/``<xor>`` group carry
no kind marker. Only binary ``requires``/``excludes`` constraints are accepted.
"""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Iterator, Sequence


class ChildKind(str, enum.Enum):
    ROOT = "root"
    MANDATORY = "mandatory"
    OPTIONAL = "optional"
    GROUP_MEMBER = "group-member"


class GroupKind(str, enum.Enum):
    NONE = "none"
    OR = "or"
    XOR = "xor"


class ViolationKind(str, enum.Enum):
    CMand = "CMand"
    CPar = "CPar"
    CReq = "CReq"
    CExcl = "CExcl"
    COr = "COr"
    CXor = "CXor"
    CRoot = "CRoot"


class FeatureModelError(ValueError):
    """Raised when a feature model violates a structural invariant."""


class ParseError(FeatureModelError):
    def __init__(self, message: str, line: int, column: int = 1):
        super().__init__(f"line {line}, column {column}: {message}")
        self.line = line
        self.column = column


class EnumerationOverflow(RuntimeError):
    """More valid configurations exist than the requested cap."""

    def __init__(self, cap: int):
        super().__init__(f"more than {cap} valid configurations")
        self.cap = cap


NAME_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")
_LINE_RE = re.compile(
    r"^(?P<name>[A-Za-z_][A-Za-z0-9_]*)"
    r"(?:\s+\[(?P<kind>mandatory|optional)\])?"
    r"(?:\s+<(?P<group>or|xor)>)?\s*$"
)
_CONSTRAINT_RE = re.compile(
    r"^(?P<a>[A-Za-z_][A-Za-z0-9_]*)\s+(?P<op>requires|excludes)\s+(?P<b>[A-Za-z_][A-Za-z0-9_]*)\s*$"
)
SUPPORTED_DIALECT = "only '<A> requires <B>' and '<A> excludes <B>' are supported"


@dataclass(frozen=True)
class FeatureModel:
    """A feature tree with group kinds and binary cross-tree constraints.

    Feature ids are dense integers; id 0 is the root and ids follow document
    order, so every parent has a smaller id than its children.
    """

    names: tuple[str, ...]
    parent: tuple[int | None, ...]
    child_kind: tuple[ChildKind, ...]
    group_kind: tuple[GroupKind, ...]
    requires: tuple[tuple[int, int], ...] = ()
    excludes: tuple[tuple[int, int], ...] = ()

    def __post_init__(self):
        n = len(self.names)
        if n == 0:
            raise FeatureModelError("feature model has no features")
        if not (len(self.parent) == len(self.child_kind) == len(self.group_kind) == n):
            raise FeatureModelError("per-feature tables differ in length")
        if len(set(self.names)) != n:
            raise FeatureModelError("duplicate feature name")
        roots = [f for f in range(n) if self.parent[f] is None]
        if roots != [0]:
            raise FeatureModelError("exactly one root with id 0 is required")
        for f in range(1, n):
            p = self.parent[f]
            if not 0 <= p < f:
                raise FeatureModelError(f"parent of {self.names[f]} must precede it")
            in_group = self.group_kind[p] is not GroupKind.NONE
            if in_group != (self.child_kind[f] is ChildKind.GROUP_MEMBER):
                raise FeatureModelError(f"child kind of {self.names[f]} disagrees with its parent's group kind")
        for f in range(n):
            if self.group_kind[f] is not GroupKind.NONE and len(self.children[f]) < 2:
                raise FeatureModelError(f"group with < 2 children: {self.names[f]}")
        for a, b in self.requires + self.excludes:
            if not (0 <= a < n and 0 <= b < n) or a == b:
                raise FeatureModelError(f"constraint references invalid features ({a}, {b})")

    @property
    def size(self) -> int:
        return len(self.names)

    @property
    def root(self) -> int:
        return 0

    @cached_property
    def children(self) -> tuple[tuple[int, ...], ...]:
        kids: list[list[int]] = [[] for _ in self.names]
        for f, p in enumerate(self.parent):
            if p is not None:
                kids[p].append(f)
        return tuple(tuple(k) for k in kids)

    @cached_property
    def index(self) -> dict[str, int]:
        return {name: i for i, name in enumerate(self.names)}

    def id(self, name: str) -> int:
        try:
            return self.index[name]
        except KeyError:
            raise KeyError(f"unknown feature {name!r}") from None

    @cached_property
    def groups(self) -> tuple[int, ...]:
        return tuple(f for f in range(self.size) if self.group_kind[f] is not GroupKind.NONE)

    def siblings(self, f: int) -> tuple[int, ...]:
        p = self.parent[f]
        if p is None:
            return ()
        return tuple(g for g in self.children[p] if g != f)

    def mandatory_children(self, f: int) -> tuple[int, ...]:
        return tuple(g for g in self.children[f] if self.child_kind[g] is ChildKind.MANDATORY)

    @cached_property
    def required_by(self) -> tuple[tuple[int, ...], ...]:
        """required_by[f] lists every g with ``g requires f``."""
        out: list[list[int]] = [[] for _ in self.names]
        for a, b in self.requires:
            out[b].append(a)
        return tuple(tuple(sorted(x)) for x in out)

    @cached_property
    def requirements(self) -> tuple[tuple[int, ...], ...]:
        out: list[list[int]] = [[] for _ in self.names]
        for a, b in self.requires:
            out[a].append(b)
        return tuple(tuple(sorted(x)) for x in out)

    @cached_property
    def exclusions(self) -> tuple[tuple[int, ...], ...]:
        out: list[set[int]] = [set() for _ in self.names]
        for a, b in self.excludes:
            out[a].add(b)
            out[b].add(a)
        return tuple(tuple(sorted(x)) for x in out)

    def configuration(self, names: Iterable[str]) -> "Configuration":
        return Configuration.from_ids(self.size, (self.id(n) for n in names))

    def without_constraints(self) -> "FeatureModel":
        return FeatureModel(self.names, self.parent, self.child_kind, self.group_kind)


@dataclass(frozen=True, order=True)
class Configuration:
    """Set of active features stored as an integer bitmask (bit i = feature i)."""

    bits: int
    width: int

    def __post_init__(self):
        if self.bits < 0 or self.bits >> self.width:
            raise ValueError("configuration has bits outside its width")

    @classmethod
    def from_ids(cls, width: int, ids: Iterable[int]) -> "Configuration":
        bits = 0
        for i in ids:
            if not 0 <= i < width:
                raise ValueError(f"feature id {i} out of range")
            bits |= 1 << i
        return cls(bits, width)

    @classmethod
    def from_bools(cls, values: Sequence[bool]) -> "Configuration":
        return cls.from_ids(len(values), (i for i, v in enumerate(values) if v))

    def __contains__(self, f: int) -> bool:
        return bool(self.bits >> f & 1)

    def active(self) -> tuple[int, ...]:
        return tuple(i for i in range(self.width) if self.bits >> i & 1)

    def to_bools(self) -> list[bool]:
        return [bool(self.bits >> i & 1) for i in range(self.width)]

    def count(self) -> int:
        return bin(self.bits).count("1")

    def set(self, f: int, value: bool) -> "Configuration":
        if value:
            return Configuration(self.bits | 1 << f, self.width)
        return Configuration(self.bits & ~(1 << f), self.width)

    def names(self, fm: FeatureModel) -> list[str]:
        return [fm.names[i] for i in self.active()]

    def __str__(self) -> str:
        return "".join("1" if self.bits >> i & 1 else "0" for i in range(self.width))


@dataclass(frozen=True)
class ConstraintViolation:
    kind: ViolationKind
    subject: int
    witness: int | None = None

    def describe(self, fm: FeatureModel) -> str:
        s = f"{self.kind.value}({fm.names[self.subject]}"
        if self.witness is not None:
            s += f", {fm.names[self.witness]}"
        return s + ")"


# ---------------------------------------------------------------------------
# parsing and serialisation


def parse_feature_model(text: str) -> FeatureModel:
    names: list[str] = []
    parent: list[int | None] = []
    kinds: list[ChildKind] = []
    groups: list[GroupKind] = []
    seen: dict[str, int] = {}
    stack: list[int] = []  # stack[d] = feature id at depth d
    raw_constraints: list[tuple[str, str, str, int, int]] = []
    in_constraints = False

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.rstrip()
        stripped = line.lstrip(" ")
        if not stripped or stripped.startswith("#"):
            continue
        if "\t" in line:
            raise ParseError("tabs are not allowed; indent with two spaces", lineno, line.index("\t") + 1)
        indent = len(line) - len(stripped)

        if in_constraints:
            m = _CONSTRAINT_RE.match(stripped)
            if not m:
                raise ParseError(f"unsupported constraint {stripped!r}: {SUPPORTED_DIALECT}", lineno, indent + 1)
            raw_constraints.append((m["a"], m["op"], m["b"], lineno, indent + 1))
            continue
        if stripped == "constraints:" and indent == 0:
            if not names:
                raise ParseError("constraints section before the feature tree", lineno)
            in_constraints = True
            continue

        if indent % 2:
            raise ParseError("indentation must be a multiple of two spaces", lineno, indent + 1)
        depth = indent // 2
        m = _LINE_RE.match(stripped)
        if not m:
            raise ParseError(f"cannot parse feature line {stripped!r}", lineno, indent + 1)
        name, kind, group = m["name"], m["kind"], m["group"]
        if name in seen:
            raise ParseError(f"duplicate feature name {name!r}", lineno, indent + 1)

        if depth == 0:
            if names:
                raise ParseError("only one root feature is allowed", lineno, 1)
            if kind is not None:
                raise ParseError("the root feature takes no [mandatory]/[optional] marker", lineno, len(name) + 2)
            p, ck = None, ChildKind.ROOT
        else:
            if not names:
                raise ParseError("first line must be the unindented root feature", lineno, 1)
            if depth > len(stack):
                raise ParseError("indentation skips a level", lineno, indent + 1)
            p = stack[depth - 1]
            if groups[p] is GroupKind.NONE:
                if kind is None:
                    raise ParseError("child of a non-group feature needs [mandatory] or [optional]", lineno, indent + len(name) + 1)
                ck = ChildKind(kind)
            else:
                if kind is not None:
                    raise ParseError("group members carry no [mandatory]/[optional] marker", lineno, indent + len(name) + 2)
                ck = ChildKind.GROUP_MEMBER

        fid = len(names)
        seen[name] = fid
        names.append(name)
        parent.append(p)
        kinds.append(ck)
        groups.append(GroupKind(group) if group else GroupKind.NONE)
        del stack[depth:]
        stack.append(fid)

    if not names:
        raise ParseError("empty feature model", 1)

    child_count = [0] * len(names)
    for p in parent:
        if p is not None:
            child_count[p] += 1
    for f, g in enumerate(groups):
        if g is not GroupKind.NONE and child_count[f] < 2:
            raise FeatureModelError(f"group with < 2 children: {names[f]}")

    requires: list[tuple[int, int]] = []
    excludes: list[tuple[int, int]] = []
    for a, op, b, lineno, col in raw_constraints:
        for n in (a, b):
            if n not in seen:
                raise ParseError(f"unknown feature in constraint: {n!r}", lineno, col)
        if a == b:
            raise ParseError(f"constraint relates {a!r} to itself", lineno, col)
        if op == "requires":
            pair = (seen[a], seen[b])
            if pair not in requires:
                requires.append(pair)
        else:
            pair = tuple(sorted((seen[a], seen[b])))
            if pair not in excludes:
                excludes.append(pair)

    return FeatureModel(tuple(names), tuple(parent), tuple(kinds), tuple(groups),
                        tuple(requires), tuple(excludes))


def load_feature_model(path) -> FeatureModel:
    """Parse a model file; parse errors are prefixed with the file name."""
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    try:
        return parse_feature_model(text)
    except ParseError as exc:
        err = ParseError(str(exc), exc.line, exc.column)
        err.args = (f"{path}: {exc}",)
        raise err from None


def bundled_models() -> list[str]:
    """Names of the models shipped in the package data folder."""
    from importlib.resources import files
    return sorted(p.name[:-3] for p in files("cpco").joinpath("data").iterdir() if p.name.endswith(".fm"))


def bundled_model(name: str) -> FeatureModel:
    from importlib.resources import files
    return parse_feature_model(files("cpco").joinpath("data", f"{name}.fm").read_text(encoding="utf-8"))


def serialize_feature_model(fm: FeatureModel) -> str:
    """Inverse of :func:`parse_feature_model` up to whitespace and comments."""
    lines: list[str] = []

    _emit_iterative(fm, lines)
    if fm.requires or fm.excludes:
        lines.append("constraints:")
        lines.extend(f"  {fm.names[a]} requires {fm.names[b]}" for a, b in fm.requires)
        lines.extend(f"  {fm.names[a]} excludes {fm.names[b]}" for a, b in fm.excludes)
    return "\n".join(lines) + "\n"


def _emit_iterative(fm: FeatureModel, lines: list[str]) -> None:
    stack = [(0, 0)]
    while stack:
        f, depth = stack.pop()
        parts = [fm.names[f]]
        if fm.child_kind[f] in (ChildKind.MANDATORY, ChildKind.OPTIONAL):
            parts.append(f"[{fm.child_kind[f].value}]")
        if fm.group_kind[f] is not GroupKind.NONE:
            parts.append(f"<{fm.group_kind[f].value}>")
        lines.append("  " * depth + " ".join(parts))
        stack.extend((c, depth + 1) for c in reversed(fm.children[f]))


# ---------------------------------------------------------------------------
# validity


def check_validity(fm: FeatureModel, c: Configuration) -> list[ConstraintViolation]:
    """Return every violated instance of the seven validity constraints."""
    if c.width != fm.size:
        raise ValueError(f"configuration width {c.width} does not match model size {fm.size}")
    bits = c.bits
    out: list[ConstraintViolation] = []
    if not bits & 1:
        out.append(ConstraintViolation(ViolationKind.CRoot, fm.root))
    for f in range(fm.size):
        if not bits >> f & 1:
            continue
        p = fm.parent[f]
        if p is not None and not bits >> p & 1:
            out.append(ConstraintViolation(ViolationKind.CPar, f, p))
        for g in fm.mandatory_children(f):
            if not bits >> g & 1:
                out.append(ConstraintViolation(ViolationKind.CMand, f, g))
        gk = fm.group_kind[f]
        if gk is not GroupKind.NONE:
            on = [g for g in fm.children[f] if bits >> g & 1]
            if gk is GroupKind.OR and not on:
                out.append(ConstraintViolation(ViolationKind.COr, f))
            elif gk is GroupKind.XOR and len(on) != 1:
                out.append(ConstraintViolation(ViolationKind.CXor, f, on[1] if len(on) > 1 else None))
        for g in fm.requirements[f]:
            if not bits >> g & 1:
                out.append(ConstraintViolation(ViolationKind.CReq, f, g))
    for a, b in fm.excludes:
        if bits >> a & 1 and bits >> b & 1:
            out.append(ConstraintViolation(ViolationKind.CExcl, a, b))
    return out


def is_valid(fm: FeatureModel, c: Configuration) -> bool:
    return not check_validity(fm, c)


# ---------------------------------------------------------------------------
# brute-force enumeration oracle


class _Plan:
    """Per-feature checks for the backtracking enumerator, keyed by the id at
    which all features involved in the check have been decided."""

    def __init__(self, fm: FeatureModel):
        n = fm.size
        self.n = n
        self.parent = [(-1 if p is None else p) for p in fm.parent]
        self.mandatory = [fm.child_kind[f] is ChildKind.MANDATORY for f in range(n)]
        # check[f]: list of (kind, data) evaluated right after feature f is decided
        self.checks: list[list[tuple[str, object]]] = [[] for _ in range(n)]
        for a, b in fm.requires:
            self.checks[max(a, b)].append(("req", (a, b)))
        for a, b in fm.excludes:
            self.checks[max(a, b)].append(("exc", (1 << a) | (1 << b)))
        # xor/or groups: children decided in id order, group closes at its last child
        self.group_of = [-1] * n
        for g in fm.groups:
            kids = fm.children[g]
            mask = 0
            for k in kids:
                mask |= 1 << k
                self.group_of[k] = g
            self.checks[kids[-1]].append((fm.group_kind[g].value, (g, mask)))
        self.group_mask = {g: sum(1 << k for k in fm.children[g]) for g in fm.groups}
        self.group_kind = [fm.group_kind[f] for f in range(n)]


def iter_valid_configurations(fm: FeatureModel) -> Iterator[int]:
    """Yield valid configurations as bitmasks in lexicographic bit-vector order.

    Features are decided in id order (inactive before active). Parents precede
    children, so CPar/CMand are enforced while branching; group and cross-tree
    checks run as soon as every feature they mention is decided.
    """
    plan = _Plan(fm)
    n = plan.n
    parent, mandatory, checks = plan.parent, plan.mandatory, plan.checks
    group_of, group_mask = plan.group_of, plan.group_mask
    xor_kind = GroupKind.XOR

    def options(f: int, bits: int) -> tuple[int, ...]:
        if f == 0:
            return (1,)
        if not bits >> parent[f] & 1:
            return (0,)
        if mandatory[f]:
            return (1,)
        g = group_of[f]
        if g >= 0 and plan.group_kind[g] is xor_kind and bits & group_mask[g]:
            return (0,)
        return (0, 1)

    def passes(f: int, bits: int) -> bool:
        for kind, data in checks[f]:
            if kind == "req":
                a, b = data
                if bits >> a & 1 and not bits >> b & 1:
                    return False
            elif kind == "exc":
                if bits & data == data:
                    return False
            else:
                g, mask = data
                if bits >> g & 1:
                    on = bits & mask
                    if not on:
                        return False
                    if kind == "xor" and on & (on - 1):
                        return False
        return True

    # explicit stack: entries are (feature, bits-so-far, remaining options)
    stack: list[tuple[int, int, list[int]]] = [(0, 0, list(options(0, 0)))]
    while stack:
        f, bits, opts = stack[-1]
        if not opts:
            stack.pop()
            continue
        v = opts.pop(0)
        nb = bits | (v << f)
        if not passes(f, nb):
            continue
        if f + 1 == n:
            yield nb
            continue
        stack.append((f + 1, nb, list(options(f + 1, nb))))


def enumerate_valid_configurations(fm: FeatureModel, cap: int) -> list[Configuration]:
    """All valid configurations; raises EnumerationOverflow past ``cap``."""
    out: list[Configuration] = []
    for bits in iter_valid_configurations(fm):
        if len(out) >= cap:
            raise EnumerationOverflow(cap)
        out.append(Configuration(bits, fm.size))
    return out


def count_valid_configurations(fm: FeatureModel, cap: int | None = None) -> int:
    count = 0
    for _ in iter_valid_configurations(fm):
        count += 1
        if cap is not None and count > cap:
            raise EnumerationOverflow(cap)
    return count
