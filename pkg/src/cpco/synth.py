"""Synthetic feature models: random trees for property tests and chains for timing."""

from __future__ import annotations

import random

from .fm import ChildKind, FeatureModel, GroupKind


def chain_model(n: int) -> FeatureModel:
    """Root followed by ``n - 1`` nested optional features, each with a side leaf.

    Every feature ``C_i`` is an optional child of ``C_{i-1}`` and requires the
    optional leaf ``L_i`` hanging off the root, so diagram size grows linearly.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    names = ["Root"]
    parent: list[int | None] = [None]
    kinds = [ChildKind.ROOT]
    requires = []
    prev = 0
    k = 1
    while len(names) < n:
        names.append(f"C{k}")
        parent.append(prev)
        kinds.append(ChildKind.OPTIONAL)
        prev = len(names) - 1
        if len(names) < n:
            names.append(f"L{k}")
            parent.append(0)
            kinds.append(ChildKind.OPTIONAL)
            requires.append((prev, len(names) - 1))
        k += 1
    # ids must follow document order: rebuild in DFS order
    return _reorder(names, parent, kinds, [GroupKind.NONE] * len(names), requires, [])


def random_feature_model(seed: int, n: int = 10, group_prob: float = 0.35,
                         ctc_count: int = 2, max_children: int = 4) -> FeatureModel:
    """Random well-formed model with ``n`` features (``n >= 1``)."""
    rng = random.Random(seed)
    names = [f"F{i}" for i in range(n)]
    names[0] = "Root"
    parent: list[int | None] = [None]
    kinds = [ChildKind.ROOT]
    children: list[list[int]] = [[]]
    for f in range(1, n):
        candidates = [p for p in range(f) if len(children[p]) < max_children]
        p = rng.choice(candidates)
        parent.append(p)
        children.append([])
        children[p].append(f)
        kinds.append(ChildKind.OPTIONAL)
    groups = [GroupKind.NONE] * n
    for f in range(n):
        if len(children[f]) >= 2 and rng.random() < group_prob:
            groups[f] = rng.choice([GroupKind.OR, GroupKind.XOR])
            for c in children[f]:
                kinds[c] = ChildKind.GROUP_MEMBER
        else:
            for c in children[f]:
                kinds[c] = rng.choice([ChildKind.MANDATORY, ChildKind.OPTIONAL, ChildKind.OPTIONAL])
    requires, excludes = [], []
    for _ in range(ctc_count):
        if n < 3:
            break
        a, b = rng.sample(range(1, n), 2)
        if rng.random() < 0.5:
            if (a, b) not in requires:
                requires.append((a, b))
        else:
            pair = tuple(sorted((a, b)))
            if pair not in excludes:
                excludes.append(pair)
    return _reorder(names, parent, kinds, groups, requires, excludes)


def _reorder(names, parent, kinds, groups, requires, excludes) -> FeatureModel:
    n = len(names)
    children: list[list[int]] = [[] for _ in range(n)]
    for f in range(1, n):
        children[parent[f]].append(f)
    order = []
    stack = [0]
    while stack:
        f = stack.pop()
        order.append(f)
        stack.extend(reversed(children[f]))
    new = {old: i for i, old in enumerate(order)}
    return FeatureModel(
        tuple(names[o] for o in order),
        tuple(None if parent[o] is None else new[parent[o]] for o in order),
        tuple(kinds[o] for o in order),
        tuple(groups[o] for o in order),
        tuple((new[a], new[b]) for a, b in requires),
        tuple(tuple(sorted((new[a], new[b]))) for a, b in excludes),
    )
