"""Pareto fronts, exact hypervolume and the two-sample statistics used to compare runs."""

from __future__ import annotations

import math
import statistics
import warnings
from dataclasses import dataclass
from typing import Iterable, Literal, Mapping, Sequence

import numpy as np

Alternative = Literal["greater", "less"]
SUMMARY_COLUMNS = ("NFE", "HV Median", "Time Median (s)", "HV SD", "Time SD")


@dataclass(frozen=True)
class ParetoFront:
    """Mutually nondominated objective vectors, all minimized."""

    points: tuple[tuple[float, ...], ...]

    def __len__(self) -> int:
        return len(self.points)

    def __iter__(self):
        return iter(self.points)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.points, dtype=float)


def dominates(a: Sequence[float], b: Sequence[float]) -> bool:
    """True iff ``a`` is no worse than ``b`` everywhere and better somewhere."""
    return all(x <= y for x, y in zip(a, b)) and any(x < y for x, y in zip(a, b))


def pareto_front(points: Iterable[Sequence[float]]) -> ParetoFront:
    """Nondominated subset of ``points`` with duplicates collapsed.

    Points are sorted lexicographically first, so a point can only be
    dominated by one that precedes it; the result is in that sorted order.
    """
    pts = sorted({tuple(float(v) for v in p) for p in points})
    if pts and len({len(p) for p in pts}) != 1:
        raise ValueError("objective vectors differ in length")
    kept: list[tuple[float, ...]] = []
    for p in pts:
        if not any(dominates(q, p) for q in kept):
            kept.append(p)
    return ParetoFront(tuple(kept))


# ---------------------------------------------------------------------------
# hypervolume


@dataclass(frozen=True)
class HvConfig:
    """Normalization bounds, reference point and the objectives included.

    Attributes:
        lower: per-objective minimum used for normalization, or None to skip it.
        upper: per-objective maximum used for normalization.
        reference_point: reference in normalized space, one entry per included
            objective; defaults to 1.1 everywhere.
        dimensions: indices of the objectives taken into account, or None for all.
    """

    lower: tuple[float, ...] | None = None
    upper: tuple[float, ...] | None = None
    reference_point: tuple[float, ...] | None = None
    dimensions: tuple[int, ...] | None = None

    @classmethod
    def from_reference_front(cls, front: ParetoFront | Iterable[Sequence[float]],
                             dimensions: Sequence[int] | None = None,
                             reference: float = 1.1) -> "HvConfig":
        """Bounds taken from the extremes of a (union) reference front."""
        arr = np.asarray(list(front), dtype=float)
        if arr.size == 0:
            raise ValueError("empty reference front")
        dims = tuple(range(arr.shape[1])) if dimensions is None else tuple(dimensions)
        return cls(tuple(arr.min(axis=0)), tuple(arr.max(axis=0)),
                   (reference,) * len(dims), dims)


def normalize(points: np.ndarray, cfg: HvConfig) -> tuple[np.ndarray, tuple[float, ...]]:
    """Select, normalize and clamp; returns points and matching reference point."""
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts.reshape(0, 0) if pts.size == 0 else pts.reshape(1, -1)
    if pts.size:
        width = pts.shape[1]
    elif cfg.lower is not None:
        width = len(cfg.lower)
    else:
        width = len(cfg.reference_point or ())
    dims = list(range(width)) if cfg.dimensions is None else list(cfg.dimensions)
    ref = list(cfg.reference_point) if cfg.reference_point is not None else [1.1] * len(dims)
    if len(ref) != len(dims):
        raise ValueError("reference point does not match the included objectives")
    if cfg.lower is None:
        return pts[:, dims] if pts.size else np.empty((0, len(dims))), tuple(ref)
    keep, keep_ref = [], []
    for i, d in enumerate(dims):
        if cfg.upper[d] > cfg.lower[d]:
            keep.append(d)
            keep_ref.append(ref[i])
        else:
            warnings.warn(f"objective {d} has degenerate bounds and is dropped", stacklevel=3)
    if not pts.size:
        return np.empty((0, len(keep))), tuple(keep_ref)
    lo = np.array([cfg.lower[d] for d in keep])
    hi = np.array([cfg.upper[d] for d in keep])
    out = np.clip((pts[:, keep] - lo) / (hi - lo), 0.0, 1.0)
    return out, tuple(keep_ref)


def hypervolume(front: ParetoFront | Iterable[Sequence[float]], cfg: HvConfig | None = None) -> float:
    """Exact volume dominated by ``front`` and bounded by the reference point.

    Without ``cfg`` the raw objectives are used with reference 1.1 per
    dimension. Computation slices along the last objective and recurses on
    the remaining ones.
    """
    cfg = cfg or HvConfig()
    pts, ref = normalize(np.asarray(list(front), dtype=float), cfg)
    if pts.shape[0] == 0 or not ref:
        return 0.0
    r = np.asarray(ref)
    pts = pts[np.all(pts < r, axis=1)]
    if pts.shape[0] == 0:
        return 0.0
    return _hv(_nondominated(pts), r)


def _nondominated(pts: np.ndarray) -> np.ndarray:
    return np.asarray(pareto_front(pts.tolist()).points, dtype=float).reshape(-1, pts.shape[1])


def _hv(pts: np.ndarray, ref: np.ndarray) -> float:
    d = pts.shape[1]
    if d == 1:
        return float(ref[0] - pts[:, 0].min())
    if d == 2:
        order = pts[np.argsort(pts[:, 0], kind="stable")]
        vol, best = 0.0, ref[1]
        for x, y in order:
            if y < best:
                vol += (ref[0] - x) * (best - y)
                best = y
        return float(vol)
    order = pts[np.argsort(pts[:, -1], kind="stable")]
    vol = 0.0
    for i in range(len(order)):
        z = order[i, -1]
        z_next = order[i + 1, -1] if i + 1 < len(order) else ref[-1]
        if z_next <= z:
            continue
        slab = _nondominated(order[: i + 1, :-1])
        vol += _hv(slab, ref[:-1]) * (z_next - z)
    return float(vol)


# ---------------------------------------------------------------------------
# statistics


def _midranks(values: Sequence[float]) -> list[float]:
    order = sorted(range(len(values)), key=lambda i: values[i])
    ranks = [0.0] * len(values)
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and values[order[j + 1]] == values[order[i]]:
            j += 1
        for k in range(i, j + 1):
            ranks[order[k]] = (i + j) / 2 + 1
        i = j + 1
    return ranks


def u_statistic(a: Sequence[float], b: Sequence[float]) -> float:
    """Mann-Whitney U of ``a`` (number of wins of ``a`` over ``b``, ties halved)."""
    ranks = _midranks(list(a) + list(b))
    return sum(ranks[: len(a)]) - len(a) * (len(a) + 1) / 2


def mann_whitney_u(a: Sequence[float], b: Sequence[float],
                   alternative: Alternative = "greater", exact_limit: int = 16) -> float:
    """One-sided Mann-Whitney U test p-value.

    ``greater`` tests whether ``a`` tends to exceed ``b``. Pooled samples of
    at most ``exact_limit`` values use the exact permutation distribution of
    the (tie-aware) rank sum; larger ones a normal approximation with tie
    correction and continuity correction.

    Raises:
        ValueError: on an empty sample or unknown alternative.
    """
    if not a or not b:
        raise ValueError("samples must be nonempty")
    if alternative not in ("greater", "less"):
        raise ValueError(f"unknown alternative {alternative!r}")
    pooled = list(a) + list(b)
    if len(set(pooled)) == 1:
        return 1.0
    na, nb = len(a), len(b)
    n = na + nb
    if n <= exact_limit:
        return _exact_p(pooled, na, alternative)
    u = u_statistic(a, b)
    ties = sum(t ** 3 - t for t in _tie_sizes(pooled))
    var = na * nb / 12 * ((n + 1) - ties / (n * (n - 1)))
    mu = na * nb / 2
    sd = math.sqrt(var)
    if alternative == "greater":
        z = (u - mu - 0.5) / sd
        return 0.5 * math.erfc(z / math.sqrt(2))
    z = (u - mu + 0.5) / sd
    return 0.5 * math.erfc(-z / math.sqrt(2))


def _tie_sizes(values: Sequence[float]) -> list[int]:
    counts: dict[float, int] = {}
    for v in values:
        counts[v] = counts.get(v, 0) + 1
    return [c for c in counts.values() if c > 1]


def _exact_p(pooled: list[float], na: int, alternative: Alternative) -> float:
    # doubled midranks are integers; count size-na subsets per rank sum
    ranks = [int(round(2 * r)) for r in _midranks(pooled)]
    observed = sum(ranks[:na])
    table: list[dict[int, int]] = [dict() for _ in range(na + 1)]
    table[0][0] = 1
    for r in ranks:
        for k in range(na, 0, -1):
            row = table[k]
            for s, c in table[k - 1].items():
                row[s + r] = row.get(s + r, 0) + c
    dist = table[na]
    total = sum(dist.values())
    if alternative == "greater":
        hits = sum(c for s, c in dist.items() if s >= observed)
    else:
        hits = sum(c for s, c in dist.items() if s <= observed)
    return hits / total


def a12(a: Sequence[float], b: Sequence[float]) -> float:
    """Vargha-Delaney A12: chance that a draw from ``a`` exceeds one from ``b``."""
    if not a or not b:
        raise ValueError("samples must be nonempty")
    wins = ties = 0
    for x in a:
        for y in b:
            if x > y:
                wins += 1
            elif x == y:
                ties += 1
    return (wins + 0.5 * ties) / (len(a) * len(b))


# ---------------------------------------------------------------------------
# run aggregation


def summarize_runs(runs: Sequence[Sequence[Mapping[str, float]]]) -> list[dict[str, float]]:
    """Per-NFE median and sample standard deviation of HV and time across runs.

    Args:
        runs: one row list per run; rows carry ``NFE``, ``HV`` and
            ``TimeSeconds``. All runs must share the same NFE grid.

    Returns:
        Rows keyed by :data:`SUMMARY_COLUMNS`. The SD of a single run is 0.

    Raises:
        ValueError: if the runs' NFE grids differ or there are no runs.
    """
    if not runs:
        raise ValueError("no runs to summarize")
    grid = [int(r["NFE"]) for r in runs[0]]
    for run in runs[1:]:
        if [int(r["NFE"]) for r in run] != grid:
            raise ValueError("runs have misaligned NFE grids")
    out = []
    for i, nfe in enumerate(grid):
        hv = [float(run[i]["HV"]) for run in runs]
        tm = [float(run[i]["TimeSeconds"]) for run in runs]
        out.append({
            "NFE": nfe,
            "HV Median": statistics.median(hv),
            "Time Median (s)": statistics.median(tm),
            "HV SD": statistics.stdev(hv) if len(hv) > 1 else 0.0,
            "Time SD": statistics.stdev(tm) if len(tm) > 1 else 0.0,
        })
    return out
