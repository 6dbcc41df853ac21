"""Packing numbers of finite pseudometric spaces and exact entropy integrals."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError

MAX_EXACT_POINTS = 20


def rms_distance(u: np.ndarray, v: np.ndarray) -> float:
    """sqrt(mean((u - v)^2)), the normalized Euclidean distance."""
    d = np.asarray(u, dtype=float) - np.asarray(v, dtype=float)
    return math.sqrt(float(np.mean(d * d)))


def pairwise_rms(points: np.ndarray) -> np.ndarray:
    P = np.asarray(points, dtype=float)
    diff = P[:, None, :] - P[None, :, :]
    return np.sqrt(np.mean(diff * diff, axis=2))


def distance_matrix(points, metric=None) -> np.ndarray:
    if metric is None:
        return pairwise_rms(np.atleast_2d(points))
    pts = list(points)
    N = len(pts)
    D = np.zeros((N, N))
    for i in range(N):
        for j in range(i + 1, N):
            D[i, j] = D[j, i] = metric(pts[i], pts[j])
    return D


@dataclass
class PackingResult:
    count: int
    witness: list
    exact: bool


def greedy_packing(dist: np.ndarray, u: float) -> PackingResult:
    """Maximal u-separated set built in index order (flagged non-exact)."""
    chosen: list[int] = []
    for i in range(len(dist)):
        if all(dist[i, j] > u for j in chosen):
            chosen.append(i)
    return PackingResult(len(chosen), chosen, False)


def exact_packing(dist: np.ndarray, u: float) -> PackingResult:
    """Maximum u-separated set: a maximum independent set of the graph {d <= u}.

    Branch and bound over bitmasks, include-first in index order; the bound is
    current size plus remaining candidates.
    """
    N = len(dist)
    if N > MAX_EXACT_POINTS:
        raise DomainError(f"exact packing limited to {MAX_EXACT_POINTS} points, got {N}")
    conflict = [0] * N
    for i in range(N):
        for j in range(N):
            if i != j and dist[i, j] <= u:
                conflict[i] |= 1 << j
    best = greedy_packing(dist, u).witness
    best_size = len(best)

    def search(cands: int, chosen: list[int]):
        nonlocal best, best_size
        if len(chosen) + cands.bit_count() <= best_size:
            return
        if cands == 0:
            best, best_size = list(chosen), len(chosen)
            return
        v = (cands & -cands).bit_length() - 1
        chosen.append(v)
        search(cands & ~conflict[v] & ~(1 << v), chosen)
        chosen.pop()
        search(cands & ~(1 << v), chosen)

    search((1 << N) - 1, [])
    return PackingResult(best_size, sorted(best), True)


def packing_number(points, u: float, metric=None, mode: str = "exact") -> PackingResult:
    if not u > 0:
        raise DomainError(f"u must be positive, got {u}")
    dist = distance_matrix(points, metric)
    if mode == "exact":
        return exact_packing(dist, u)
    if mode == "greedy":
        return greedy_packing(dist, u)
    raise DomainError(f"unknown mode {mode!r}")


def distinct_representatives(dist: np.ndarray) -> np.ndarray:
    """Index of the first point at distance 0 from each point."""
    rep = np.arange(len(dist))
    for i in range(len(dist)):
        zero = np.flatnonzero(dist[i, :i] == 0)
        if zero.size:
            rep[i] = rep[zero[0]]
    return rep


@dataclass
class PackingProfile:
    """The step function u -> D(u) on (0, inf).

    ``starts[k]`` opens the interval on which D equals ``counts[k]``; the pieces are
    [0, d_1), [d_1, d_2), ..., [d_r, inf) over the distinct positive distances,
    so D is right-continuous and nonincreasing.
    """

    starts: np.ndarray
    counts: np.ndarray
    exact: bool

    @classmethod
    def from_distances(cls, dist: np.ndarray, mode: str = "auto") -> "PackingProfile":
        dist = np.asarray(dist, dtype=float)
        keep = np.unique(distinct_representatives(dist))
        dist = dist[np.ix_(keep, keep)]
        N = len(dist)
        if mode == "auto":
            mode = "exact" if N <= MAX_EXACT_POINTS else "greedy"
        pack = {"exact": exact_packing, "greedy": greedy_packing}.get(mode)
        if pack is None:
            raise DomainError(f"unknown mode {mode!r}")
        levels = np.unique(dist[np.triu_indices(N, 1)])
        starts, counts = [0.0], [N]
        for u in levels:
            c = 1 if counts[-1] == 1 else pack(dist, float(u)).count
            starts.append(float(u))
            counts.append(c)
        return cls(np.array(starts), np.array(counts, dtype=np.int64), mode == "exact" or N <= 1)

    @classmethod
    def from_points(cls, points, metric=None, mode: str = "auto") -> "PackingProfile":
        return cls.from_distances(distance_matrix(points, metric), mode)

    def __call__(self, u: float) -> int:
        if not u > 0:
            raise DomainError("packing numbers are defined for u > 0")
        return int(self.counts[np.searchsorted(self.starts, u, side="right") - 1])

    def integral(self, lo: float, hi: float) -> float:
        """Integral of sqrt(log D(u)) over [lo, hi], summed piece by piece."""
        if hi <= lo:
            return 0.0
        ends = np.append(self.starts[1:], np.inf)
        width = np.clip(np.minimum(ends, hi) - np.maximum(self.starts, lo), 0.0, None)
        heights = np.sqrt(np.log(self.counts.astype(float)))
        return math.fsum((width * heights).tolist())


def entropy_integral(points, upper: float, metric=None, mode: str = "auto") -> float:
    """Integral of sqrt(log D(u)) for u from 0 to ``upper``."""
    if not upper > 0:
        raise DomainError("upper limit must be positive")
    return PackingProfile.from_points(points, metric, mode).integral(0.0, upper)


def max_profile(profiles) -> PackingProfile:
    """Pointwise maximum of several packing profiles."""
    profiles = list(profiles)
    if not profiles:
        raise DomainError("need at least one profile")
    starts = np.unique(np.concatenate([p.starts for p in profiles]))
    counts = np.max([[p.counts[np.searchsorted(p.starts, s, side="right") - 1] for s in starts] for p in profiles], axis=0)
    return PackingProfile(starts, counts.astype(np.int64), all(p.exact for p in profiles))
