"""Chaining over the data-dependent metric d_{x,y}.

For a fixed pair (x, y) each function is represented by its difference vector
(f(y_i) - f(x_i))_i; identical vectors are merged before any packing or net
construction. All packing numbers below are those of this finite vector set.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from .bounds import haussler_packing_bound, k_beta
from .errors import DomainError
from .mc import run_blocks
from .packing import PackingProfile, pairwise_rms
from .process import FiniteDistribution, FunctionFamily, PairedSample, v_stat


def dxy_metric(f, g, pair: PairedSample) -> float:
    f = np.asarray(f, dtype=float)
    g = np.asarray(g, dtype=float)
    d = f[pair.y] - f[pair.x] - g[pair.y] + g[pair.x]
    return math.sqrt(float(np.mean(d * d)))


@dataclass
class DifferenceSpace:
    """Distinct difference vectors of a family for one pair (x, y)."""

    points: np.ndarray  # (N, n)
    rep: np.ndarray  # family row -> point index
    dist: np.ndarray  # (N, N) d_{x,y}
    zero: int | None
    profile: PackingProfile

    @property
    def n(self) -> int:
        return self.points.shape[1]

    @classmethod
    def build(cls, F: FunctionFamily, pair: PairedSample, mode: str = "auto") -> "DifferenceSpace":
        diffs = pair.differences(F)
        points, rep = np.unique(diffs, axis=0, return_inverse=True)
        rep = np.asarray(rep).ravel()
        # keep first-occurrence order so ties resolve toward the smallest function index
        first = np.array([np.flatnonzero(rep == k)[0] for k in range(len(points))])
        order = np.argsort(first, kind="stable")
        remap = np.empty_like(order)
        remap[order] = np.arange(len(order))
        points, rep = points[order], remap[rep]
        zero_rows = np.flatnonzero(~points.any(axis=1))
        dist = pairwise_rms(points)
        return cls(points, rep, dist, int(zero_rows[0]) if zero_rows.size else None,
                   PackingProfile.from_distances(dist, mode))

    def norms(self) -> np.ndarray:
        return np.sqrt(np.mean(self.points**2, axis=1))


def dyadic_level(d: float) -> int:
    """The integer j with 2^(-j-1) < d <= 2^(-j)."""
    j = math.floor(-math.log2(d))
    while 2.0 ** (-j) < d:
        j -= 1
    while 2.0 ** (-j - 1) >= d:
        j += 1
    return j


@dataclass
class ChainLevel:
    j: int
    net: list
    packing: int  # D(2^-j)
    frozen: bool  # D(2^-j) == D(2^-j+1): the level the proof collapses to {0}
    delta_pairs: list  # (g, h): g in F_j, h in F_{j-1}, d(g, h) <= 2^(-j+2)
    used_pairs: list  # distinct (pi_j(f), pi_{j-1}(f))
    integral: float  # I_j

    @property
    def radius(self) -> float:
        return 2.0 ** (-self.j)


@dataclass
class ChainingStructure:
    space: DifferenceSpace
    j0: int | None
    levels: list = field(default_factory=list)
    projections: dict = field(default_factory=dict)  # point -> {j: point}
    K: float = 0.0
    p: float = 0.0

    @property
    def n(self) -> int:
        return self.space.n

    def level(self, j: int) -> ChainLevel:
        return self.levels[j - self.j0]

    def delta_size(self, j: int) -> int:
        """|Delta_j| counted as distinct difference vectors g - h."""
        lv = self.level(j)
        P = self.space.points
        if not lv.delta_pairs:
            return 0
        return len(np.unique(np.array([P[g] - P[h] for g, h in lv.delta_pairs]), axis=0))

    def chain(self, point: int) -> list:
        """[pi_{j0-1}(f), pi_{j0}(f), ..., pi_J(f)] for a point index."""
        if self.j0 is None:
            return [point]
        return [self.space.zero] + [self.projections[point][lv.j] for lv in self.levels]

    def to_dict(self) -> dict:
        return {
            "j0": self.j0,
            "K": self.K,
            "p": self.p,
            "n": self.n,
            "exact_packing": bool(self.space.profile.exact),
            "zero": self.space.zero,
            "points": self.space.points.tolist(),
            "function_to_point": self.space.rep.tolist(),
            "levels": [
                {
                    "j": lv.j,
                    "radius": lv.radius,
                    "net": lv.net,
                    "packing": lv.packing,
                    "frozen": lv.frozen,
                    "delta_pairs": [list(p) for p in lv.delta_pairs],
                    "used_pairs": [list(p) for p in lv.used_pairs],
                    "I_j": lv.integral,
                }
                for lv in self.levels
            ],
            "projections": {str(k): {str(j): v for j, v in d.items()} for k, d in self.projections.items()},
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def build_chaining(F: FunctionFamily, pair: PairedSample, beta: float = 0.5, mode: str = "auto") -> ChainingStructure:
    """Nested dyadic nets, projections and level integrals for one pair (x, y).

    Nets grow by farthest-point insertion from {0}; the last level is the first
    whose net holds every distinct point. Projections: 0 up to the dyadic level
    of |f|, f itself at the last level, the next level's projection when two
    consecutive nets coincide, otherwise the nearest net point.
    """
    F.require_zero()
    space = DifferenceSpace.build(F, pair, mode)
    p, K = k_beta(beta)
    st = ChainingStructure(space, None, K=K, p=p)
    N = len(space.points)
    if N == 1:
        return st
    dist, z, prof, n = space.dist, space.zero, space.profile, space.n
    j0 = dyadic_level(float(dist.max())) + 1  # first j with 2^-j < diameter
    st.j0 = j0

    nets = []
    net = [z]
    j = j0
    while True:
        r = 2.0**-j
        net = list(net)
        while True:
            gap = dist[:, net].min(axis=1)
            far = int(np.argmax(gap))
            if gap[far] <= r:
                break
            net.append(far)
        nets.append(net)
        if len(net) == N:
            break
        j += 1
    J = j0 + len(nets) - 1

    norms = space.norms()
    proj = {}
    for q in range(N):
        chain = {}
        jq = dyadic_level(float(norms[q])) if q != z else math.inf
        for k in range(J, j0 - 1, -1):
            if q == z or k <= jq:
                chain[k] = z
            elif k == J:
                chain[k] = q
            elif len(nets[k - j0]) == len(nets[k + 1 - j0]):
                chain[k] = chain[k + 1]
            else:
                members = np.array(sorted(nets[k - j0]))
                chain[k] = int(members[np.argmin(dist[q, members])])
        proj[q] = dict(sorted(chain.items()))
    st.projections = proj

    prev_net = [z]
    for idx, net in enumerate(nets):
        j = j0 + idx
        r = 2.0**-j
        pairs = [(g, h) for g in net for h in prev_net if dist[g, h] <= 4.0 * r]
        used = sorted({(proj[q][j], proj[q][j - 1] if j > j0 else z) for q in range(N)})
        st.levels.append(
            ChainLevel(
                j=j,
                net=list(net),
                packing=prof(r),
                frozen=prof(r) == prof(2.0 * r),
                delta_pairs=pairs,
                used_pairs=used,
                integral=prof.integral(r / 2.0, r) / math.sqrt(n),
            )
        )
        prev_net = net
    return st


def check_chaining(st: ChainingStructure, tol: float = 1e-12) -> list:
    """Every violated structural invariant, as human-readable strings."""
    bad = []
    if st.j0 is None:
        return bad
    space = st.space
    dist, z, P = space.dist, space.zero, space.points
    prev = {z}
    for lv in st.levels:
        r = lv.radius
        net = set(lv.net)
        if not prev <= net:
            bad.append(f"level {lv.j}: nets not nested")
        for a in lv.net:
            for b in lv.net:
                if a < b and not dist[a, b] > r:
                    bad.append(f"level {lv.j}: net points {a},{b} not separated")
        if np.any(dist[:, lv.net].min(axis=1) > r):
            bad.append(f"level {lv.j}: net does not cover")
        if len(lv.net) > lv.packing:
            bad.append(f"level {lv.j}: net larger than D(2^-j)")
        if st.delta_size(lv.j) > len(lv.net) ** 2:
            bad.append(f"level {lv.j}: |Delta_j| > |F_j|^2")
        if space.profile.exact:
            lhs = math.sqrt(st.n) * lv.integral / (r / 2.0)
            if lhs < math.sqrt(math.log(lv.packing)) - tol:
                bad.append(f"level {lv.j}: level integral below sqrt(log D(2^-j))")
        prev = net
    for q in range(len(P)):
        ch = st.chain(q)
        if ch[-1] != q or ch[0] != z:
            bad.append(f"point {q}: chain does not run from 0 to f")
        for k, (a, b) in enumerate(zip(ch[:-1], ch[1:])):
            j = st.j0 + k
            if dist[a, b] > 2.0 ** (-j + 2) + tol:
                bad.append(f"point {q}: step at level {j} too long")
            if dist[q, b] > 2.0 ** (-j) + tol:
                bad.append(f"point {q}: projection at level {j} too far")
            if b not in st.level(j).net:
                bad.append(f"point {q}: projection at level {j} outside the net")
        total = np.sum([P[b] - P[a] for a, b in zip(ch[:-1], ch[1:])], axis=0)
        if np.max(np.abs(total - P[q])) > 1e-12:
            bad.append(f"point {q}: telescoping sum differs from f")
    return bad


@dataclass
class PhiValues:
    values: np.ndarray  # one per family row
    K: float
    p: float
    exact: bool


def phi_functional(F: FunctionFamily, pair: PairedSample, beta: float = 0.5, K: float | None = None,
                   space: DifferenceSpace | None = None) -> PhiValues:
    """K n^(-1/2) times the entropy integral of d_{x,y} up to sqrt(W f)/2, per function."""
    F.require_zero()
    space = space or DifferenceSpace.build(F, pair)
    p, Kb = k_beta(beta)
    K = Kb if K is None else K
    norms = space.norms()
    vals = np.array([space.profile.integral(0.0, norms[q]) for q in range(len(space.points))])
    vals = K / math.sqrt(space.n) * vals
    return PhiValues(vals[space.rep], K, p, bool(space.profile.exact))


@dataclass
class PhiCheck:
    probability: float
    margin: float
    verdict: str  # holds | fails | inconclusive
    mode: str
    exact_packing: bool
    trials: int


def _violation(diffs: np.ndarray, phi: np.ndarray, eps: np.ndarray, signs: str) -> np.ndarray:
    e = eps.astype(float)
    if signs == "rademacher":
        e = 2.0 * e - 1.0
    R = e @ diffs.T / diffs.shape[1]
    return np.any(R - phi[None, :] > 0, axis=1)


def phi_condition_check(
    F: FunctionFamily,
    pair: PairedSample,
    beta: float = 0.5,
    trials: int = 100_000,
    seed: int = 0,
    budget: int = 2**20,
    signs: str = "rademacher",
    K: float | None = None,
    workers: int = 1,
) -> PhiCheck:
    """Probability over eps that some f has R_n f - Phi(f) > 0, against 1 - beta.

    Exhaustive over {0,1}^n when 2^n <= budget, otherwise Monte Carlo with a
    one-sided Hoeffding margin at level 1e-3. ``signs`` selects the multiplier
    of coordinate i: 2 eps_i - 1 ("rademacher") or eps_i ("bernoulli").
    """
    if signs not in ("rademacher", "bernoulli"):
        raise DomainError(f"unknown sign convention {signs!r}")
    space = DifferenceSpace.build(F, pair)
    phi = phi_functional(F, pair, beta, K, space)
    live = np.flatnonzero(pair.differences(F).any(axis=1))
    diffs = pair.differences(F)[live]
    vals = phi.values[live]
    n = pair.n
    target = 1.0 - beta
    if live.size == 0:
        return PhiCheck(0.0, 0.0, "holds", "exact", phi.exact, 0)
    if 2**n <= budget:
        hits = 0
        for start in range(0, 2**n, 65536):
            idx = np.arange(start, min(2**n, start + 65536), dtype=np.int64)
            eps = (idx[:, None] >> np.arange(n - 1, -1, -1)) & 1
            hits += int(np.count_nonzero(_violation(diffs, vals, eps, signs)))
        prob = hits / 2.0**n
        return PhiCheck(prob, 0.0, "holds" if prob < target else "fails", "exact", phi.exact, 2**n)

    def block(rng, size):
        eps = rng.integers(0, 2, size=(size, n))
        return _violation(diffs, vals, eps, signs)

    hits = run_blocks(block, trials, seed, workers=workers)
    prob = float(np.mean(hits))
    margin = math.sqrt(math.log(1e3) / (2.0 * trials))
    if prob + margin < target:
        verdict = "holds"
    elif prob - margin >= target:
        verdict = "fails"
    else:
        verdict = "inconclusive"
    return PhiCheck(prob, margin, verdict, "mc", phi.exact, trials)


# --- uniform entropy bound ---------------------------------------------------


def haussler_profile(d: int):
    """u -> e (d+1) (2e/u^2)^d as a uniform packing function."""
    return lambda u: haussler_packing_bound(d, u)


def l2_profile(F: FunctionFamily, q, mode: str = "auto") -> PackingProfile:
    """Packing profile of the family in L2(Q) for a discrete measure ``q`` on the ground space."""
    q = np.asarray(q, dtype=float)
    V = F.values
    diff = V[:, None, :] - V[None, :, :]
    dist = np.sqrt(np.einsum("ijm,m->ij", diff * diff, q))
    return PackingProfile.from_distances(dist, mode)


def _sqrt_log_integral(packing, upper: float) -> float:
    if upper <= 0:
        return 0.0
    if isinstance(packing, PackingProfile):
        return packing.integral(0.0, upper)
    val, _ = integrate.quad(lambda u: math.sqrt(max(math.log(packing(u)), 0.0)), 0.0, upper, limit=200)
    return val


def uniform_entropy_phi_bound(F: FunctionFamily, x, mu: FiniteDistribution, beta: float = 0.5,
                              uniform_packing=None, K: float | None = None) -> np.ndarray:
    """2 K n^(-1/2) times the integral of sqrt(log D(u)) up to sqrt(V f)/4, per function.

    ``uniform_packing`` is a :class:`PackingProfile` or a callable u -> D(u); both must
    be nonincreasing and dominate the L2(Q) packing numbers of the family.
    """
    if uniform_packing is None:
        if F.vc_dim is None:
            raise DomainError("need uniform_packing or a declared vc_dim")
        uniform_packing = haussler_profile(F.vc_dim)
    _, Kb = k_beta(beta)
    K = Kb if K is None else K
    x = np.asarray(x)
    out = np.empty(F.size)
    for i, f in enumerate(F.values):
        upper = math.sqrt(v_stat(f, x, mu)) / 4.0
        out[i] = 2.0 * K / math.sqrt(x.size) * _sqrt_log_integral(uniform_packing, upper)
    return out
