"""Convex-hull distance on the discrete cube {0,1}^n and its tail inequalities.

Bit strings are uint8 arrays; events are deduplicated (k, n) arrays. Cube points
are also indexed by the integer whose binary expansion (most significant bit
first) spells the string, which is the enumeration order used throughout.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
import numpy as np

from .errors import DomainError
from .minnorm import min_norm_point

MAX_DIM = 24
MAX_EXHAUSTIVE_DIM = 12


def parse_bits(s) -> np.ndarray:
    if isinstance(s, str):
        if not s or set(s) - {"0", "1"}:
            raise DomainError(f"not a 0/1 string: {s!r}")
        return np.frombuffer(s.encode(), dtype=np.uint8) - ord("0")
    a = np.asarray(s, dtype=np.uint8).ravel()
    if np.any(a > 1):
        raise DomainError("bit strings must contain only 0 and 1")
    return a


def bits_to_str(bits) -> str:
    return "".join("1" if b else "0" for b in np.asarray(bits).ravel())


def all_bitstrings(n: int) -> np.ndarray:
    """All 2^n strings as rows, in integer order."""
    idx = np.arange(2**n, dtype=np.int64)
    shifts = np.arange(n - 1, -1, -1, dtype=np.int64)
    return ((idx[:, None] >> shifts) & 1).astype(np.uint8)


@dataclass(frozen=True)
class CubeEvent:
    members: np.ndarray

    def __post_init__(self):
        m = np.atleast_2d(np.asarray(self.members, dtype=np.uint8))
        if m.size == 0 or m.shape[0] == 0:
            raise DomainError("event must be nonempty")
        if np.any(m > 1):
            raise DomainError("members must be 0/1 strings")
        if m.shape[1] > MAX_DIM:
            raise DomainError(f"cube dimension {m.shape[1]} exceeds {MAX_DIM}")
        if len(np.unique(m, axis=0)) != len(m):
            raise DomainError("duplicate members in event")
        object.__setattr__(self, "members", m)

    @property
    def n(self) -> int:
        return self.members.shape[1]

    def __len__(self):
        return len(self.members)

    def probability(self) -> float:
        return len(self) / 2.0**self.n

    def contains(self, eps) -> bool:
        return bool(np.any(np.all(self.members == np.asarray(eps, dtype=np.uint8), axis=1)))

    @classmethod
    def from_strings(cls, strings) -> "CubeEvent":
        rows = [parse_bits(s) for s in strings]
        if len({len(r) for r in rows}) > 1:
            raise DomainError("members have unequal lengths")
        return cls(np.array(rows, dtype=np.uint8))

    def to_json(self) -> str:
        return json.dumps([bits_to_str(r) for r in self.members])

    @classmethod
    def from_json(cls, text: str) -> "CubeEvent":
        data = json.loads(text)
        if not isinstance(data, list):
            raise DomainError("event JSON must be a list of 0/1 strings")
        return cls.from_strings(data)


def _check_dim(A: CubeEvent, eps: np.ndarray):
    if eps.shape != (A.n,):
        raise DomainError(f"bit string of length {eps.size} does not match cube dimension {A.n}")


def disagreements(A: CubeEvent, eps) -> np.ndarray:
    """Indicator vectors 1(eps_i != eps'_i), one row per eps' in A."""
    eps = parse_bits(eps)
    _check_dim(A, eps)
    return (A.members != eps).astype(np.uint8)


def u_set(A: CubeEvent, eps) -> np.ndarray:
    """U_A(eps) materialized as rows (exponential in n; definitional use only)."""
    D = disagreements(A, eps)
    S = all_bitstrings(A.n)
    # s is in U iff s >= some disagreement indicator coordinatewise
    covers = np.all(S[:, None, :] >= D[None, :, :], axis=2).any(axis=1)
    return S[covers]


def minimal_rows(D: np.ndarray) -> np.ndarray:
    """Rows of a 0/1 matrix not dominating any other row (duplicates collapsed)."""
    D = np.unique(D, axis=0)
    if len(D) <= 1:
        return D
    sub = np.all(D[:, None, :] >= D[None, :, :], axis=2)  # sub[i, j]: D_i >= D_j
    np.fill_diagonal(sub, False)
    return D[~sub.any(axis=1)]


@dataclass
class ConvexDistanceResult:
    fc: float
    fc2: float
    point: np.ndarray
    generators: np.ndarray
    witness: np.ndarray
    certificate_gap: float


def convex_distance(A: CubeEvent, eps, reduce: bool = True) -> ConvexDistanceResult:
    """f_c(A, eps): distance from 0 to conv U_A(eps).

    Every member of U dominates some disagreement indicator coordinatewise with
    nonnegative entries, so the hull minimum is attained on conv of the indicators
    (of the minimal ones when ``reduce``).
    """
    D = disagreements(A, eps)
    G = minimal_rows(D) if reduce else D
    if not G.any(axis=1).all():
        z = np.zeros(A.n)
        w = np.zeros(len(G))
        w[int(np.argmin(G.sum(axis=1)))] = 1.0
        return ConvexDistanceResult(0.0, 0.0, z, G, w, 0.0)
    res = min_norm_point(G)
    fc2 = float(res.point @ res.point)
    return ConvexDistanceResult(math.sqrt(fc2), fc2, res.point, G, res.weights, res.gap)


def _masks(rows: np.ndarray) -> np.ndarray:
    n = rows.shape[1]
    weights = 1 << np.arange(n - 1, -1, -1, dtype=np.int64)
    return rows.astype(np.int64) @ weights


def _mask_rows(masks: np.ndarray, n: int) -> np.ndarray:
    shifts = np.arange(n - 1, -1, -1, dtype=np.int64)
    return ((masks[:, None] >> shifts) & 1).astype(np.uint8)


def minimal_masks(masks: np.ndarray, n: int) -> np.ndarray:
    """Minimal elements (under inclusion) of a set of n-bit masks.

    A subset-sum transform marks every mask that contains a member; a member is
    minimal iff no mask obtained by clearing one of its bits is marked.
    """
    present = np.zeros(2**n, dtype=bool)
    present[masks] = True
    below = present.copy()
    for i in range(n):
        bit = 1 << i
        view = below.reshape(-1, 2, bit)
        view[:, 1, :] |= view[:, 0, :]
    members = np.flatnonzero(present)
    proper = np.zeros(members.size, dtype=bool)
    for i in range(n):
        bit = 1 << i
        has = (members & bit) != 0
        proper[has] |= below[members[has] ^ bit]
    return members[~proper]


def convex_distances_all(A: CubeEvent, return_gaps: bool = False):
    """f_c^2(A, eps) for every eps in {0,1}^n (integer order).

    With ``return_gaps`` also returns the optimality certificate of every solve
    (0 for points of A).
    """
    n = A.n
    if n > MAX_EXHAUSTIVE_DIM:
        raise DomainError(f"exhaustive scan limited to n <= {MAX_EXHAUSTIVE_DIM}")
    members = _masks(A.members)
    out = np.zeros(2**n)
    gaps = np.zeros(2**n)
    inside = np.zeros(2**n, dtype=bool)
    inside[members] = True
    for e in np.flatnonzero(~inside):
        G = _mask_rows(minimal_masks(members ^ e, n), n)
        res = min_norm_point(G)
        out[e] = float(res.point @ res.point)
        gaps[e] = res.gap
    return (out, gaps) if return_gaps else out


@dataclass
class VerificationReport:
    name: str
    rows: list = field(default_factory=list)  # dicts with t, lhs, rhs, slack
    ok: bool = True
    worst_slack: float = math.inf
    info: dict = field(default_factory=dict)

    def add(self, t: float, lhs: float, rhs: float, tol: float = 1e-12, **extra):
        slack = rhs - lhs
        self.rows.append({"t": t, "lhs": lhs, "rhs": rhs, "slack": slack, **extra})
        self.worst_slack = min(self.worst_slack, slack)
        if slack < -tol:
            self.ok = False


def prop1_rhs(p_a: float, alpha: float, t: float) -> float:
    return p_a ** (-alpha) * math.exp(-alpha * t / (alpha + 1.0))


def prop1_verify(A: CubeEvent, alpha: float, t_grid, fc2=None, tol: float = 1e-12) -> VerificationReport:
    """Exact check of P(f_c^2 >= t) <= P(A)^-alpha exp(-alpha t / (alpha + 1)).

    ``fc2`` may carry a precomputed :func:`convex_distances_all` scan. Values within
    1e-9 below a threshold are counted as reaching it, which only enlarges the left side.
    """
    if not alpha > 0:
        raise DomainError("alpha must be positive")
    if fc2 is None:
        fc2 = convex_distances_all(A)
    p_a = A.probability()
    rep = VerificationReport("prop1", info={"n": A.n, "size": len(A), "P(A)": p_a, "alpha": alpha})
    for t in t_grid:
        lhs = float(np.count_nonzero(fc2 >= t - 1e-9)) / fc2.size
        rep.add(float(t), lhs, prop1_rhs(p_a, alpha, float(t)), tol)
    return rep


def control_points(A: CubeEvent, eps, lam, t: float, slack: float = 1e-9):
    """Find eps' in A with sum lam_i 1(eps'_i != eps_i) <= sqrt(t sum lam_i^2).

    Returns ``(eps', lhs, rhs)``; the minimizing member is chosen (smallest index on ties).
    """
    eps = parse_bits(eps)
    lam = np.asarray(lam, dtype=float).ravel()
    if lam.shape != (A.n,):
        raise DomainError("lambda has the wrong length")
    if np.any(lam < 0):
        raise DomainError("lambda must be nonnegative")
    dist = convex_distance(A, eps)
    if dist.fc2 > t + slack:
        raise DomainError(f"f_c^2 = {dist.fc2} exceeds t = {t}")
    costs = disagreements(A, eps) @ lam
    k = int(np.argmin(costs))
    rhs = math.sqrt(max(t, 0.0) * float(lam @ lam))
    if costs[k] > rhs + slack * max(1.0, rhs):
        raise AssertionError(f"no control point found: best {costs[k]} > {rhs}")
    return A.members[k].copy(), float(costs[k]), rhs


@dataclass(frozen=True)
class AffineSupFunctional:
    """eps -> max_f (offsets_f + sign * <eps, slopes_f>)."""

    offsets: np.ndarray
    slopes: np.ndarray
    sign: int = 1

    def __post_init__(self):
        c = np.asarray(self.offsets, dtype=float).ravel()
        s = np.atleast_2d(np.asarray(self.slopes, dtype=float))
        if c.size == 0 or s.shape[0] != c.size:
            raise DomainError("need one slope vector per offset and at least one function")
        if self.sign not in (1, -1):
            raise DomainError("sign must be +1 or -1")
        object.__setattr__(self, "offsets", c)
        object.__setattr__(self, "slopes", s)

    @property
    def n(self) -> int:
        return self.slopes.shape[1]

    def __call__(self, eps) -> float:
        return sup_affine_eval(self, eps)

    def evaluate_all(self, eps_rows: np.ndarray) -> np.ndarray:
        vals = self.offsets[None, :] + self.sign * (np.asarray(eps_rows, dtype=float) @ self.slopes.T)
        return vals.max(axis=1)

    def lipschitz_bound(self) -> float:
        return math.sqrt(float(np.max(np.einsum("ij,ij->i", self.slopes, self.slopes))))

    def complement(self) -> "AffineSupFunctional":
        """eps -> Phi(1 - eps): offsets c_f + sign * sum_i f_i and opposite sign."""
        return AffineSupFunctional(self.offsets + self.sign * self.slopes.sum(axis=1), self.slopes, -self.sign)

    @classmethod
    def from_pair(cls, values: np.ndarray, x, y):
        """(Phi, Phi') built from two samples: c_f = sum f(y_i), c'_f = sum f(x_i), f_i = f(x_i) - f(y_i)."""
        values = np.asarray(values, dtype=float)
        fx, fy = values[:, np.asarray(x)], values[:, np.asarray(y)]
        slopes = fx - fy
        return cls(fy.sum(axis=1), slopes, 1), cls(fx.sum(axis=1), slopes, -1)


def sup_affine_eval(F: AffineSupFunctional, eps) -> float:
    eps = np.asarray(eps, dtype=float).ravel()
    if eps.shape != (F.n,):
        raise DomainError("bit string length does not match the functional")
    return float(np.max(F.offsets + F.sign * (F.slopes @ eps)))


def exact_median(values: np.ndarray, probs: np.ndarray | None = None) -> float:
    """Smallest m in the support with P(X <= m) >= 1/2."""
    values = np.asarray(values, dtype=float)
    probs = np.full(values.size, 1.0 / values.size) if probs is None else np.asarray(probs, dtype=float)
    order = np.argsort(values, kind="stable")
    cum = np.cumsum(probs[order])
    k = int(np.searchsorted(cum, 0.5 - 1e-15))
    return float(values[order][k])


def star_rhs(alpha: float, t: float) -> float:
    return 2.0**alpha * math.exp(-alpha * t / (alpha + 1.0))


def star_tails_verify(F: AffineSupFunctional, alpha: float, t_grid, tol: float = 1e-12) -> VerificationReport:
    """Exact check of both convex-Lipschitz tails about the median.

    P(F >= M + L sqrt t) and P(F <= M - L sqrt t) are each compared with
    2^alpha exp(-alpha t / (alpha + 1)). With L = 0 the events are read in the
    strict sense (F > M, F < M), the only reading under which a constant is covered.
    """
    if not alpha > 0:
        raise DomainError("alpha must be positive")
    if F.n > MAX_EXHAUSTIVE_DIM:
        raise DomainError(f"exhaustive scan limited to n <= {MAX_EXHAUSTIVE_DIM}")
    vals = F.evaluate_all(all_bitstrings(F.n))
    M = exact_median(vals)
    L = F.lipschitz_bound()
    scale = max(1.0, float(np.max(np.abs(vals))))
    eta = 1e-12 * scale
    rep = VerificationReport("star", info={"n": F.n, "median": M, "lipschitz": L, "alpha": alpha})
    for t in t_grid:
        t = float(t)
        r = L * math.sqrt(t)
        if r > 0:
            up = np.count_nonzero(vals >= M + r - eta)
            lo = np.count_nonzero(vals <= M - r + eta)
        else:
            up = np.count_nonzero(vals > M + eta)
            lo = np.count_nonzero(vals < M - eta)
        rhs = star_rhs(alpha, t)
        rep.add(t, up / vals.size, rhs, tol, tail="upper")
        rep.add(t, lo / vals.size, rhs, tol, tail="lower")
    return rep
