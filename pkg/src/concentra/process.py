"""Finite-support empirical processes.

The ground space is {0, ..., m-1}. A family is a (k, m) table of function values,
a sample is an integer vector of ground-point indices. Single functions are passed
as rows of that table.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass
from itertools import combinations_with_replacement
from typing import Iterator, NamedTuple

import numpy as np
from scipy.special import gammaln

from .errors import DomainError

DEFAULT_BUDGET = 2_000_000


def default_budget() -> int:
    """Enumeration atom budget; ``CONCENTRA_BUDGET`` overrides the default."""
    raw = os.environ.get("CONCENTRA_BUDGET")
    if raw is None:
        return DEFAULT_BUDGET
    try:
        value = int(float(raw))
    except ValueError:
        raise DomainError(f"CONCENTRA_BUDGET is not a number: {raw!r}") from None
    if value < 1:
        raise DomainError("CONCENTRA_BUDGET must be positive")
    return value


@dataclass(frozen=True)
class FiniteDistribution:
    probs: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=float).ravel()
        if p.size == 0 or np.any(p < 0) or abs(p.sum() - 1.0) > 1e-12:
            raise DomainError("probs must be a nonempty nonnegative vector summing to 1")
        object.__setattr__(self, "probs", p)

    @property
    def m(self) -> int:
        return self.probs.size

    @classmethod
    def uniform(cls, m: int) -> "FiniteDistribution":
        return cls(np.full(m, 1.0 / m))


@dataclass(frozen=True)
class FunctionFamily:
    values: np.ndarray
    bound_b: float | None = None
    vc_dim: int | None = None

    def __post_init__(self):
        v = np.atleast_2d(np.asarray(self.values, dtype=float))
        if v.size == 0:
            raise DomainError("family must contain at least one function")
        if not np.all(np.isfinite(v)):
            raise DomainError("function values must be finite")
        if self.bound_b is not None:
            if not self.bound_b > 0:
                raise DomainError("bound_b must be positive")
            if np.max(np.abs(v)) > self.bound_b + 1e-12:
                raise DomainError(f"values exceed the declared bound b = {self.bound_b}")
        if self.vc_dim is not None and self.vc_dim < 1:
            raise DomainError("vc_dim must be a positive integer")
        object.__setattr__(self, "values", v)

    @property
    def size(self) -> int:
        return self.values.shape[0]

    @property
    def m(self) -> int:
        return self.values.shape[1]

    def zero_index(self) -> int | None:
        rows = np.flatnonzero(~self.values.any(axis=1))
        return int(rows[0]) if rows.size else None

    def require_zero(self):
        if self.zero_index() is None:
            raise DomainError("family must contain the zero function")

    def sup_abs(self) -> float:
        return float(np.max(np.abs(self.values)))


def _points(x, m: int | None = None) -> np.ndarray:
    a = np.asarray(x, dtype=np.int64).ravel()
    if a.size == 0:
        raise DomainError("sample is empty")
    if np.any(a < 0) or (m is not None and np.any(a >= m)):
        raise DomainError("sample index outside the ground space")
    return a


@dataclass(frozen=True)
class PairedSample:
    x: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        x, y = _points(self.x), _points(self.y)
        if x.shape != y.shape:
            raise DomainError("paired samples must have equal length")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)

    @property
    def n(self) -> int:
        return self.x.size

    def swapped(self, mask) -> "PairedSample":
        """Exchange x_i and y_i wherever ``mask`` is true."""
        mask = np.asarray(mask, dtype=bool)
        return PairedSample(np.where(mask, self.y, self.x), np.where(mask, self.x, self.y))

    def differences(self, F: FunctionFamily) -> np.ndarray:
        """(k, n) table of f(y_i) - f(x_i)."""
        return F.values[:, self.y] - F.values[:, self.x]


# --- exact enumeration of product measures ---------------------------------


def product_atoms(probs, n: int, budget: int | None = None, chunk: int = 65536) -> Iterator[tuple]:
    """Yield (points, weights) chunks covering Omega^n in lexicographic order."""
    probs = np.asarray(probs, dtype=float)
    m = probs.size
    budget = default_budget() if budget is None else budget
    total = m**n
    if total > budget:
        raise DomainError(f"exact enumeration needs {m}^{n} = {total} atoms > budget {budget}; use mc mode")
    radix = m ** np.arange(n - 1, -1, -1, dtype=np.int64)
    for start in range(0, total, chunk):
        idx = np.arange(start, min(total, start + chunk), dtype=np.int64)
        pts = (idx[:, None] // radix) % m
        yield pts, np.prod(probs[pts], axis=1)


def multiset_atoms(probs, n: int, budget: int | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Sorted representatives of Omega^n modulo coordinate permutations.

    Exact for statistics symmetric in the coordinates; each representative carries
    its multinomial probability.
    """
    probs = np.asarray(probs, dtype=float)
    m = probs.size
    budget = default_budget() if budget is None else budget
    if math.comb(n + m - 1, n) > budget:
        raise DomainError("multiset enumeration exceeds the budget; use mc mode")
    reps = np.array(list(combinations_with_replacement(range(m), n)), dtype=np.int64).reshape(-1, n)
    counts = np.stack([(reps == j).sum(axis=1) for j in range(m)], axis=1)
    logw = gammaln(n + 1) - gammaln(counts + 1).sum(axis=1)
    logp = counts @ np.log(np.where(probs > 0, probs, 1.0))
    w = np.exp(logw + logp)
    w[np.any((counts > 0) & (probs[None, :] == 0), axis=1)] = 0.0
    return reps, w


# --- functionals -----------------------------------------------------------


def z_value(F: FunctionFamily, x) -> float:
    """Z(x) = max_f sum_i f(x_i)."""
    return float(np.max(F.values[:, _points(x, F.m)].sum(axis=1)))


def z_values(F: FunctionFamily, X: np.ndarray) -> np.ndarray:
    """Z for every row of X."""
    return F.values[:, X].sum(axis=2).max(axis=0)


def uniform_w(F: FunctionFamily, pair: PairedSample) -> float:
    """max_f sum_i (f(x_i) - f(y_i))^2 (unnormalized)."""
    d = pair.differences(F)
    return float(np.max(np.einsum("ij,ij->i", d, d)))


class Estimate(NamedTuple):
    value: float
    stderr: float


def _sup_sq_dist(F: FunctionFamily, x: np.ndarray, Y: np.ndarray) -> np.ndarray:
    diff = F.values[:, Y] - F.values[:, x][:, None, :]
    return np.einsum("kcn,kcn->kc", diff, diff).max(axis=0)


def uniform_v(
    F: FunctionFamily,
    x,
    mu: FiniteDistribution,
    mode: str = "exact",
    budget: int | None = None,
    trials: int = 100_000,
    seed: int = 0,
) -> Estimate:
    """V(x) = E_y max_f sum_i (f(x_i) - f(y_i))^2."""
    x = _points(x, F.m)
    if mode == "exact":
        total = 0.0
        for Y, w in product_atoms(mu.probs, x.size, budget):
            total += float(w @ _sup_sq_dist(F, x, Y))
        return Estimate(total, 0.0)
    if mode == "mc":
        rng = np.random.default_rng(seed)
        Y = rng.choice(mu.m, size=(trials, x.size), p=mu.probs)
        vals = _sup_sq_dist(F, x, Y)
        return Estimate(float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(trials)) if trials > 1 else math.inf)
    raise DomainError(f"unknown mode {mode!r}")


def w_stat(f, pair: PairedSample) -> float:
    """(4/n) sum_i (f(y_i) - f(x_i))^2 for a single function row."""
    f = np.asarray(f, dtype=float)
    d = f[pair.y] - f[pair.x]
    return 4.0 * float(d @ d) / pair.n


@dataclass(frozen=True)
class Moments:
    pf: float
    pnf: float
    var: float
    var_n: float

    @property
    def q_n(self) -> tuple[float, float]:
        """(Pf - P_n f, P_n f - Pf)."""
        return self.pf - self.pnf, self.pnf - self.pf


def moments(f, x, mu: FiniteDistribution) -> Moments:
    f = np.asarray(f, dtype=float)
    x = _points(x, f.size)
    pf = float(mu.probs @ f)
    fx = f[x]
    pnf = float(fx.mean())
    return Moments(pf, pnf, float(mu.probs @ (f - pf) ** 2), float(np.mean((fx - pnf) ** 2)))


def v_stat(f, x, mu: FiniteDistribution) -> float:
    """E_y W(f, x, y) in closed form: 4 (Var f + Var_n f + (Pf - P_n f)^2)."""
    mo = moments(f, x, mu)
    return 4.0 * (mo.var + mo.var_n + (mo.pf - mo.pnf) ** 2)


def v_stat_enumerated(f, x, mu: FiniteDistribution, budget: int | None = None) -> float:
    """E_y W(f, x, y) by summing over every y in Omega^n."""
    f = np.asarray(f, dtype=float)
    x = _points(x, f.size)
    total = 0.0
    for Y, w in product_atoms(mu.probs, x.size, budget):
        d = f[Y] - f[x][None, :]
        total += float(w @ (4.0 / x.size * np.einsum("cn,cn->c", d, d)))
    return total


def s_n(f, pair: PairedSample) -> float:
    """(1/n) sum_i (f(y_i) - f(x_i))."""
    f = np.asarray(f, dtype=float)
    return float(np.mean(f[pair.y] - f[pair.x]))


def r_n(f, pair: PairedSample, eps) -> float:
    """(1/n) sum_i eps_i (f(y_i) - f(x_i)) with eps in {0,1}^n."""
    f = np.asarray(f, dtype=float)
    eps = np.asarray(eps, dtype=float).ravel()
    if eps.shape != (pair.n,):
        raise DomainError("eps length must equal the sample size")
    return float(np.mean(eps * (f[pair.y] - f[pair.x])))


def rademacher_r_n(f, pair: PairedSample, eps) -> float:
    """Same sum with signs 2 eps_i - 1: the law of S_n f under random coordinate swaps."""
    eps = np.asarray(eps, dtype=float).ravel()
    return 2.0 * r_n(f, pair, eps) - s_n(f, pair)


# --- generators and serialization ------------------------------------------


def family_generators(kind: str, m: int, seed: int = 0, **params) -> FunctionFamily:
    """Build a test family on the grid {0, ..., m-1}.

    threshold: zero plus 1(w <= theta) for every grid theta (VC dimension 1).
    interval: zero plus 1(a <= w <= b) for every grid interval (VC dimension 2).
    finite-random: ``k`` seeded rows uniform on [-b, b], plus zero unless include_zero=False.
    ``center=True`` shifts indicator rows to {-1/2, 1/2} (the zero row is kept).
    """
    if m < 1:
        raise DomainError("grid size must be >= 1")
    center = bool(params.pop("center", False))
    if kind == "threshold":
        rows = [np.zeros(m)] + [(np.arange(m) <= th).astype(float) for th in range(m)]
        vc, b = 1, 1.0
    elif kind == "interval":
        rows = [np.zeros(m)]
        for a in range(m):
            for hi in range(a, m):
                rows.append(((np.arange(m) >= a) & (np.arange(m) <= hi)).astype(float))
        vc, b = 2, 1.0
    elif kind == "finite-random":
        k = int(params.pop("k", 5))
        b = float(params.pop("b", 1.0))
        include_zero = bool(params.pop("include_zero", True))
        if k < 1 or not b > 0:
            raise DomainError("finite-random needs k >= 1 and b > 0")
        rng = np.random.default_rng(seed)
        rows = list(rng.uniform(-b, b, size=(k, m)))
        if include_zero:
            rows = [np.zeros(m)] + rows
        return FunctionFamily(np.array(rows), bound_b=b)
    else:
        raise DomainError(f"unknown family kind {kind!r}")
    if params:
        raise DomainError(f"unexpected parameters: {sorted(params)}")
    values = np.array(rows)
    if center:
        values[1:] -= 0.5
        b = 0.5
    return FunctionFamily(values, bound_b=b, vc_dim=vc)


def family_to_dict(F: FunctionFamily, mu: FiniteDistribution | None = None) -> dict:
    out = {"values": F.values.tolist()}
    if mu is not None:
        out["probs"] = mu.probs.tolist()
    if F.bound_b is not None:
        out["b"] = F.bound_b
    if F.vc_dim is not None:
        out["vc_dim"] = F.vc_dim
    return out


def family_from_dict(doc: dict) -> tuple[FunctionFamily, FiniteDistribution | None]:
    if not isinstance(doc, dict) or "values" not in doc:
        raise DomainError("family document needs a 'values' table")
    F = FunctionFamily(np.asarray(doc["values"], dtype=float), doc.get("b"), doc.get("vc_dim"))
    mu = FiniteDistribution(doc["probs"]) if "probs" in doc else None
    if mu is not None and mu.m != F.m:
        raise DomainError("probs and values disagree on the ground-space size")
    return F, mu


def load_family(path) -> tuple[FunctionFamily, FiniteDistribution | None]:
    with open(path) as fh:
        return family_from_dict(json.load(fh))
