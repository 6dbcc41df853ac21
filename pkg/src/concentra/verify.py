"""Exact and Monte Carlo checks of every tail bound against the bounds module.

Deviation events of the form ``A >= B + sqrt(C t)`` are evaluated as
``sup_{delta>0} 4 delta (A - B - delta C) >= t``: for C > 0 this is the same event,
for C = 0 it requires A > B strictly (t > 0). Every event is counted with a
relative slack of 1e-12 in the direction that enlarges the probability.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from . import bounds
from .chaining import DifferenceSpace, phi_condition_check, phi_functional
from .cube import AffineSupFunctional, CubeEvent, prop1_verify, star_tails_verify
from .errors import DomainError
from .mc import run_blocks
from .process import (
    FiniteDistribution,
    FunctionFamily,
    PairedSample,
    default_budget,
    family_from_dict,
    family_to_dict,
    multiset_atoms,
    product_atoms,
    uniform_v,
    z_values,
)
from .symmetrization import EmpiricalSample

DEFAULT_SEED = 20240607
EVENT_TOL = 1e-12
CSV_COLUMNS = ["experiment", "t", "probability", "bound", "slack", "stderr", "mode", "seed"]


@dataclass
class ExperimentSpec:
    family: FunctionFamily | None = None
    mu: FiniteDistribution | None = None
    n: int = 1
    t_grid: list = field(default_factory=lambda: [1.0])
    alpha: float = 1.0
    beta: float = 0.5
    mode: str = "exact"
    trials: int = 100_000
    seed: int = DEFAULT_SEED
    budget: int | None = None
    workers: int = 1
    K: float | None = None
    law: EmpiricalSample | None = None
    event: CubeEvent | None = None
    functional: AffineSupFunctional | None = None

    def __post_init__(self):
        if not list(self.t_grid):
            raise DomainError("t_grid must be nonempty")
        self.t_grid = [float(t) for t in self.t_grid]
        if self.mode not in ("exact", "mc"):
            raise DomainError(f"mode must be 'exact' or 'mc', got {self.mode!r}")
        if self.n < 1:
            raise DomainError("n must be positive")
        if self.trials < 1:
            raise DomainError("trials must be positive")
        if self.budget is None:
            self.budget = default_budget()

    def to_dict(self) -> dict:
        doc = {
            "n": self.n,
            "t_grid": self.t_grid,
            "alpha": self.alpha,
            "beta": self.beta,
            "mode": self.mode,
            "trials": self.trials,
            "seed": self.seed,
            "budget": self.budget,
        }
        if self.family is not None:
            doc["family"] = family_to_dict(self.family, self.mu)
        if self.K is not None:
            doc["K"] = self.K
        if self.law is not None:
            doc["law"] = {"values": self.law.values.tolist(), "probs": self.law.probs.tolist()}
        if self.event is not None:
            doc["event"] = json.loads(self.event.to_json())
        if self.functional is not None:
            f = self.functional
            doc["functional"] = {"offsets": f.offsets.tolist(), "slopes": f.slopes.tolist(), "sign": f.sign}
        return doc

    @classmethod
    def from_dict(cls, doc: dict) -> "ExperimentSpec":
        if not isinstance(doc, dict):
            raise DomainError("experiment spec must be a JSON object")
        known = {"family", "n", "t_grid", "alpha", "beta", "mode", "trials", "seed", "budget", "K", "law",
                 "event", "functional", "workers"}
        extra = set(doc) - known
        if extra:
            raise DomainError(f"unknown spec fields: {sorted(extra)}")
        kw = {k: doc[k] for k in ("n", "t_grid", "alpha", "beta", "mode", "trials", "seed", "budget", "K",
                                  "workers") if k in doc}
        if "family" in doc:
            kw["family"], kw["mu"] = family_from_dict(doc["family"])
        if "law" in doc:
            kw["law"] = EmpiricalSample(doc["law"]["values"], doc["law"].get("probs"))
        if "event" in doc:
            kw["event"] = CubeEvent.from_strings(doc["event"])
        if "functional" in doc:
            f = doc["functional"]
            kw["functional"] = AffineSupFunctional(f["offsets"], f["slopes"], f.get("sign", 1))
        try:
            return cls(**kw)
        except TypeError as exc:
            raise DomainError(str(exc)) from None

    def digest(self) -> str:
        return hashlib.sha256(json.dumps(self.to_dict(), sort_keys=True).encode()).hexdigest()[:16]


@dataclass
class TailRow:
    experiment: str
    t: float
    probability: float
    bound: float
    slack: float
    stderr: float
    mode: str
    seed: int | None


@dataclass
class TailReport:
    experiment: str
    rows: list = field(default_factory=list)
    metadata: dict = field(default_factory=dict)

    def add(self, name: str, t: float, prob: float, bound: float, stderr: float, mode: str, seed):
        self.rows.append(TailRow(name, float(t), float(prob), float(bound), float(bound - prob), float(stderr),
                                 mode, seed))

    @property
    def worst_slack(self) -> float:
        return min((r.slack for r in self.rows), default=math.inf)

    def ok(self, tol: float = 1e-12) -> bool:
        """Exact rows need slack >= -tol; MC rows need slack + 4 stderr >= -tol."""
        for r in self.rows:
            margin = 0.0 if r.mode == "exact" else 4.0 * r.stderr
            if r.slack + margin < -tol:
                return False
        return True

    def to_dict(self) -> dict:
        return {"experiment": self.experiment, "metadata": self.metadata, "rows": [asdict(r) for r in self.rows]}


# --- exact oracles -----------------------------------------------------------


def exact_expectation(mu: FiniteDistribution, n: int, statistic, budget: int | None = None) -> float:
    """Sum of statistic(x) mu^n(x) over Omega^n; ``statistic`` maps (c, n) index rows to (c,)."""
    parts = [float(w @ np.asarray(statistic(X), dtype=float)) for X, w in product_atoms(mu.probs, n, budget)]
    return math.fsum(parts)


def exact_tail(mu: FiniteDistribution, n: int, statistic, threshold: float, budget: int | None = None) -> float:
    """P(statistic(x) >= threshold) under mu^n."""
    if threshold == -math.inf:
        return 1.0
    if threshold == math.inf:
        return 0.0
    return exact_expectation(mu, n, lambda X: np.asarray(statistic(X)) >= threshold, budget)


def deviation_hits(dev: np.ndarray, scale2: np.ndarray, t: float) -> np.ndarray:
    """Indicator of sup_{delta>0} 4 delta (dev - delta scale2) >= t, elementwise."""
    dev = np.asarray(dev, dtype=float)
    if t <= 0:
        return np.ones(dev.shape, dtype=bool)
    radius = np.sqrt(np.maximum(np.asarray(scale2, dtype=float), 0.0) * t)
    tol = EVENT_TOL * np.maximum(1.0, np.maximum(np.abs(dev), radius))
    return np.where(radius > tol, dev >= radius - tol, dev > tol)


# --- sampling layers -----------------------------------------------------------


def _x_atoms(spec: ExperimentSpec, probs: np.ndarray, n: int):
    """(rows, weights, stderr_mode): exact multiset atoms or seeded i.i.d. draws."""
    if spec.mode == "exact":
        X, w = multiset_atoms(probs, n, spec.budget)
        return X, w
    X = run_blocks(lambda rng, size: rng.choice(probs.size, size=(size, n), p=probs), spec.trials, spec.seed,
                   workers=spec.workers)
    return X, np.full(len(X), 1.0 / len(X))


def _prob(hits: np.ndarray, w: np.ndarray, mode: str) -> tuple[float, float]:
    p = math.fsum((w * hits).tolist())
    if mode == "exact":
        return p, 0.0
    N = len(hits)
    return p, math.sqrt(max(p * (1.0 - p), 0.0) / N)


def _need(spec: ExperimentSpec, family: bool = True):
    if family and (spec.family is None or spec.mu is None):
        raise DomainError("experiment needs a family with probs")
    if family and spec.family.m != spec.mu.m:
        raise DomainError("family and distribution disagree on the ground-space size")


class _XCache:
    """Z(x) and V(x) with V memoized on the sorted sample (V is symmetric in the coordinates)."""

    def __init__(self, spec: ExperimentSpec):
        self.spec = spec
        self.v = {}

    def z(self, X):
        return z_values(self.spec.family, X)

    def V(self, X):
        out = np.empty(len(X))
        for i, x in enumerate(X):
            key = tuple(sorted(x.tolist()))
            if key not in self.v:
                self.v[key] = uniform_v(self.spec.family, np.array(key), self.spec.mu, "exact", self.spec.budget).value
            out[i] = self.v[key]
        return out


def _expected_z(spec: ExperimentSpec) -> float:
    X, w = multiset_atoms(spec.mu.probs, spec.n, spec.budget)
    return math.fsum((w * z_values(spec.family, X)).tolist())


def _meta(spec: ExperimentSpec, **extra) -> dict:
    return {"spec_hash": spec.digest(), "seed": spec.seed if spec.mode == "mc" else None, "mode": spec.mode, **extra}


# --- experiments -----------------------------------------------------------------


def thm1_experiment(spec: ExperimentSpec) -> TailReport:
    """Both tails of Z around EZ at radius 2 sqrt(V t), against thm1_bound and its optimized form."""
    _need(spec)
    cache = _XCache(spec)
    X, w = _x_atoms(spec, spec.mu.probs, spec.n)
    ez = _expected_z(spec)
    Z, V = cache.z(X), cache.V(X)
    seed = spec.seed if spec.mode == "mc" else None
    rep = TailReport("thm1", metadata=_meta(spec, EZ=ez, alpha=spec.alpha, atoms=len(X)))
    for t in spec.t_grid:
        for side, dev in (("upper", Z - ez), ("lower", ez - Z)):
            p, se = _prob(deviation_hits(dev, 4.0 * V, t), w, spec.mode)
            rep.add(f"thm1.{side}", t, p, bounds.thm1_bound(spec.alpha, t), se, spec.mode, seed)
            if t >= bounds.LOG2:
                rep.add(f"thm1opt.{side}", t, p, bounds.thm1_optimized(t), se, spec.mode, seed)
    return rep


def symmetrized_thm1_experiment(spec: ExperimentSpec) -> TailReport:
    """P(Z(x) >= Z(y) + 2 sqrt(W t)) over independent pairs, against 2^(a+1) e^(-a t/(a+1))."""
    _need(spec)
    F, m = spec.family, spec.mu.m
    pair_probs = np.outer(spec.mu.probs, spec.mu.probs).ravel()
    S, w = _x_atoms(spec, pair_probs, spec.n)
    X, Y = S // m, S % m
    zx, zy = z_values(F, X), z_values(F, Y)
    diff = F.values[:, X] - F.values[:, Y]
    W = np.einsum("kcn,kcn->kc", diff, diff).max(axis=0)
    seed = spec.seed if spec.mode == "mc" else None
    rep = TailReport("symthm1", metadata=_meta(spec, alpha=spec.alpha, atoms=len(S)))
    for t in spec.t_grid:
        bound = bounds.thm1_bound(spec.alpha, t) / math.e
        for side, dev in (("upper", zx - zy), ("lower", zy - zx)):
            p, se = _prob(deviation_hits(dev, 4.0 * W, t), w, spec.mode)
            rep.add(f"symthm1.{side}", t, p, bound, se, spec.mode, seed)
    return rep


def cor2_experiment(spec: ExperimentSpec) -> TailReport:
    """P(|Z - EZ| >= cor2_radius(EV, b, t)) against 4 e^(1-(sqrt t - sqrt log 2)^2) + e^-t."""
    _need(spec)
    b = spec.family.bound_b
    if b is None:
        raise DomainError("the cor2 experiment needs a uniformly bounded family (declare 'b')")
    for t in spec.t_grid:
        if t < bounds.LOG2:
            raise DomainError(f"two-sided tail needs t >= log 2, got {t}")
    cache = _XCache(spec)
    Xe, we = multiset_atoms(spec.mu.probs, spec.n, spec.budget)
    ev = math.fsum((we * cache.V(Xe)).tolist())
    ez = _expected_z(spec)
    X, w = _x_atoms(spec, spec.mu.probs, spec.n)
    Z = cache.z(X)
    seed = spec.seed if spec.mode == "mc" else None
    rep = TailReport("cor2", metadata=_meta(spec, EZ=ez, EV=ev, b=b))
    for t in spec.t_grid:
        r = bounds.cor2_radius(ev, b, t)
        hits = deviation_hits(np.abs(Z - ez), np.full(len(Z), r * r), 1.0)
        p, se = _prob(hits, w, spec.mode)
        rep.add("cor2", t, p, bounds.cor2_rhs(t), se, spec.mode, seed)
    return rep


def _pair_key(x: np.ndarray, y: np.ndarray) -> tuple:
    # Phi is invariant under coordinate permutations and under swapping x_i with y_i
    return tuple(sorted(zip(np.minimum(x, y).tolist(), np.maximum(x, y).tolist())))


class _PhiCache:
    def __init__(self, F: FunctionFamily, beta: float, K: float | None, signs: str = "rademacher"):
        self.F, self.beta, self.K, self.signs = F, beta, K, signs
        self.values = {}
        self.checks = {}

    def __call__(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        key = _pair_key(x, y)
        if key not in self.values:
            a = np.array([k[0] for k in key])
            b = np.array([k[1] for k in key])
            pair = PairedSample(a, b)
            space = DifferenceSpace.build(self.F, pair)
            phi = phi_functional(self.F, pair, self.beta, self.K, space)
            self.values[key] = phi.values
            self.checks[key] = phi_condition_check(self.F, pair, self.beta, signs=self.signs, K=self.K)
        return self.values[key]


def _expected_phi(cache: _PhiCache, x: np.ndarray, mu: FiniteDistribution, budget: int) -> np.ndarray:
    total = np.zeros(cache.F.size)
    for Y, w in product_atoms(mu.probs, x.size, budget):
        for y, wy in zip(Y, w):
            total += wy * cache(x, y)
    return total


def _per_function_moments(F: FunctionFamily, X: np.ndarray, mu: FiniteDistribution):
    """(Pf - P_n f) and V f for every function (rows) and sample (columns)."""
    vals = F.values
    pf = vals @ mu.probs
    var = ((vals - pf[:, None]) ** 2) @ mu.probs
    FX = vals[:, X]  # (k, c, n)
    pnf = FX.mean(axis=2)
    var_n = FX.var(axis=2)
    q = pf[:, None] - pnf
    return q, 4.0 * (var[:, None] + var_n + q * q)


def thm2_experiment(spec: ExperimentSpec) -> TailReport:
    """P(exists f: Q_n f >= E_y Phi(f) + sqrt(V f t / n)) against exp(1 - (sqrt t - sqrt log 1/beta)^2).

    Phi is the chaining functional with K(beta); E_y Phi is summed over every y.
    Condition (Phi) is checked exactly on every distinct (x, y) configuration met.
    """
    _need(spec)
    F = spec.family
    F.require_zero()
    level = math.log(1.0 / spec.beta)
    for t in spec.t_grid:
        if t < level:
            raise DomainError(f"need t >= log(1/beta) = {level}, got {t}")
    cache = _PhiCache(F, spec.beta, spec.K)
    X, w = _x_atoms(spec, spec.mu.probs, spec.n)
    ephi_by_key = {}
    ephi = np.empty((F.size, len(X)))
    for c, x in enumerate(X):
        key = tuple(sorted(x.tolist()))
        if key not in ephi_by_key:
            ephi_by_key[key] = _expected_phi(cache, np.array(key), spec.mu, spec.budget)
        ephi[:, c] = ephi_by_key[key]
    failed = [k for k, chk in cache.checks.items() if chk.verdict != "holds"]
    if failed:
        raise DomainError(f"condition (Phi) fails on {len(failed)} configurations; the chaining tail bound does not apply")
    q, V = _per_function_moments(F, X, spec.mu)
    seed = spec.seed if spec.mode == "mc" else None
    worst = max((chk.probability for chk in cache.checks.values()), default=0.0)
    rep = TailReport("thm2", metadata=_meta(
        spec, beta=spec.beta, K=bounds.k_beta(spec.beta)[1] if spec.K is None else spec.K,
        phi_configurations=len(cache.checks), phi_condition_worst=worst,
        phi_condition_fraction_holding=1.0, exact_packing=all(chk.exact_packing for chk in cache.checks.values())))
    for t in spec.t_grid:
        rhs = bounds.thm2_rhs(t, spec.beta)
        for name, dev in (("thm2.PminusPn", q - ephi), ("thm2.PnminusP", -q - ephi)):
            hits = deviation_hits(dev, V / spec.n, t).any(axis=0)
            p, se = _prob(hits, w, spec.mode)
            rep.add(name, t, p, rhs, se, spec.mode, seed)
    return rep


def cor4_constant(beta: float, d: int, n: int, v_min: float) -> float:
    """Smallest K with 2K(beta) n^-1/2 int_0^{sqrt(v)/4} sqrt(log D_H) <= K sqrt(v d log n / n) for all v >= v_min.

    D_H is the Haussler packing bound; the left side over sqrt(v) decreases in v,
    so the worst case is v = v_min.
    """
    from .chaining import _sqrt_log_integral, haussler_profile

    _, Kb = bounds.k_beta(beta)
    integral = _sqrt_log_integral(haussler_profile(d), math.sqrt(v_min) / 4.0)
    return 2.0 * Kb * integral / math.sqrt(v_min * d * math.log(n))


def cor4_experiment(spec: ExperimentSpec) -> TailReport:
    """P(exists f with V f > 0: Q_n f / sqrt(V f) >= cor4_radius) against thm2_rhs.

    Without an explicit ``K`` the constant is :func:`cor4_constant` at the smallest
    positive V f of the instance, which makes the event a sub-event of the uniform
    entropy bound with Haussler packing numbers.
    """
    _need(spec)
    F = spec.family
    if F.vc_dim is None:
        raise DomainError("the cor4 experiment needs a declared vc_dim")
    if spec.n < 2:
        raise DomainError("the cor4 experiment needs n >= 2")
    level = math.log(1.0 / spec.beta)
    for t in spec.t_grid:
        if t < level:
            raise DomainError(f"need t >= log(1/beta) = {level}, got {t}")
    X, w = _x_atoms(spec, spec.mu.probs, spec.n)
    q, V = _per_function_moments(F, X, spec.mu)
    eligible = V > EVENT_TOL
    if not eligible.any():
        raise DomainError("every function has V f = 0; the normalized supremum is empty")
    K = spec.K
    if K is None:
        Xe, _ = multiset_atoms(spec.mu.probs, spec.n, spec.budget)
        _, Ve = _per_function_moments(F, Xe, spec.mu)
        K = cor4_constant(spec.beta, F.vc_dim, spec.n, float(Ve[Ve > EVENT_TOL].min()))
    excluded = int(np.count_nonzero(~eligible))
    seed = spec.seed if spec.mode == "mc" else None
    rep = TailReport("cor4", metadata=_meta(spec, beta=spec.beta, K=K, d=F.vc_dim, excluded_pairs=excluded))
    safeV = np.where(eligible, V, 1.0)
    for t in spec.t_grid:
        r = bounds.cor4_radius(F.vc_dim, spec.n, t, K)
        rhs = bounds.thm2_rhs(t, spec.beta)
        for name, dev in (("cor4.PminusPn", q), ("cor4.PnminusP", -q)):
            ratio = dev / np.sqrt(safeV)
            hits = (eligible & (ratio >= r - EVENT_TOL * max(1.0, r))).any(axis=0)
            p, se = _prob(hits, w, spec.mode)
            rep.add(name, t, p, rhs, se, spec.mode, seed)
    return rep


def eb_experiment(spec: ExperimentSpec) -> TailReport:
    """Coverage of the variance-plus-sample-variance interval for the mean of a finite law.

    ``eb.one`` is the solved interval 2 sqrt((Var + Var_n) t / (n - 4t)); ``eb.thm2`` is
    the unsolved form 2 sqrt((Var + Var_n + dev^2) t / n) from the zero functional with
    beta = 1/2. Both are compared with min(1, 2 exp(1 - (sqrt t - sqrt log 2)^2)).
    """
    law = spec.law
    if law is None:
        raise DomainError("eb experiment needs a 'law'")
    n = spec.n
    for t in spec.t_grid:
        if not t < n / 4.0:
            raise DomainError(f"need t < n/4 (n={n}, t={t})")
        if t < bounds.LOG2:
            raise DomainError(f"need t >= log 2, got {t}")
    vals, probs = law.values, law.probs
    mean = float(probs @ vals)
    var = float(probs @ (vals - mean) ** 2)
    X, w = _x_atoms(spec, probs, n)
    S = vals[X]
    xbar = S.mean(axis=1)
    var_n = S.var(axis=1)
    dev = np.abs(xbar - mean)
    seed = spec.seed if spec.mode == "mc" else None
    rep = TailReport("eb", metadata=_meta(spec, mean=mean, var=var, phi="zero functional, beta = 1/2"))
    for t in spec.t_grid:
        rhs = bounds.clamp(bounds.thm1_optimized(t))
        scale_one = 4.0 * (var + var_n) / (n - 4.0 * t)
        p, se = _prob(deviation_hits(dev, scale_one, t), w, spec.mode)
        rep.add("eb.one", t, p, rhs, se, spec.mode, seed)
        scale_thm2 = 4.0 * (var + var_n + dev * dev) / n
        p2, se2 = _prob(deviation_hits(dev, scale_thm2, t), w, spec.mode)
        rep.add("eb.thm2", t, p2, rhs, se2, spec.mode, seed)
    return rep


def bernoulli_spec(q: float, n: int, t_grid, **kw) -> ExperimentSpec:
    return ExperimentSpec(law=EmpiricalSample([0.0, 1.0], [1.0 - q, q]), n=n, t_grid=t_grid, **kw)


def _from_verification(name: str, vr, spec: ExperimentSpec) -> TailReport:
    rep = TailReport(name, metadata=_meta(spec, **{k: v for k, v in vr.info.items()}))
    for row in vr.rows:
        tag = f"{name}.{row['tail']}" if "tail" in row else name
        rep.add(tag, row["t"], row["lhs"], row["rhs"], 0.0, "exact", None)
    return rep


def prop1_experiment(spec: ExperimentSpec) -> TailReport:
    if spec.event is None:
        raise DomainError("prop1 experiment needs an 'event'")
    return _from_verification("prop1", prop1_verify(spec.event, spec.alpha, spec.t_grid), spec)


def star_experiment(spec: ExperimentSpec) -> TailReport:
    if spec.functional is None:
        raise DomainError("star experiment needs a 'functional'")
    return _from_verification("star", star_tails_verify(spec.functional, spec.alpha, spec.t_grid), spec)


EXPERIMENTS = {
    "thm1": thm1_experiment,
    "symthm1": symmetrized_thm1_experiment,
    "cor2": cor2_experiment,
    "thm2": thm2_experiment,
    "cor4": cor4_experiment,
    "eb": eb_experiment,
    "prop1": prop1_experiment,
    "star": star_experiment,
}


def run_experiment(name: str, spec: ExperimentSpec) -> TailReport:
    try:
        fn = EXPERIMENTS[name]
    except KeyError:
        raise DomainError(f"unknown experiment {name!r}; choose from {sorted(EXPERIMENTS)}") from None
    return fn(spec)


# --- serialization ---------------------------------------------------------------


def _csv_text(reports) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for rep in reports:
        for r in rep.rows:
            writer.writerow([r.experiment, repr(r.t), repr(r.probability), repr(r.bound), repr(r.slack),
                             repr(r.stderr), r.mode, "" if r.seed is None else r.seed])
    return buf.getvalue()


def _json_text(reports) -> str:
    return json.dumps({"reports": [r.to_dict() for r in reports]}, sort_keys=True, indent=2) + "\n"


def report_emit(reports, fmt: str = "json", path=None) -> str:
    """Serialize reports deterministically; writes to ``path`` when given and returns the text."""
    reports = list(reports)
    if fmt == "json":
        text = _json_text(reports)
    elif fmt == "csv":
        text = _csv_text(reports)
    else:
        raise DomainError(f"unknown report format {fmt!r}")
    if path is not None:
        with open(path, "w", newline="") as fh:
            fh.write(text)
    return text


def load_spec(path) -> ExperimentSpec:
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise DomainError(f"cannot parse {path}: {exc}") from None
    try:
        return ExperimentSpec.from_dict(doc)
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, DomainError):
            raise
        raise DomainError(f"invalid spec {path}: {exc}") from None
