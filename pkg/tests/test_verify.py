import csv
import io
import json
import math
from itertools import product
from pathlib import Path

import numpy as np
import pytest
from scipy.stats import binom

from concentra import bounds
from concentra.errors import DomainError
from concentra.process import FiniteDistribution, FunctionFamily, family_generators
from concentra.symmetrization import EmpiricalSample
from concentra.verify import (
    CSV_COLUMNS,
    ExperimentSpec,
    TailReport,
    bernoulli_spec,
    cor2_experiment,
    cor4_experiment,
    deviation_hits,
    eb_experiment,
    exact_expectation,
    exact_tail,
    load_spec,
    report_emit,
    run_experiment,
    symmetrized_thm1_experiment,
    thm1_experiment,
    thm2_experiment,
)

SPECS = Path(__file__).resolve().parents[1] / "specs"


def naive_thm1(F, mu, n, t):
    """Brute force over Omega^n (no multisets), V by a second full loop."""
    atoms = list(product(range(mu.m), repeat=n))
    w = [math.prod(mu.probs[list(a)]) for a in atoms]
    Z = [max(sum(f[i] for i in a) for f in F.values) for a in atoms]
    EZ = sum(wi * z for wi, z in zip(w, Z))
    up = lo = 0.0
    for a, wa, z in zip(atoms, w, Z):
        V = sum(wb * max(sum((f[i] - f[j]) ** 2 for i, j in zip(a, b)) for f in F.values) for b, wb in zip(atoms, w))
        r = 2 * math.sqrt(V * t)
        if (r > 0 and z >= EZ + r - 1e-12) or (r == 0 and z > EZ + 1e-12):
            up += wa
        if (r > 0 and z <= EZ - r + 1e-12) or (r == 0 and z < EZ - 1e-12):
            lo += wa
    return up, lo


def test_exact_expectation_and_tail():
    mu = FiniteDistribution([0.7, 0.3])
    assert exact_expectation(mu, 5, lambda X: np.full(len(X), 2.5)) == pytest.approx(2.5)
    s = lambda X: X.sum(axis=1)
    assert exact_expectation(mu, 8, s) == pytest.approx(8 * 0.3)
    for k in range(9):
        assert exact_tail(mu, 8, s, k) == pytest.approx(binom.sf(k - 1, 8, 0.3), abs=1e-14)
    assert exact_tail(mu, 8, s, -math.inf) == 1.0
    assert exact_tail(mu, 8, s, math.inf) == 0.0
    g = lambda X: (X[:, 0] * 3.0 - X[:, 1])
    lin = exact_expectation(mu, 3, lambda X: 2 * s(X) + g(X))
    assert lin == pytest.approx(2 * exact_expectation(mu, 3, s) + exact_expectation(mu, 3, g))
    with pytest.raises(DomainError):
        exact_expectation(mu, 30, s, budget=1000)


def test_deviation_hits_semantics():
    dev = np.array([1.0, 0.0, 2.0, 1e-3])
    scale = np.array([1.0, 0.0, 0.0, 0.0])
    assert deviation_hits(dev, scale, 1.0).tolist() == [True, False, True, True]
    assert deviation_hits(dev, scale, 0.0).all()
    assert deviation_hits(np.array([0.999]), np.array([1.0]), 1.0).tolist() == [False]


def test_thm1_zero_family():
    spec = ExperimentSpec(family=FunctionFamily(np.zeros((1, 3))), mu=FiniteDistribution.uniform(3), n=4,
                          t_grid=[0.5, 1, 2])
    rep = thm1_experiment(spec)
    assert all(r.probability == 0 for r in rep.rows)


def test_thm1_singleton_bernoulli_against_naive():
    F = FunctionFamily([[0.0, 1.0]])
    mu = FiniteDistribution([0.5, 0.5])
    rep = thm1_experiment(ExperimentSpec(family=F, mu=mu, n=8, t_grid=[0.05, 0.25, 1, 2, 4]))
    assert rep.ok()
    rows = {(r.experiment, r.t): r.probability for r in rep.rows}
    for t in (0.05, 0.25, 1.0):
        up, lo = naive_thm1(F, mu, 8, t)
        assert rows[("thm1.upper", t)] == pytest.approx(up, abs=1e-12)
        assert rows[("thm1.lower", t)] == pytest.approx(lo, abs=1e-12)


@pytest.mark.parametrize("seed,alpha", [(0, 1.0), (1, 2.0), (2, 1.0)])
def test_thm1_random_family_against_naive(seed, alpha):
    F = family_generators("finite-random", 3, seed=seed, k=4)
    mu = FiniteDistribution([0.5, 0.3, 0.2])
    ts = [0.01, 0.05, 0.2, 1.0]
    rep = thm1_experiment(ExperimentSpec(family=F, mu=mu, n=4, t_grid=ts, alpha=alpha))
    assert rep.ok() and rep.worst_slack >= -1e-12
    rows = {(r.experiment, r.t): r.probability for r in rep.rows}
    for t in ts:
        up, lo = naive_thm1(F, mu, 4, t)
        assert rows[("thm1.upper", t)] == pytest.approx(up, abs=1e-12)
        assert rows[("thm1.lower", t)] == pytest.approx(lo, abs=1e-12)
        assert any(r.bound == bounds.thm1_bound(alpha, t) for r in rep.rows if r.t == t)


def test_thm1_rows_include_optimized_form():
    F = family_generators("finite-random", 3, seed=4, k=5)
    rep = thm1_experiment(ExperimentSpec(family=F, mu=FiniteDistribution.uniform(3), n=6, t_grid=[0.5, 1, 2],
                                         alpha=2.0))
    names = {(r.experiment, r.t) for r in rep.rows}
    assert ("thm1opt.upper", 1.0) in names and ("thm1opt.upper", 0.5) not in names
    assert rep.ok()


def test_symthm1_singleton_against_pair_enumeration():
    F = FunctionFamily([[0.0, 1.0, 3.0]])
    mu = FiniteDistribution([0.2, 0.5, 0.3])
    n = 4
    ts = [0.01, 0.1, 0.5, 1.0, 2.0]
    rep = symmetrized_thm1_experiment(ExperimentSpec(family=F, mu=mu, n=n, t_grid=ts))
    assert rep.ok()
    f = F.values[0]
    atoms = list(product(range(3), repeat=n))
    w = {a: math.prod(mu.probs[list(a)]) for a in atoms}
    for t in ts:
        p = 0.0
        for a in atoms:
            for b in atoms:
                d = sum(f[list(a)]) - sum(f[list(b)])
                W = sum((f[i] - f[j]) ** 2 for i, j in zip(a, b))
                r = 2 * math.sqrt(W * t)
                if (r > 0 and d >= r - 1e-12) or (r == 0 and d > 1e-12):
                    p += w[a] * w[b]
        rows = {r.experiment: r.probability for r in rep.rows if r.t == t}
        assert rows["symthm1.upper"] == pytest.approx(p, abs=1e-12)
        # x-marginal equals y-marginal
        assert rows["symthm1.lower"] == pytest.approx(rows["symthm1.upper"], abs=1e-12)


def test_cor2_threshold_half():
    F = family_generators("threshold", 3, center=True)
    mu = FiniteDistribution.uniform(3)
    spec = ExperimentSpec(family=F, mu=mu, n=6, t_grid=[math.log(2), 1, 2, 4])
    rep = cor2_experiment(spec)
    assert rep.ok()
    assert rep.rows[0].bound == pytest.approx(4 * math.e + 0.5)
    with pytest.raises(DomainError):
        cor2_experiment(ExperimentSpec(family=FunctionFamily([[0.0, 1.0]]), mu=FiniteDistribution.uniform(2), n=3))
    with pytest.raises(DomainError):
        cor2_experiment(ExperimentSpec(family=F, mu=mu, n=3, t_grid=[0.5]))


def test_thm2_trivial_and_threshold():
    mu = FiniteDistribution.uniform(3)
    rep = thm2_experiment(ExperimentSpec(family=FunctionFamily(np.zeros((1, 3))), mu=mu, n=3, t_grid=[1, 2]))
    assert all(r.probability == 0 for r in rep.rows)
    F = family_generators("threshold", 4)
    rep = thm2_experiment(ExperimentSpec(family=F, mu=FiniteDistribution.uniform(4), n=6, t_grid=[1, 2, 4]))
    assert rep.ok() and rep.worst_slack >= -1e-12
    assert rep.metadata["phi_condition_fraction_holding"] == 1.0
    with pytest.raises(DomainError):
        thm2_experiment(ExperimentSpec(family=F, mu=FiniteDistribution.uniform(4), n=3, t_grid=[0.1]))


def test_thm2_aborts_when_condition_fails():
    F = FunctionFamily([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    spec = ExperimentSpec(family=F, mu=FiniteDistribution.uniform(2), n=4, t_grid=[1.0], K=1e-9)
    with pytest.raises(DomainError, match="Phi"):
        thm2_experiment(spec)


def test_thm2_with_smaller_K():
    # (Phi) still holds exactly at K = 1.5 on this family, well below K(1/2)
    F = family_generators("finite-random", 3, seed=0, k=3)
    spec = ExperimentSpec(family=F, mu=FiniteDistribution.uniform(3), n=4, t_grid=[0.7, 1.0], K=1.5)
    rep = thm2_experiment(spec)
    assert rep.ok() and rep.metadata["phi_condition_worst"] < 0.5


def test_thm2_mc_agrees_with_exact():
    F = family_generators("finite-random", 3, seed=0, k=3)
    base = dict(family=F, mu=FiniteDistribution.uniform(3), n=4, t_grid=[1.0], K=1.5)
    exact = thm2_experiment(ExperimentSpec(**base))
    mc = thm2_experiment(ExperimentSpec(**base, mode="mc", trials=4000, seed=11))
    for a, b in zip(exact.rows, mc.rows):
        assert abs(a.probability - b.probability) <= 4 * b.stderr + 1e-12


def test_thm1_mc_agrees_with_exact():
    F = family_generators("finite-random", 3, seed=1, k=4)
    base = dict(family=F, mu=FiniteDistribution.uniform(3), n=5, t_grid=[0.02, 0.1])
    exact = thm1_experiment(ExperimentSpec(**base))
    assert any(r.probability > 0.01 for r in exact.rows)
    mc = thm1_experiment(ExperimentSpec(**base, mode="mc", trials=20000, seed=3))
    for a, b in zip(exact.rows, mc.rows):
        assert a.experiment == b.experiment
        assert abs(a.probability - b.probability) <= 4 * b.stderr + 1e-12


def test_cor4():
    F = family_generators("threshold", 3)
    rep = cor4_experiment(ExperimentSpec(family=F, mu=FiniteDistribution.uniform(3), n=5, t_grid=[1, 2]))
    assert rep.ok() and rep.metadata["K"] > 0
    rep = cor4_experiment(ExperimentSpec(family=F, mu=FiniteDistribution.uniform(3), n=5, t_grid=[1], K=0.1))
    assert rep.ok()
    with pytest.raises(DomainError):
        cor4_experiment(ExperimentSpec(family=FunctionFamily(np.zeros((1, 3)), vc_dim=1),
                                       mu=FiniteDistribution.uniform(3), n=3, t_grid=[1]))
    with pytest.raises(DomainError):
        cor4_experiment(ExperimentSpec(family=FunctionFamily(np.eye(3)), mu=FiniteDistribution.uniform(3), n=3))


def eb_oracle(q, n, t):
    """Coverage failure probability by summing binomial weights over the count k."""
    var = q * (1 - q)
    total = 0.0
    for k in range(n + 1):
        xbar = k / n
        var_n = xbar * (1 - xbar)
        r = 2 * math.sqrt((var + var_n) * t / (n - 4 * t))
        dev = abs(xbar - q)
        if (r > 0 and dev >= r - 1e-12) or (r == 0 and dev > 1e-12):
            total += binom.pmf(k, n, q)
    return total


@pytest.mark.parametrize("q,n,t", [(0.5, 12, 1.0), (0.1, 16, 2.0), (0.1, 8, 1.0), (0.3, 20, 3.0)])
def test_eb_binomial_oracle(q, n, t):
    rep = eb_experiment(bernoulli_spec(q, n, [t]))
    row = next(r for r in rep.rows if r.experiment == "eb.one")
    assert row.probability == pytest.approx(eb_oracle(q, n, t), abs=1e-12)
    assert row.bound == bounds.clamp(2 * math.exp(1 - (math.sqrt(t) - math.sqrt(math.log(2))) ** 2))
    assert rep.ok()


def test_eb_degenerate_and_domain():
    spec = ExperimentSpec(law=EmpiricalSample([1.0]), n=8, t_grid=[1.0])
    assert all(r.probability == 0 for r in eb_experiment(spec).rows)
    with pytest.raises(DomainError):
        eb_experiment(bernoulli_spec(0.5, 8, [2.0]))


def test_spec_roundtrip_and_errors(tmp_path):
    spec = load_spec(SPECS / "thm1_small.json")
    again = ExperimentSpec.from_dict(json.loads(json.dumps(spec.to_dict())))
    assert again.digest() == spec.digest()
    with pytest.raises(DomainError):
        ExperimentSpec.from_dict({"n": 3, "bogus": 1})
    with pytest.raises(DomainError):
        ExperimentSpec(t_grid=[])
    bad = tmp_path / "bad.json"
    bad.write_text("{")
    with pytest.raises(DomainError):
        load_spec(bad)
    with pytest.raises(DomainError):
        run_experiment("nope", spec)


def test_report_emit_formats(tmp_path):
    assert report_emit([], "csv") == ",".join(CSV_COLUMNS) + "\n"
    assert report_emit([TailReport("x")], "csv") == ",".join(CSV_COLUMNS) + "\n"
    rep = run_experiment("thm1", load_spec(SPECS / "thm1_small.json"))
    text = report_emit([rep], "json", tmp_path / "r.json")
    doc = json.loads((tmp_path / "r.json").read_text())
    assert doc["reports"][0]["rows"][0]["experiment"] == rep.rows[0].experiment
    assert text == report_emit([rep], "json")
    rows = list(csv.DictReader(io.StringIO(report_emit([rep], "csv"))))
    assert len(rows) == len(rep.rows) and float(rows[0]["probability"]) == rep.rows[0].probability
    with pytest.raises(DomainError):
        report_emit([rep], "xml")


def test_golden_mc_report():
    spec = load_spec(SPECS / "thm1_mc.json")
    text = report_emit([run_experiment("thm1", spec)], "csv")
    golden = (SPECS / "golden" / "thm1_mc.csv").read_text()
    assert text == golden


def test_prop1_and_star_experiments():
    spec = ExperimentSpec.from_dict({"event": ["0000", "1111", "0101"], "t_grid": [0, 1, 2, 4], "alpha": 1.0})
    rep = run_experiment("prop1", spec)
    assert rep.ok() and len(rep.rows) == 4
    spec = ExperimentSpec.from_dict({"functional": {"offsets": [0, 1], "slopes": [[1, 1, 0], [0, 1, 1]]},
                                     "t_grid": [0, 1, 2]})
    rep = run_experiment("star", spec)
    assert rep.ok() and {r.experiment for r in rep.rows} == {"star.upper", "star.lower"}


def test_mc_agreement_rate_over_200_runs():
    F = family_generators("finite-random", 3, seed=1, k=4)
    base = dict(family=F, mu=FiniteDistribution.uniform(3), n=4, t_grid=[0.05])
    exact = thm1_experiment(ExperimentSpec(**base)).rows[0]
    assert 0.05 < exact.probability < 0.95
    agree = 0
    for seed in range(200):
        mc = thm1_experiment(ExperimentSpec(**base, mode="mc", trials=1000, seed=seed)).rows[0]
        agree += abs(mc.probability - exact.probability) <= 4 * mc.stderr
    assert agree >= 198
