"""Command-line interface: ``concentra {bound,verify,ci,cube,chain}``.

Exit codes: 0 success, 1 a verification failed, 2 usage or domain error.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from dataclasses import dataclass, field

import numpy as np

from . import bounds
from .chaining import build_chaining, check_chaining, phi_condition_check, phi_functional
from .cube import (
    AffineSupFunctional,
    CubeEvent,
    control_points,
    convex_distance,
    parse_bits,
    prop1_verify,
    star_tails_verify,
)
from .errors import DomainError
from .process import PairedSample, load_family
from .verify import DEFAULT_SEED, EXPERIMENTS, load_spec, report_emit, run_experiment

EXIT_OK, EXIT_FAILED, EXIT_USAGE = 0, 1, 2


def fmt(v) -> str:
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return str(int(v))
    return f"{float(v):.12g}"


def _floats(text: str) -> list[float]:
    return [float(s) for s in text.split(",") if s.strip()]


@dataclass
class CliConfig:
    subcommand: str
    inputs: list = field(default_factory=list)
    output: str | None = None
    mode: str | None = None
    seed: int = DEFAULT_SEED
    budget: int | None = None
    workers: int = 1


# --- bound -----------------------------------------------------------------------


def _bound_values(a) -> list[tuple[str, float]]:
    w = a.which
    if w == "thm1":
        return [("bound", bounds.thm1_bound(a.alpha, a.t))]
    if w == "thm1opt":
        return [("bound", bounds.thm1_optimized(a.t))]
    if w == "cor2":
        return [("radius", bounds.cor2_radius(a.ev, a.b, a.t)), ("rhs", bounds.cor2_rhs(a.t))]
    if w == "massart":
        return [("radius", bounds.massart_radius(a.ev, a.b, a.t))]
    if w == "pois":
        return [("poisson", bounds.poisson_tail(a.ev, a.r)), ("bernstein", bounds.bernstein_tail(a.ev, a.r))]
    if w == "haussler":
        return [("packing", bounds.haussler_packing_bound(a.d, a.u))]
    if w == "cor4":
        K = a.K if a.K is not None else bounds.k_beta(a.beta)[1]
        return [("radius", bounds.cor4_radius(a.d, a.n, a.t, K))]
    if w == "eb":
        return [("radius", bounds.eb_radius(a.var_sum, a.n, a.t))]
    if w == "vcopt":
        return [("radius", bounds.vc_optimistic_radius(a.d, a.n, a.t))]
    if w == "thm2rhs":
        return [("rhs", bounds.thm2_rhs(a.t, a.beta))]
    if w == "kbeta":
        p, K = bounds.k_beta(a.beta)
        return [("p", p), ("K", K)]
    raise DomainError(f"unknown bound {w!r}")


def cmd_bound(a) -> int:
    vals = _bound_values(a)
    if len(vals) == 1:
        print(fmt(vals[0][1]))
    else:
        for name, v in vals:
            print(f"{name} {fmt(v)}")
    return EXIT_OK


# --- verify ----------------------------------------------------------------------


def cmd_verify(a) -> int:
    spec = load_spec(a.spec)
    if a.mode is not None:
        spec.mode = a.mode
    if a.seed is not None:
        spec.seed = a.seed
    if a.trials is not None:
        spec.trials = a.trials
    spec.workers = a.workers
    report = run_experiment(a.experiment, spec)
    text = report_emit([report], a.format, a.out)
    if a.out is None:
        sys.stdout.write(text)
    ok = report.ok()
    print(f"{a.experiment}: {'verified' if ok else 'VIOLATED'} worst slack {fmt(report.worst_slack)}",
          file=sys.stderr)
    return EXIT_OK if ok else EXIT_FAILED


# --- ci --------------------------------------------------------------------------


def _read_column(path: str, column: str | None) -> np.ndarray:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if not reader.fieldnames:
            raise DomainError(f"{path} has no header row")
        col = column or reader.fieldnames[0]
        if col not in reader.fieldnames:
            raise DomainError(f"column {col!r} not in {reader.fieldnames}")
        try:
            vals = [float(row[col]) for row in reader if row[col] not in ("", None)]
        except ValueError as exc:
            raise DomainError(f"non-numeric entry in column {col!r}: {exc}") from None
    if not vals:
        raise DomainError(f"column {col!r} is empty")
    return np.asarray(vals)


def cmd_ci(a) -> int:
    data = _read_column(a.data, a.column)
    n = data.size
    mean = float(data.mean())
    var_n = float(data.var())
    level = min(1.0, 2.0 * math.exp(1.0 - (math.sqrt(a.t) - bounds.SQRT_LOG2) ** 2))
    r_sample = bounds.eb_radius(var_n, n, a.t)
    print(f"n {n}")
    print(f"mean {fmt(mean)}")
    print(f"sample_variance {fmt(var_n)}")
    if a.var is not None:
        r = bounds.eb_radius(a.var + var_n, n, a.t)
        print(f"radius {fmt(r)}")
        print(f"interval {fmt(mean - r)} {fmt(mean + r)}")
    else:
        print("radius unavailable (pass --var for the interval with the true variance)")
    print(f"radius_sample_only {fmt(r_sample)}")
    print(f"interval_sample_only {fmt(mean - r_sample)} {fmt(mean + r_sample)}")
    print(f"failure_probability_bound {fmt(level)}")
    return EXIT_OK


# --- cube ------------------------------------------------------------------------


def _load_event(path: str) -> CubeEvent:
    with open(path) as fh:
        return CubeEvent.from_json(fh.read())


def _print_report(rep) -> bool:
    for row in rep.rows:
        extra = f" {row['tail']}" if "tail" in row else ""
        print(f"t {fmt(row['t'])}{extra} lhs {fmt(row['lhs'])} rhs {fmt(row['rhs'])} slack {fmt(row['slack'])}")
    print(f"{rep.name}: {'verified' if rep.ok else 'VIOLATED'}")
    return rep.ok


def cmd_cube(a) -> int:
    if a.action == "star":
        if a.functional:
            with open(a.functional) as fh:
                doc = json.load(fh)
            F = AffineSupFunctional(doc["offsets"], doc["slopes"], doc.get("sign", 1))
        elif a.family and a.pair:
            fam, _ = load_family(a.family)
            pair = _load_pair(a.pair)
            F = AffineSupFunctional.from_pair(fam.values, pair.x, pair.y)[0]
        else:
            raise DomainError("star needs --functional or --family with --pair")
        return EXIT_OK if _print_report(star_tails_verify(F, a.alpha, _floats(a.t))) else EXIT_FAILED
    if not a.set:
        raise DomainError(f"cube {a.action} needs --set")
    A = _load_event(a.set)
    if a.action == "fc":
        res = convex_distance(A, parse_bits(a.eps))
        print(f"fc {fmt(res.fc)}")
        print(f"fc2 {fmt(res.fc2)}")
        print(f"certificate_gap {fmt(res.certificate_gap)}")
        return EXIT_OK
    if a.action == "prop1":
        return EXIT_OK if _print_report(prop1_verify(A, a.alpha, _floats(a.t))) else EXIT_FAILED
    if a.action == "control":
        lam = _floats(a.lam) if a.lam else [1.0] * A.n
        pt, lhs, rhs = control_points(A, parse_bits(a.eps), lam, float(_floats(a.t)[0]))
        print(f"control {''.join(str(int(b)) for b in pt)}")
        print(f"lhs {fmt(lhs)} rhs {fmt(rhs)}")
        return EXIT_OK
    raise DomainError(f"unknown cube action {a.action!r}")


# --- chain -----------------------------------------------------------------------


def _load_pair(path: str) -> PairedSample:
    with open(path) as fh:
        doc = json.load(fh)
    try:
        return PairedSample(np.asarray(doc["x"], dtype=int), np.asarray(doc["y"], dtype=int))
    except (KeyError, TypeError) as exc:
        raise DomainError(f"pair file needs integer lists 'x' and 'y': {exc}") from None


def cmd_chain(a) -> int:
    F, _ = load_family(a.family)
    pair = _load_pair(a.pair)
    if pair.x.max(initial=0) >= F.m or pair.y.max(initial=0) >= F.m:
        raise DomainError("pair indexes points outside the family's ground space")
    st = build_chaining(F, pair, a.beta)
    problems = check_chaining(st)
    phi = phi_functional(F, pair, a.beta, a.K)
    check = phi_condition_check(F, pair, a.beta, trials=a.trials, seed=a.seed, K=a.K, workers=a.workers)
    doc = {"structure": st.to_dict(), "phi": phi.values.tolist(), "K": phi.K, "p": phi.p,
           "phi_check": {"verdict": check.verdict, "probability": check.probability, "mode": check.mode},
           "invariant_violations": problems}
    text = json.dumps(doc, sort_keys=True, indent=2) + "\n"
    if a.out:
        with open(a.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    print(f"(Phi) {check.verdict} probability {fmt(check.probability)} vs 1 - beta = {fmt(1 - a.beta)}",
          file=sys.stderr)
    return EXIT_OK if check.verdict == "holds" and not problems else EXIT_FAILED


# --- parser ----------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="concentra", description=__doc__)
    sub = ap.add_subparsers(dest="subcommand", required=True)

    b = sub.add_parser("bound", help="evaluate a closed-form bound")
    b.add_argument("which", choices=["thm1", "thm1opt", "cor2", "massart", "pois", "haussler", "cor4", "eb",
                                     "vcopt", "thm2rhs", "kbeta"])
    for name, typ, default in [("alpha", float, 1.0), ("t", float, None), ("ev", float, None), ("b", float, None),
                               ("r", float, None), ("d", int, None), ("u", float, None), ("n", int, None),
                               ("K", float, None), ("var-sum", float, None), ("beta", float, 0.5)]:
        b.add_argument(f"--{name}", type=typ, default=default)
    b.set_defaults(func=cmd_bound)

    v = sub.add_parser("verify", help="run a tail-bound experiment from a JSON spec")
    v.add_argument("experiment", choices=sorted(EXPERIMENTS))
    v.add_argument("spec")
    v.add_argument("--out")
    v.add_argument("--format", choices=["json", "csv"], default="json")
    v.add_argument("--mode", choices=["exact", "mc"])
    v.add_argument("--seed", type=int)
    v.add_argument("--trials", type=int)
    v.add_argument("--workers", type=int, default=1)
    v.set_defaults(func=cmd_verify)

    c = sub.add_parser("ci", help="empirical-Bernstein interval for the mean of a CSV column")
    c.add_argument("data")
    c.add_argument("--t", type=float, required=True)
    c.add_argument("--column")
    c.add_argument("--var", type=float, help="true variance, if known")
    c.set_defaults(func=cmd_ci)

    q = sub.add_parser("cube", help="convex distance on the hypercube")
    q.add_argument("action", choices=["fc", "prop1", "control", "star"])
    q.add_argument("--set")
    q.add_argument("--eps")
    q.add_argument("--alpha", type=float, default=1.0)
    q.add_argument("--t", default="0,1,2,3,4,5,6,7,8,9,10")
    q.add_argument("--lam")
    q.add_argument("--functional")
    q.add_argument("--family")
    q.add_argument("--pair")
    q.set_defaults(func=cmd_cube)

    h = sub.add_parser("chain", help="chaining structure and (Phi) check for a family and paired sample")
    h.add_argument("family")
    h.add_argument("pair")
    h.add_argument("--beta", type=float, default=0.5)
    h.add_argument("--K", type=float, help="override K(beta) in the Phi functional")
    h.add_argument("--out")
    h.add_argument("--trials", type=int, default=100_000)
    h.add_argument("--seed", type=int, default=DEFAULT_SEED)
    h.add_argument("--workers", type=int, default=1)
    h.set_defaults(func=cmd_chain)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    try:
        return args.func(args)
    except (DomainError, OSError, KeyError, TypeError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
