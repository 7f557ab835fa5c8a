"""Command-line interface.

Exit codes: 0 success, 1 failed DP verification, 2 usage or input error,
3 the moment estimate does not exist.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import harness
from .estimator import MomentSystem, SolveOptions, estimate, estimate_to_json
from .model import (
    ModelSpec,
    ParameterVector,
    bi_degrees,
    edge_moments,
    edge_pmf,
    expected_degrees,
    read_edge_list,
    sample_graph,
    write_edge_list,
)
from .privacy import (
    NoiseScale,
    PrivacyBudget,
    PrivateBiDegree,
    exhaustive_dp_check,
    noise_scale,
    privatize,
    read_degree_csv,
    write_degree_csv,
)

log = logging.getLogger("privp0")

EXIT_OK, EXIT_DP_FAIL, EXIT_USAGE, EXIT_NO_ESTIMATE = 0, 1, 2, 3


class UsageError(Exception):
    pass


def _positive_int(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return v


def _write_or_print(text: str, out) -> None:
    if out is None or out == "-":
        sys.stdout.write(text)
    else:
        Path(out).write_text(text, encoding="utf-8")


def _load_params(path, n):
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    theta = ParameterVector(doc["alpha"], doc["beta"])
    if n is not None and theta.n != n:
        raise UsageError(f"parameter file has n={theta.n}, but --n {n} was given")
    return theta


def cmd_generate(args) -> int:
    if args.params is not None:
        theta = _load_params(args.params, args.n)
    else:
        if args.n is None or args.L is None:
            raise UsageError("generate needs --n and either --L or --params")
        if args.L < 0:
            raise UsageError("--L must be >= 0")
        theta = harness.linear_parameters(args.n, args.L)
    spec = ModelSpec(theta.n, args.q)
    w = sample_graph(theta, spec, args.seed)
    if args.out is None:
        raise UsageError("generate needs --out")
    write_edge_list(w, args.out)
    d = bi_degrees(w)
    print(f"n={spec.n} q={spec.q} edges={int(np.count_nonzero(w.entries))} "
          f"total_weight={int(d.out.sum())} "
          f"out[min,max]=[{d.out.min()},{d.out.max()}] in[min,max]=[{d.in_.min()},{d.in_.max()}]")
    return EXIT_OK


def cmd_degrees(args) -> int:
    w = read_edge_list(args.edges)
    _write_or_print(write_degree_csv(bi_degrees(w)), args.out)
    return EXIT_OK


def cmd_privatize(args) -> int:
    deg = read_degree_csv(args.degrees)
    if isinstance(deg, PrivateBiDegree):
        raise UsageError("input already holds released (z_*) degrees")
    z = privatize(deg, PrivacyBudget(args.eps), args.q, args.seed)
    _write_or_print(write_degree_csv(z), args.out)
    return EXIT_OK


def cmd_estimate(args) -> int:
    try:
        deg = read_degree_csv(args.degrees)
    except (OSError, ValueError) as exc:
        raise UsageError(f"cannot read degree file: {exc}") from exc
    spec = ModelSpec(deg.n, args.q)
    budget = None
    if args.eps > 0:
        if isinstance(deg, PrivateBiDegree):
            raise UsageError("input already holds released degrees; use --eps 0")
        budget = PrivacyBudget(args.eps)
        deg = privatize(deg, budget, spec.q, args.seed)
    opts = SolveOptions(tol=args.tol, max_iter=args.max_iter)
    if args.solver == "fixed-point" and args.max_iter == 100:
        opts = SolveOptions(tol=args.tol, max_iter=5000)
    report, result = estimate(MomentSystem.from_degrees(deg, spec), opts, solver=args.solver)
    _write_or_print(estimate_to_json(report, result, spec, budget) + "\n", args.out)
    if not report.converged:
        print(f"estimate does not exist: {report.status.value}", file=sys.stderr)
        return EXIT_NO_ESTIMATE
    return EXIT_OK


def cmd_experiment(args) -> int:
    if args.config is not None:
        try:
            doc = json.loads(Path(args.config).read_text(encoding="utf-8"))
            if not isinstance(doc, dict):
                raise ValueError("config must be a JSON object")
            if args.reps is not None:
                doc["reps"] = args.reps
            if args.seed is not None:
                doc["base_seed"] = args.seed
            config = harness.ExperimentConfig.from_dict(doc)
        except (OSError, ValueError, TypeError) as exc:
            raise UsageError(f"invalid config: {exc}") from exc
    else:
        kw = {}
        if args.reps is not None:
            kw["reps"] = args.reps
        if args.seed is not None:
            kw["base_seed"] = args.seed
        config = harness.ExperimentConfig(**kw)

    def progress(res):
        c = res.cell
        log.info("cell %d: n=%d eps=%s L=%s fail=%.2f%%", c.index, c.n,
                 harness.eps_label(c.eps_spec), c.L_spec, 100 * res.fail_freq)

    results = harness.run_table(config, threads=args.threads, progress=progress)
    _write_or_print(harness.results_csv(results), args.out)
    if args.qq_dir is not None:
        harness.write_qq_files(results, args.qq_dir)
    return EXIT_OK


def cmd_verify_dp(args) -> int:
    if args.n > 3 or args.q > 3:
        raise UsageError("exhaustive mode supports n <= 3 and q <= 3 only "
                         f"(got n={args.n}, q={args.q}); use a smaller instance")
    if args.n < 2:
        raise UsageError("--n must be >= 2")
    budget = PrivacyBudget(args.eps)
    scale = None
    if args.lambda_override is not None:
        if not 0.0 < args.lambda_override < 1.0:
            raise UsageError("--lambda-override must lie in (0, 1)")
        scale = NoiseScale.from_lambda(args.lambda_override, args.q)
    worst, ok = exhaustive_dp_check(args.n, args.q, budget, scale)
    lam = (scale or noise_scale(budget, args.q)).lam
    print(f"n={args.n} q={args.q} eps={args.eps:g} lambda={lam:.6g} "
          f"worst_log_ratio={worst:.6f} {'PASS' if ok else 'FAIL'}")
    return EXIT_OK if ok else EXIT_DP_FAIL


def cmd_selftest(args) -> int:
    checks = []
    p = edge_pmf(0.7, 4)
    checks.append(("pmf sums to one", abs(p.sum() - 1) < 1e-12))
    k = np.arange(4)
    m, v = edge_moments(0.7, 4)
    checks.append(("moments match brute force",
                   abs(m - p @ k) < 1e-12 and abs(v - (p @ k**2 - (p @ k) ** 2)) < 1e-10))
    spec = ModelSpec(10, 3)
    theta = harness.linear_parameters(10, 1.0)
    e = expected_degrees(theta, spec)
    report, _ = estimate(MomentSystem(e[:10], e[10:], spec))
    checks.append(("noiseless root recovery",
                   report.converged and np.abs(report.theta_hat.theta - theta.theta).max() < 1e-8))
    worst, ok = exhaustive_dp_check(2, 3, PrivacyBudget(1.0))
    checks.append(("exhaustive DP check n=2 q=3", ok and abs(worst - 1.0) < 1e-12))
    for name, passed in checks:
        print(f"{'ok  ' if passed else 'FAIL'} {name}")
    return EXIT_OK if all(p for _, p in checks) else EXIT_DP_FAIL


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="privp0", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="sample a weighted digraph to an edge-list file")
    p.add_argument("--n", type=int)
    p.add_argument("--q", type=int, default=5)
    p.add_argument("--L", type=float, help="linear layout range")
    p.add_argument("--params", help="JSON file with 'alpha' and 'beta'")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("degrees", help="edge list -> degree CSV")
    p.add_argument("edges")
    p.add_argument("--out")
    p.set_defaults(func=cmd_degrees)

    p = sub.add_parser("privatize", help="release a degree CSV with discrete Laplace noise")
    p.add_argument("degrees")
    p.add_argument("--eps", type=float, required=True)
    p.add_argument("--q", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_privatize)

    p = sub.add_parser("estimate", help="solve the moment equations for a degree CSV")
    p.add_argument("degrees")
    p.add_argument("--eps", type=float, default=0.0,
                   help="privacy budget for noising first; 0 = input already released")
    p.add_argument("--q", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--tol", type=float)
    p.add_argument("--max-iter", type=_positive_int, default=100)
    p.add_argument("--solver", choices=("newton", "fixed-point"), default="newton")
    p.add_argument("--out")
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("experiment", help="run the coverage table")
    p.add_argument("--config")
    p.add_argument("--out")
    p.add_argument("--reps", type=_positive_int)
    p.add_argument("--seed", type=int)
    p.add_argument("--threads", type=_positive_int, default=1)
    p.add_argument("--qq-dir")
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("verify-dp", help="exhaustive edge-DP check on a tiny instance")
    p.add_argument("--n", type=int, default=3)
    p.add_argument("--q", type=int, default=2)
    p.add_argument("--eps", type=float, required=True)
    p.add_argument("--lambda-override", type=float, help=argparse.SUPPRESS)
    p.set_defaults(func=cmd_verify_dp)

    p = sub.add_parser("selftest", help="quick internal consistency checks")
    p.set_defaults(func=cmd_selftest)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ValueError, OSError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
