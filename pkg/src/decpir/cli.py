"""Command-line interface: formula evaluators, Monte Carlo sweeps, and
privacy testing, with CSV output.

Exit codes: 0 success, 1 usage or configuration error, 2 invariant
violation (reliability, bound dominance, budget, or a failed privacy test).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Sequence

from .analysis import (
    capacity_classical,
    capacity_decentralized,
    centralized_envelope,
    converse_bound_realization,
    expected_converse_bound,
    minimize_expected_bound,
    uniform_profile,
)
from .errors import BudgetViolation, InvariantViolation, ProtocolError, ReliabilityError
from .model import partition_by_storage_set
from .placement import PlacementPolicy, UniformRandomPlacement, policy_from_dict
from .privacy import transcript_distribution_test
from .retrieval import simulate_trials
from .rng import derive_seed
from .placement import sample_placement

USAGE_EXIT = 1
INVARIANT_EXIT = 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse defaults to exit code 2
        self.print_usage(sys.stderr)
        self.exit(USAGE_EXIT, f"{self.prog}: error: {message}\n")


def parse_mu(text: str) -> Fraction:
    """Parse a storage ratio given as a rational string ('1/3' or '0.5')."""
    try:
        mu = Fraction(text)
    except (ValueError, ZeroDivisionError) as exc:
        raise ValueError(f"cannot parse storage ratio {text!r}") from exc
    if mu < 0 or mu > 1:
        raise ValueError(f"storage ratio must lie in [0, 1], got {text}")
    return mu


def _fmt(value) -> str:
    if isinstance(value, Fraction):
        return str(value)
    if isinstance(value, float):
        return f"{value:.12g}"
    return str(value)


def _print_value(label: str, value: Fraction) -> None:
    print(f"{label} = {value} ≈ {float(value):.6f}")


@dataclass
class ExperimentConfig:
    k: int
    n: int
    mu: Fraction
    file_bits: int
    trials: int
    seed: int
    policy: PlacementPolicy
    out: Optional[str]


def _load_config(args) -> ExperimentConfig:
    doc = {}
    if args.config:
        with open(args.config) as fh:
            doc = json.load(fh)
    merged = {
        "k": args.k if args.k is not None else doc.get("k"),
        "n": args.n if args.n is not None else doc.get("n"),
        "mu": args.mu if args.mu is not None else doc.get("mu"),
        "file_bits": args.file_bits
        if args.file_bits is not None
        else doc.get("file_bits"),
        "trials": args.trials if args.trials is not None else doc.get("trials", 1),
        "seed": args.seed if args.seed is not None else doc.get("seed", 0),
        "out": args.out if args.out is not None else doc.get("out"),
    }
    missing = [key for key in ("k", "n", "mu", "file_bits") if merged[key] is None]
    if missing:
        raise ValueError(f"missing required config fields: {', '.join(missing)}")
    mu = parse_mu(str(merged["mu"]))
    policy_doc = doc.get("policy", {"kind": "uniform-random"})
    if getattr(args, "policy", None):
        policy_doc = {"kind": args.policy}
        if args.files:
            policy_doc["files"] = [int(f) for f in args.files.split(",")]
    if policy_doc.get("kind", "uniform-random") == "uniform-random":
        policy_doc.setdefault("mu", str(mu))
    policy = policy_from_dict(policy_doc)
    return ExperimentConfig(
        k=int(merged["k"]),
        n=int(merged["n"]),
        mu=mu,
        file_bits=int(merged["file_bits"]),
        trials=int(merged["trials"]),
        seed=int(merged["seed"]),
        policy=policy,
        out=merged["out"],
    )


def _write_csv(path: Optional[str], header, rows, comments=()) -> None:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_fmt(v) for v in row])
    for line in comments:
        buffer.write(f"# {line}\n")
    text = buffer.getvalue()
    if path:
        with open(path, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def cmd_capacity(args) -> int:
    mu = parse_mu(args.mu)
    value = capacity_decentralized(args.k, args.n, mu)
    _print_value(f"capacity(K={args.k}, N={args.n}, mu={mu})", value)
    return 0


def cmd_classical(args) -> int:
    value = capacity_classical(args.k, args.n)
    _print_value(f"classical(K={args.k}, n={args.n})", value)
    return 0


def cmd_envelope(args) -> int:
    env = centralized_envelope(args.k, args.n)
    rows = [(t, mu, cost) for t, (mu, cost) in enumerate(env.corners)]
    _write_csv(args.out, ["t", "mu", "cost"], rows)
    if args.mu is not None:
        mu = parse_mu(args.mu)
        _print_value(f"envelope(K={args.k}, N={args.n}, mu={mu})", env.evaluate(mu))
    return 0


def cmd_simulate(args) -> int:
    config = _load_config(args)
    result = simulate_trials(
        config.k,
        config.file_bits,
        config.n,
        config.mu,
        config.policy,
        config.trials,
        config.seed,
    )
    rows = [
        (r.trial, r.desired, r.total, r.ideal, r.normalized, r.converse_bound, r.seed)
        for r in result.rows
    ]
    comments = [
        f"mean_D_over_L={_fmt(result.mean_normalized)}",
        f"std_D_over_L={_fmt(result.std_normalized)}",
        f"formula={result.formula}",
        f"relative_gap={_fmt(result.relative_gap)}",
    ]
    _write_csv(
        args.out,
        ["trial", "theta", "total_D", "ideal_D", "D_over_L", "converse_bound", "seed"],
        rows,
        comments,
    )
    print(
        f"mean D/L = {result.mean_normalized:.6f} over {config.trials} trials; "
        f"formula {result.formula} ≈ {float(result.formula):.6f}; "
        f"relative gap {result.relative_gap:.4%}"
    )
    return 0


def cmd_sweep(args) -> int:
    mu = parse_mu(args.mu) if args.mu is not None else None
    rows = []
    if args.vary == "n":
        if args.k is None or mu is None:
            raise ValueError("sweeping N requires --k and --mu")
        points = list(range(args.start, args.to + 1))
        env = None
    else:
        if args.k is None or args.n is None:
            raise ValueError("sweeping mu requires --k and --n")
        points = [Fraction(i, args.points - 1) for i in range(args.points)]
        env = centralized_envelope(args.k, args.n) if args.envelope else None

    for index, point in enumerate(points):
        if args.vary == "n":
            formula = capacity_decentralized(args.k, point, mu)
            envelope_cost = ""
            sim_args = (args.k, point, mu)
        else:
            formula = capacity_decentralized(args.k, args.n, point)
            envelope_cost = env.evaluate(point) if env else ""
            sim_args = (args.k, args.n, point)
        sim_mean = sim_std = ""
        if args.trials:
            k, n, ratio = sim_args
            result = simulate_trials(
                k,
                args.file_bits,
                n,
                ratio,
                UniformRandomPlacement(Fraction(ratio)),
                args.trials,
                derive_seed(args.seed, index),
            )
            sim_mean, sim_std = result.mean_normalized, result.std_normalized
        rows.append((point, formula, envelope_cost, sim_mean, sim_std))
    _write_csv(
        args.out,
        ["param", "formula_cost", "envelope_cost", "sim_mean", "sim_std"],
        rows,
    )
    return 0


def cmd_converse(args) -> int:
    mu = parse_mu(args.mu)
    profile = uniform_profile(args.k, args.file_bits, mu)
    expected = expected_converse_bound(profile, args.n, mu=mu)
    _print_value(
        f"expected_bound(K={args.k}, N={args.n}, mu={mu}, L={args.file_bits})",
        expected,
    )
    if args.trials:
        values = []
        for t in range(args.trials):
            realization = sample_placement(
                UniformRandomPlacement(mu),
                args.k,
                args.file_bits,
                args.n,
                derive_seed(args.seed, t),
            )
            values.append(
                float(converse_bound_realization(
                    partition_by_storage_set(realization)
                ).bound)
            )
        mean = sum(values) / len(values)
        print(
            f"mean realization bound over {args.trials} placements = {mean:.6f}"
        )
    return 0


def cmd_optimize(args) -> int:
    mu = parse_mu(args.mu)
    result = minimize_expected_bound(
        args.k, args.n, mu, args.file_bits, restarts=args.restarts, seed=args.seed
    )
    print(f"uniform value   = {result.uniform_value:.12g}")
    print(f"best value      = {result.best_value:.12g}")
    print(f"delta           = {result.best_value - result.uniform_value:.3e}")
    print(f"pg norm uniform = {result.pg_norm_uniform:.3e}")
    print(f"pg norm best    = {result.pg_norm_best:.3e}")
    print(f"converged       = {result.converged}")
    for l, (best, uni) in enumerate(
        zip(result.per_size_best, result.per_size_uniform), start=1
    ):
        print(f"mass size {l}: best={best:.6g} uniform={uni:.6g}")
    return 0


def cmd_privacy_test(args) -> int:
    block = args.n**args.k
    if args.k > 3 or args.n > 3 or args.file_bits > 2 * block:
        raise ValueError(
            "instance too large to bin transcripts; use K <= 3, n <= 3 and at "
            f"most two {block}-symbol blocks"
        )
    result = transcript_distribution_test(
        args.k,
        args.n,
        args.file_bits,
        args.sessions,
        args.seed,
        permute=not args.no_permute,
        significance=args.significance,
    )
    print(f"structural histograms theta-invariant: {result.structural_ok}")
    for c in result.comparisons:
        print(
            f"store {c.store} theta {c.desired_a} vs {c.desired_b}: "
            f"chi2={c.statistic:.2f} df={c.dof} p={c.p_value:.4g}"
        )
    print(f"privacy test {'PASS' if result.ok else 'FAIL'} at {args.significance}")
    return 0 if result.ok else INVARIANT_EXIT


def _add_common(sub, *names):
    if "k" in names:
        sub.add_argument("--k", type=int, required=True, help="number of files")
    if "n" in names:
        sub.add_argument("--n", type=int, required=True, help="database/replica count")
    if "mu" in names:
        sub.add_argument("--mu", required=True, help="storage ratio, e.g. 1/3 or 0.5")
    if "file-bits" in names:
        sub.add_argument("--file-bits", type=int, required=True, help="bits per file")
    if "seed" in names:
        sub.add_argument("--seed", type=int, default=0)
    if "out" in names:
        sub.add_argument("--out", help="CSV output path (default stdout)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="decpir")
    subs = parser.add_subparsers(dest="command", required=True)

    p = subs.add_parser("capacity", parents=[], help="decentralized-caching cost formula")
    _add_common(p, "k", "n", "mu")
    p.set_defaults(func=cmd_capacity)

    p = subs.add_parser("classical", help="replicated-store cost formula")
    _add_common(p, "k", "n")
    p.set_defaults(func=cmd_classical)

    p = subs.add_parser("envelope", help="centralized-placement tradeoff corners")
    _add_common(p, "k", "n", "out")
    p.add_argument("--mu", help="also evaluate the envelope at this ratio")
    p.set_defaults(func=cmd_envelope)

    p = subs.add_parser("simulate", help="Monte Carlo placement+retrieval trials")
    p.add_argument("--k", type=int)
    p.add_argument("--n", type=int)
    p.add_argument("--mu")
    p.add_argument("--file-bits", type=int)
    p.add_argument("--trials", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--config", help="JSON config file; flags override its fields")
    p.add_argument("--out")
    p.add_argument(
        "--policy", choices=["uniform-random", "whole-file-prefix"], default=None
    )
    p.add_argument("--files", help="comma-separated file list for whole-file-prefix")
    p.set_defaults(func=cmd_simulate)

    p = subs.add_parser("sweep", help="cost sweeps over N or mu")
    p.add_argument("--vary", choices=["n", "mu"], required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--n", type=int, help="fixed N when varying mu")
    p.add_argument("--mu", help="fixed ratio when varying N")
    p.add_argument("--start", type=int, default=0, help="first N when varying N")
    p.add_argument("--to", type=int, default=30, help="last N when varying N")
    p.add_argument("--points", type=int, default=21, help="grid size when varying mu")
    p.add_argument("--envelope", action="store_true", help="add the centralized column")
    p.add_argument("--trials", type=int, default=0, help="add simulated columns")
    p.add_argument("--file-bits", type=int, default=1080)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_sweep)

    p = subs.add_parser("converse", help="expected lower bound and sampled bounds")
    _add_common(p, "k", "n", "mu", "file-bits", "seed")
    p.add_argument("--trials", type=int, default=0)
    p.set_defaults(func=cmd_converse)

    p = subs.add_parser("optimize", help="minimize the expected bound over marginals")
    _add_common(p, "k", "n", "mu", "file-bits", "seed")
    p.add_argument("--restarts", type=int, default=20)
    p.set_defaults(func=cmd_optimize)

    p = subs.add_parser("privacy-test", help="transcript indistinguishability test")
    _add_common(p, "k", "n", "file-bits", "seed")
    p.add_argument("--sessions", type=int, default=10_000)
    p.add_argument("--significance", type=float, default=0.01)
    p.add_argument(
        "--no-permute",
        action="store_true",
        help="negative control: skip permutations (expected to fail)",
    )
    p.set_defaults(func=cmd_privacy_test)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (BudgetViolation, ReliabilityError, InvariantViolation, ProtocolError) as exc:
        print(f"invariant violation: {exc}", file=sys.stderr)
        return INVARIANT_EXIT
    except (ValueError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE_EXIT


if __name__ == "__main__":
    sys.exit(main())
