"""Command-line front end.

Subcommands:

* ``simulate``  - run a Monte-Carlo estimator sweep and write a results CSV
* ``estimate``  - estimate a property from user-supplied count files
* ``coeffs``    - dump an amplified-estimator coefficient table as CSV
* ``selfcheck`` - run the numerical validation suite

Exit codes: 0 success, 1 usage error, 2 runtime or check failure.  All
randomness flows from ``--seed`` (default 1729), so reruns are byte-identical.
"""

from __future__ import annotations

import argparse
import math
import sys

import numpy as np

from .benchmark import (
    ESTIMATORS,
    ExperimentConfig,
    results_to_csv,
    run_experiment,
)
from .distributions import FAMILIES, SPLIT_MODES, Histogram, SplitSample
from .estimators import (
    EstimatorParams,
    ParameterError,
    amplified_estimate_detailed,
    build_coefficient_table,
    derive_params,
    empirical,
    modified_empirical,
)
from .properties import PropertySpec
from .selfcheck import run_selfcheck

__all__ = ["main"]

DEFAULT_SEED = 1729

PROPERTY_ALIASES = {
    "entropy": "entropy",
    "support_size": "support_size",
    "coverage": "support_coverage",
    "support_coverage": "support_coverage",
    "power_sum": "power_sum",
    "uniformity": "dist_to_uniform",
    "dist_to_uniform": "dist_to_uniform",
    "l1": "l1_distance",
    "l1_distance": "l1_distance",
    "kl": "kl_divergence",
    "kl_divergence": "kl_divergence",
}


class UsageError(Exception):
    """Bad flags or malformed input files."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse default exits 2; usage errors are 1
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def _spec_from_args(args) -> PropertySpec:
    kind = PROPERTY_ALIASES.get(args.property)
    if kind is None:
        raise UsageError(f"unknown property {args.property!r}")
    try:
        if kind == "entropy":
            return PropertySpec("entropy")
        if kind == "support_size":
            if args.k is None:
                raise UsageError("support_size requires --k")
            return PropertySpec("support_size", k=args.k)
        if kind == "support_coverage":
            m = args.m if args.m is not None else 5000.0
            return PropertySpec("support_coverage", m=m)
        if kind == "power_sum":
            if args.a is None:
                raise UsageError("power_sum requires --a (exponent > 1)")
            return PropertySpec("power_sum", a=args.a)
        if kind == "dist_to_uniform":
            if args.k is None:
                raise UsageError("uniformity requires --k")
            return PropertySpec("dist_to_uniform", k=args.k)
        q = _reference_from_args(args)
        return PropertySpec(kind, q=q)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def _reference_from_args(args) -> np.ndarray:
    if getattr(args, "q_file", None):
        try:
            with open(args.q_file, encoding="utf-8") as f:
                vals = [float(line.strip()) for line in f if line.strip()]
        except OSError as exc:
            raise UsageError(f"cannot read --q-file: {exc}") from exc
        except ValueError as exc:
            raise UsageError(f"malformed --q-file: {exc}") from exc
        return np.array(vals)
    if getattr(args, "q", None) == "uniform":
        if args.k is None:
            raise UsageError("--q uniform requires --k")
        return np.full(args.k, 1.0 / args.k)
    raise UsageError("this property requires --q-file or --q uniform")


def _parse_n_grid(text: str) -> tuple[int, ...]:
    try:
        if ":" in text:
            lo_s, hi_s, pts_s = text.split(":")
            lo, hi, pts = int(lo_s), int(hi_s), int(pts_s)
            if lo <= 0 or hi <= lo or pts < 2:
                raise ValueError("need 0 < lo < hi and points >= 2")
            grid = np.unique(np.round(np.geomspace(lo, hi, pts)).astype(int))
            return tuple(int(n) for n in grid)
        grid = tuple(int(tok) for tok in text.split(","))
    except ValueError as exc:
        raise UsageError(f"malformed --n-grid {text!r}: {exc}") from exc
    if not grid or any(b <= a for a, b in zip(grid, grid[1:])) or grid[0] <= 0:
        raise UsageError("--n-grid must be positive and strictly increasing")
    return grid


def _read_counts(path: str) -> Histogram:
    """Parse a ``symbol,count`` file (optional ``symbol,count`` header)."""
    counts: dict = {}
    try:
        with open(path, encoding="utf-8") as f:
            lines = [line.strip() for line in f]
    except OSError as exc:
        raise UsageError(f"cannot read counts file: {exc}") from exc
    body = [line for line in lines if line]
    if body and body[0].lower().replace(" ", "") == "symbol,count":
        body = body[1:]
    for i, line in enumerate(body, start=1):
        parts = line.split(",")
        if len(parts) != 2:
            raise UsageError(f"{path}: line {i}: expected 'symbol,count'")
        sym, count_s = parts[0].strip(), parts[1].strip()
        try:
            count = int(count_s)
        except ValueError as exc:
            raise UsageError(f"{path}: line {i}: count {count_s!r} not an integer") from exc
        if count <= 0:
            raise UsageError(f"{path}: line {i}: counts must be positive")
        if sym in counts:
            raise UsageError(f"{path}: duplicate symbol {sym!r}")
        counts[sym] = count
    return Histogram(counts)


def _dist_params_from_args(args) -> dict:
    params = {}
    if args.zipf_power is not None:
        params.setdefault("power", args.zipf_power)
    if args.binom_prob is not None and args.dist == "binomial":
        params["prob"] = args.binom_prob
    if args.geom_prob is not None and args.dist == "geometric":
        params["prob"] = args.geom_prob
    if args.poisson_mean is not None:
        params["mean"] = args.poisson_mean
    if args.dirichlet_conc is not None:
        params["concentration"] = args.dirichlet_conc
    return params


def _amplified_params_from_args(args, total_n: float, spec: PropertySpec, split_mode: str) -> EstimatorParams:
    if args.preset and args.alpha is not None:
        raise UsageError("--preset and --alpha are mutually exclusive")
    if args.t is not None or args.s0 is not None:
        if args.t is None or args.s0 is None:
            raise UsageError("--t and --s0 must be given together")
        if args.alpha is not None:
            raise UsageError("--t/--s0 and --alpha are mutually exclusive")
        rate = total_n / 2.0 if split_mode == "thinned" else float(total_n)
        return EstimatorParams.from_t_s0(
            rate, args.t, args.s0, t_decay=args.t_decay, v_max=args.v_max
        )
    return derive_params(
        total_n,
        spec,
        preset=args.alpha is None,
        alpha=args.alpha,
        s0_mult=args.s0_mult,
        split_mode=split_mode,
        t_decay=args.t_decay,
        v_max=args.v_max,
    )


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def cmd_simulate(args) -> int:
    spec = _spec_from_args(args)
    k = args.k if args.k is not None else (1000 if spec.kind == "support_coverage" else 10000)
    if args.n_grid is not None:
        n_grid = _parse_n_grid(args.n_grid)
    elif spec.kind == "support_coverage":
        n_grid = (1000, 1500, 2000, 2500, 3000)
    else:
        n_grid = _parse_n_grid("1000:100000:10")
    estimators = tuple(tok.strip() for tok in args.estimators.split(","))
    unknown = set(estimators) - set(ESTIMATORS)
    if unknown:
        raise UsageError(f"unknown estimators {sorted(unknown)}; choose from {ESTIMATORS}")
    if (args.alpha is None) != (args.s0_mult is None):
        raise UsageError("--alpha and --s0-mult must be given together")
    if args.preset and args.alpha is not None:
        raise UsageError("--preset and --alpha are mutually exclusive")

    try:
        cfg = ExperimentConfig(
            spec=spec,
            family=args.dist,
            k=k,
            n_grid=n_grid,
            trials=args.trials,
            seed=args.seed,
            estimators=estimators,
            split_mode=args.split_mode,
            dist_params=_dist_params_from_args(args),
            poissonized=not args.fixed_size,
            alpha=args.alpha,
            s0_mult=args.s0_mult,
            t_decay=args.t_decay,
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from exc

    rows = run_experiment(cfg, threads=args.threads)

    if args.dump_dist:
        from .benchmark import trial_seed
        from .distributions import make_distribution

        dist_rng = np.random.default_rng(trial_seed(cfg.seed, 0, "distribution", 0))
        dist = make_distribution(cfg.family, cfg.k, cfg.dist_params, rng=dist_rng)
        with open(args.dump_dist, "w", encoding="utf-8", newline="") as f:
            for p in dist.probs:
                f.write(_fmt(p) + "\n")

    try:
        with open(args.out, "w", encoding="utf-8", newline="") as f:
            f.write(results_to_csv(rows))
    except OSError as exc:
        print(f"error: cannot write {args.out}: {exc}", file=sys.stderr)
        return 2

    failed = [row for row in rows if row.error is not None]
    for row in failed:
        print(
            f"warning: cell n={row.n} estimator={row.estimator} failed: {row.error}",
            file=sys.stderr,
        )
    if failed and args.strict:
        return 2
    return 0


def cmd_estimate(args) -> int:
    spec = _spec_from_args(args)
    first = _read_counts(args.counts)
    lines: list[str] = [f"property={spec.kind}", f"estimator={args.estimator}"]

    if args.estimator == "empirical":
        value = empirical(first, spec)
    elif args.estimator == "modified_empirical":
        if args.rate is None:
            raise UsageError("modified_empirical requires --rate")
        value = modified_empirical(first, args.rate, spec)
        lines.append(f"rate={_fmt(args.rate)}")
    else:  # amplified
        if args.rate is None:
            raise UsageError("amplified requires --rate")
        if args.counts2 is not None:
            second = _read_counts(args.counts2)
            split_mode = "two_stream"
        else:
            print(
                "warning: no --counts2 given; reusing the first stream for the "
                "small/large split (shared mode, streams fully dependent)",
                file=sys.stderr,
            )
            second = first
            split_mode = "shared"
        try:
            params = _amplified_params_from_args(args, args.rate, spec, "two_stream")
        except ParameterError as exc:
            raise UsageError(str(exc)) from exc
        sample = SplitSample(first=first, second=second, rate=float(args.rate))
        detail = amplified_estimate_detailed(sample, spec, params)
        value = detail.value
        lines += [
            f"split_mode={split_mode}",
            f"rate={_fmt(params.rate)}",
            f"t={_fmt(params.t)}",
            f"s0={params.s0}",
            f"u_max={params.u_max}",
            f"r={params.r}",
            f"t_decay={int(params.t_decay)}",
            f"small_sum={_fmt(detail.small_sum)}",
            f"large_sum={_fmt(detail.large_sum)}",
            f"report_offset={_fmt(detail.report_offset)}",
            f"n_small={detail.n_small}",
            f"n_large={detail.n_large}",
            f"n_overflow={detail.n_overflow}",
            f"n_clamped={detail.n_clamped}",
            f"n_cancelled={detail.n_cancelled}",
        ]

    lines.insert(0, f"estimate={_fmt(value)}")
    print("\n".join(lines))
    return 0


def cmd_coeffs(args) -> int:
    spec = _spec_from_args(args)
    if spec.q is not None and args.q_x is None:
        raise UsageError(f"{spec.kind} tables depend on --q-x (the reference mass)")
    try:
        params = _amplified_params_from_args(args, args.rate, spec, "two_stream")
    except ParameterError as exc:
        raise UsageError(str(exc)) from exc
    table = build_coefficient_table(spec, params, q_x=args.q_x)
    try:
        with open(args.out, "w", encoding="utf-8", newline="") as f:
            f.write("v,h_v_times_vfact,clamped\n")
            for v in range(1, table.v_max + 1):
                f.write(f"{v},{_fmt(table.values[v])},{int(table.clamped[v])}\n")
    except OSError as exc:
        print(f"error: cannot write {args.out}: {exc}", file=sys.stderr)
        return 2
    return 0


def cmd_selfcheck(args) -> int:
    results = run_selfcheck(deep=args.deep)
    failures = 0
    for res in results:
        status = "PASS" if res.passed else "FAIL"
        print(f"[{status}] {res.name}: {res.detail}")
        failures += 0 if res.passed else 1
    if failures:
        print(f"{failures} of {len(results)} checks failed", file=sys.stderr)
        return 2
    return 0


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


def _add_property_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument(
        "--property",
        required=True,
        choices=sorted(PROPERTY_ALIASES),
        help="property to estimate (aliases: coverage, uniformity, l1, kl)",
    )
    p.add_argument("--k", type=int, help="support-size normalizer / symbol count")
    p.add_argument("--m", type=float, help="coverage horizon (support_coverage)")
    p.add_argument("--a", type=float, help="power-sum exponent, must be > 1")
    p.add_argument("--q-file", help="reference distribution, one probability per line")
    p.add_argument("--q", choices=["uniform"], help="reference shorthand (needs --k)")


def _add_amplified_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--preset", action="store_true", help="use per-property preset tuning (default)")
    p.add_argument("--alpha", type=float, help="manual tuning: t = log(n)^(1-alpha) + 1")
    p.add_argument("--s0-mult", type=float, help="manual tuning: s0 = round(s0_mult * log(n)^0.2)")
    p.add_argument("--t", type=float, help="explicit amplification parameter")
    p.add_argument("--s0", type=int, help="explicit small/large threshold")
    p.add_argument("--v-max", type=int, help="coefficient table size (default max(4r, 200))")
    p.add_argument(
        "--t-decay",
        action=argparse.BooleanOptionalAction,
        default=True,
        help="decay the amplification per count when building coefficients",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="propest", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="Monte-Carlo estimator sweep, writes a results CSV")
    _add_property_flags(sim)
    sim.add_argument("--dist", required=True, choices=FAMILIES, help="distribution family")
    sim.add_argument("--n-grid", help="'1000,3162,10000' or 'lo:hi:points' (log-spaced)")
    sim.add_argument("--trials", type=int, default=100, help="trials per cell (default 100)")
    sim.add_argument("--seed", type=int, default=DEFAULT_SEED, help=f"master seed (default {DEFAULT_SEED})")
    sim.add_argument(
        "--estimators",
        default="amplified,empirical",
        help=f"comma list from {','.join(ESTIMATORS)}",
    )
    sim.add_argument("--split-mode", default="two_stream", choices=SPLIT_MODES)
    sim.add_argument("--out", required=True, help="output CSV path")
    sim.add_argument("--threads", type=int, default=1, help="trial parallelism (same output for any value)")
    sim.add_argument("--strict", action="store_true", help="exit 2 if any cell fails")
    sim.add_argument("--fixed-size", action="store_true", help="plug-in draws use exactly n samples")
    sim.add_argument("--dump-dist", help="also write the probability vector, one per line")
    sim.add_argument("--zipf-power", type=float, help="zipf power (default 1.5)")
    sim.add_argument("--binom-prob", type=float, help="binomial success probability (default 0.3)")
    sim.add_argument("--geom-prob", type=float, help="geometric success probability (default 0.99)")
    sim.add_argument("--poisson-mean", type=float, help="poisson mean (default 3000)")
    sim.add_argument("--dirichlet-conc", type=float, help="dirichlet concentration (default 2)")
    _add_amplified_flags(sim)
    sim.set_defaults(func=cmd_simulate, t=None, s0=None)

    est = sub.add_parser("estimate", help="estimate a property from count files")
    _add_property_flags(est)
    est.add_argument("--counts", required=True, help="first stream, lines of 'symbol,count'")
    est.add_argument("--counts2", help="second stream; absent means shared mode")
    est.add_argument("--rate", type=float, help="Poisson rate n behind the counts")
    est.add_argument(
        "--estimator",
        default="amplified",
        choices=["empirical", "modified_empirical", "amplified"],
    )
    _add_amplified_flags(est)
    est.set_defaults(func=cmd_estimate)

    coe = sub.add_parser("coeffs", help="dump a coefficient table as CSV")
    _add_property_flags(coe)
    coe.add_argument("--rate", type=float, required=True, help="Poisson rate n")
    coe.add_argument("--q-x", type=float, help="reference mass for l1/kl tables")
    coe.add_argument("--out", required=True, help="output CSV path")
    _add_amplified_flags(coe)
    coe.set_defaults(func=cmd_coeffs)

    chk = sub.add_parser("selfcheck", help="run the numerical validation suite")
    chk.add_argument("--deep", action="store_true", help="extended parameter grids")
    chk.set_defaults(func=cmd_selfcheck)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except ParameterError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
