"""Command-line entry point.

Exit codes: 0 success, 1 usage error, 2 bad input data, 3 capacity limit or
exhausted window escalation.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import harness
from .core import Permutation, format_permutations, parse_permutations
from .errors import CapacityError, DataError, DomainError, NoisySortError
from .noisy_comparisons import ReplaySource, SnsaParams, SnsaSource, write_signals

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_CAPACITY = 0, 1, 2, 3


class UsageError(Exception):
    pass


class Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return value


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--n", type=_positive_int, default=100)
    p.add_argument("--beta", type=float, default=1.0)
    p.add_argument("--r", type=_positive_int, default=5)
    p.add_argument("--lambda", dest="lam", type=float, default=0.2)
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0, help="master seed")
    p.add_argument("--k-window", type=_positive_int, default=None)
    p.add_argument("--c3", type=float, default=None)
    p.add_argument("--low-query", action="store_true")
    p.add_argument("--paper-constants", action="store_true")
    p.add_argument("--replay", type=Path, default=None, help="signal file with 'a b vote' lines")
    p.add_argument("--out", type=Path, default=None)
    p.add_argument("--format", choices=("json", "csv"), default=None,
                   help="default: text permutations for simulate-mallows, csv for "
                        "benchmark, json otherwise")
    p.add_argument("--no-timing", action="store_true", help="omit wall_time_ms")
    p.add_argument("--verbose", "-v", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = Parser(prog="noisy-sort", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=Parser)

    p = sub.add_parser("simulate-mallows", help="draw r samples from a Mallows model")
    _common(p)
    p.add_argument("--truth-out", type=Path, default=None)
    p.set_defaults(func=cmd_simulate_mallows)

    p = sub.add_parser("solve-mrp", help="aggregate permutations from a file")
    _common(p)
    p.add_argument("input", type=Path, help="one permutation per line, 1-based ranks")
    p.add_argument("--truth", type=Path, default=None, help="file holding the true permutation")
    p.add_argument("--oracle-check", action="store_true")
    p.add_argument("--no-beta", action="store_true", help="ignore --beta when picking the window")
    p.set_defaults(func=cmd_solve_mrp)

    p = sub.add_parser("simulate-snsa", help="draw every pairwise signal and write them out")
    _common(p)
    p.add_argument("--truth-out", type=Path, default=None)
    p.set_defaults(func=cmd_simulate_snsa)

    p = sub.add_parser("solve-snsa", help="order elements from noisy comparisons")
    _common(p)
    p.add_argument("--oracle-check", action="store_true")
    p.set_defaults(func=cmd_solve_snsa)

    p = sub.add_parser("benchmark", help="sweep a parameter grid, one CSV row per trial")
    _common(p)
    p.add_argument("--scenario", choices=("mrp", "snsa"), default=None,
                   help="default: snsa if the grid mentions lambda or queries are "
                        "requested, else mrp")
    p.add_argument("--grid", action="append", default=[], metavar="KEY=V1,V2",
                   help="keys n, beta, r, lambda; repeat for several keys")
    p.add_argument("--trials", type=_positive_int, default=1)
    p.add_argument("--metric", action="append", default=[],
                   help="keep only these metric columns (queries = distinct_queries)")
    p.set_defaults(func=cmd_benchmark)

    p = sub.add_parser("oracle-check", help="compare solvers with brute force on small instances")
    _common(p)
    p.add_argument("--trials", type=_positive_int, default=50)
    p.set_defaults(func=cmd_oracle_check, n=7)
    return parser


# -- helpers -------------------------------------------------------------------

def _emit(args, text: str) -> None:
    if not text.endswith("\n"):
        text += "\n"
    if args.out is None:
        sys.stdout.write(text)
    else:
        args.out.write_text(text)


def _render(args, reports: list[harness.RunReport]) -> str:
    timing = not args.no_timing
    if args.format == "csv":
        if not timing:
            rows = [r.flat() for r in reports]
            columns = [c for c in rows[0] if c not in harness.TIMING_FIELDS]
            return harness.reports_to_csv(reports, columns)
        return harness.reports_to_csv(reports)
    if len(reports) == 1:
        return reports[0].to_json(timing)
    return json.dumps([r.to_dict(timing) for r in reports], sort_keys=True)


def _check_lambda(lam: float) -> None:
    if not 0 < lam <= 0.5:
        raise UsageError("--lambda must lie in (0, 0.5]")


def _check_beta(beta: float) -> None:
    if not beta > 0 or not math.isfinite(beta):
        raise UsageError("--beta must be positive")


def _read_perms(path: Path) -> list[Permutation]:
    try:
        text = path.read_text()
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc.strerror}") from None
    perms = parse_permutations(text)
    if not perms:
        raise DataError(f"{path} holds no permutations")
    return perms


# -- subcommands ---------------------------------------------------------------

def cmd_simulate_mallows(args) -> int:
    _check_beta(args.beta)
    truth, samples = harness.simulate_mallows(args.n, args.beta, args.r, args.seed)
    if args.format == "json":
        text = json.dumps({"truth": (truth.rank + 1).tolist(),
                           "samples": [(s.rank + 1).tolist() for s in samples]})
    elif args.format == "csv":
        text = "\n".join(",".join(str(int(x) + 1) for x in s.rank) for s in samples)
    else:
        text = format_permutations(samples)
    _emit(args, text)
    if args.truth_out is not None:
        args.truth_out.write_text(format_permutations([truth]) + "\n")
    return EXIT_OK


def cmd_solve_mrp(args) -> int:
    samples = _read_perms(args.input)
    n = samples[0].n
    if any(s.n != n for s in samples):
        raise DataError("permutations have different lengths")
    truth = None
    if args.truth is not None:
        truth = _read_perms(args.truth)[0]
        if truth.n != n:
            raise DataError("truth has the wrong length")
    beta = None if args.no_beta else args.beta
    if beta is not None:
        _check_beta(beta)
    report = harness.mrp_report(samples, truth=truth, alpha=args.alpha, beta=beta,
                                k_window=args.k_window, paper_constants=args.paper_constants,
                                oracle=args.oracle_check, params={"input": args.input.name})
    _emit(args, _render(args, [report]))
    return EXIT_OK


def cmd_simulate_snsa(args) -> int:
    _check_lambda(args.lam)
    if args.out is None:
        raise UsageError("simulate-snsa needs --out for the signal file")
    source = harness.snsa_source(args.n, args.lam, args.seed)
    write_signals(source, args.out)
    if args.truth_out is not None:
        args.truth_out.write_text(format_permutations([source.truth]) + "\n")
    return EXIT_OK


def cmd_solve_snsa(args) -> int:
    _check_lambda(args.lam)
    c3 = args.c3
    if args.replay is not None:
        source = ReplaySource.from_file(args.replay)
        truth = None
        if c3 is None:
            c3 = 3.0 / args.lam ** 2
        params = {"replay": args.replay.name, "lambda": args.lam}
    else:
        source = harness.snsa_source(args.n, args.lam, args.seed)
        truth = source.truth
        params = {"lambda": args.lam}

    def log_insertion(record: dict) -> None:
        sys.stderr.write(json.dumps(record, sort_keys=True) + "\n")

    report = harness.snsa_report(source, truth=truth, seed=args.seed, alpha=args.alpha, c3=c3,
                                 k_window=args.k_window, low_query=args.low_query,
                                 paper_constants=args.paper_constants, params=params,
                                 oracle=args.oracle_check,
                                 on_insertion=log_insertion if args.verbose else None)
    _emit(args, _render(args, [report]))
    return EXIT_OK


_GRID_KEYS = {"n": int, "beta": float, "r": int, "lambda": float}


def parse_grid(specs: list[str]) -> dict[str, list]:
    grid: dict[str, list] = {}
    for spec in specs:
        key, sep, values = spec.partition("=")
        key = key.strip()
        if not sep or key not in _GRID_KEYS:
            raise UsageError(f"bad --grid entry {spec!r}; expected KEY=V1,V2 with KEY in "
                             f"{sorted(_GRID_KEYS)}")
        try:
            grid[key] = [_GRID_KEYS[key](v) for v in values.split(",") if v.strip()]
        except ValueError:
            raise UsageError(f"bad value in --grid {spec!r}") from None
        if not grid[key]:
            raise UsageError(f"--grid {key} has no values")
    return grid


def cmd_benchmark(args) -> int:
    grid = parse_grid(args.grid)
    wants_snsa = "lambda" in grid or args.low_query or "queries" in args.metric
    scenario = args.scenario or ("snsa" if wants_snsa else "mrp")
    if scenario == "snsa" and args.low_query:
        scenario = "snsa-low"
    ns = grid.get("n", [args.n])
    betas = grid.get("beta", [args.beta])
    rs = grid.get("r", [args.r])
    lams = grid.get("lambda", [args.lam])
    for b in betas:
        _check_beta(b)
    for lam in lams:
        _check_lambda(lam)
    if any(n < 1 for n in ns) or any(r < 1 for r in rs):
        raise UsageError("n and r must be positive")
    cells = []
    for n in ns:
        for beta in (betas if scenario == "mrp" else [args.beta]):
            for r in (rs if scenario == "mrp" else [args.r]):
                for lam in (lams if scenario != "mrp" else [args.lam]):
                    for trial in range(args.trials):
                        cells.append(harness.Cell(scenario, n, beta, r, lam, trial, args.seed,
                                                  args.alpha, args.c3, args.k_window,
                                                  args.paper_constants))
    reports = harness.run_cells(cells)
    metrics = [("distinct_queries" if m == "queries" else m) for m in args.metric]
    unknown = [m for m in metrics if m not in harness.METRICS]
    if unknown:
        raise UsageError(f"unknown metric(s) {unknown}")
    columns = None
    if metrics or args.no_timing:
        keep = metrics or [m for m in harness.METRICS if m not in harness.TIMING_FIELDS]
        columns = [c for c in reports[0].flat() if c not in harness.METRICS or c in keep]
        if args.no_timing:
            columns = [c for c in columns if c not in harness.TIMING_FIELDS]
    if args.format == "json":
        _emit(args, json.dumps([r.to_dict(not args.no_timing) for r in reports], sort_keys=True))
    else:
        _emit(args, harness.reports_to_csv(reports, columns))
    return EXIT_OK


def cmd_oracle_check(args) -> int:
    """Random small instances of both problems against brute force."""
    from .mallows import MallowsParams, sample_many, solve_mrp
    from .noisy_comparisons import build_score_matrix, solve_nsa
    from .oracle import MAX_N, brute_force_ml, brute_force_mrp
    from .query_efficient import solve_nsa_low_query

    if args.n > MAX_N:
        raise CapacityError(f"oracle-check is limited to n <= {MAX_N}")
    _check_beta(args.beta)
    _check_lambda(args.lam)
    rng = np.random.default_rng(harness.derive_seed(args.seed, "oracle-check"))
    mismatches = []
    for i in range(args.trials):
        n = int(rng.integers(2, args.n + 1))
        r = int(rng.integers(1, args.r + 1))
        seed = harness.derive_seed(args.seed, "oracle-check", i)
        truth = harness.random_truth(n, seed)
        ranks = sample_many(MallowsParams(n, args.beta, r, truth), r, seed)
        samples = [Permutation(row) for row in ranks]
        got = solve_mrp(samples).objective
        want = brute_force_mrp(samples).best_score
        if got != want:
            mismatches.append({"instance": i, "problem": "mrp", "n": n, "got": got, "want": want})
        src = SnsaSource(SnsaParams(n, args.lam, truth, seed))
        want = brute_force_ml(build_score_matrix(src)).best_score
        for name, solver in (("nsa", solve_nsa), ("nsa-low", solve_nsa_low_query)):
            src = SnsaSource(SnsaParams(n, args.lam, truth, seed))
            got = solver(src, seed=seed).score
            if got != want:
                mismatches.append({"instance": i, "problem": name, "n": n,
                                   "got": float(got), "want": float(want)})
    summary = {"schema_version": harness.SCHEMA_VERSION, "scenario": "oracle-check",
               "params": {"max_n": args.n, "beta": args.beta, "r": args.r, "lambda": args.lam,
                          "trials": args.trials, "seed": args.seed},
               "instances": args.trials, "mismatches": mismatches, "ok": not mismatches}
    _emit(args, json.dumps(summary, sort_keys=True))
    return EXIT_OK if not mismatches else EXIT_DATA


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.format is None and args.command != "simulate-mallows":
        args.format = "csv" if args.command == "benchmark" else "json"
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"noisy-sort: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except CapacityError as exc:
        print(f"noisy-sort: capacity: {exc}", file=sys.stderr)
        return EXIT_CAPACITY
    except DataError as exc:
        print(f"noisy-sort: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except DomainError as exc:
        print(f"noisy-sort: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NoisySortError as exc:
        print(f"noisy-sort: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
