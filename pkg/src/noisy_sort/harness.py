"""Seeded trial runners and the report format shared by the CLI and benchmarks."""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .core import Permutation, dislocation_distance, kemeny_distance, max_dislocation
from .errors import DomainError
from .mallows import MallowsParams, MrpConfig, sample_many, solve_mrp
from .noisy_comparisons import (NsaConfig, SignalSource, SnsaParams, SnsaSource,
                                build_score_matrix, solve_nsa)
from .query_efficient import InsertionConfig, solve_nsa_low_query

SCHEMA_VERSION = 1
METRICS = ("kemeny_to_truth", "dislocation", "max_dislocation", "objective",
           "distinct_queries", "escalations", "wall_time_ms")
TIMING_FIELDS = ("wall_time_ms",)


def derive_seed(master: int, stage: str, index: int = 0) -> int:
    """64-bit seed for one stage of a run.

    Hashes ``"master:stage:index"`` with BLAKE2b, so streams for different
    stages never depend on each other and adding a stage changes nothing else.
    """
    digest = hashlib.blake2b(f"{master}:{stage}:{index}".encode(), digest_size=8).digest()
    return int.from_bytes(digest, "little") >> 1


def thread_cap() -> int:
    """Worker count allowed by ``NOISY_SORT_THREADS`` (default: all cores)."""
    raw = os.environ.get("NOISY_SORT_THREADS")
    cores = os.cpu_count() or 1
    if raw is None or raw.strip() == "":
        return cores
    try:
        value = int(raw)
    except ValueError:
        raise DomainError(f"NOISY_SORT_THREADS must be an integer, got {raw!r}") from None
    if value < 1:
        raise DomainError("NOISY_SORT_THREADS must be at least 1")
    return min(value, cores)


@dataclass
class RunReport:
    scenario: str
    params: dict
    metrics: dict
    result: dict = field(default_factory=dict)
    extra: dict = field(default_factory=dict)
    schema_version: int = SCHEMA_VERSION

    def __post_init__(self) -> None:
        missing = [m for m in METRICS if m not in self.metrics]
        if missing:
            raise DomainError(f"report is missing metrics {missing}")

    def to_dict(self, timing: bool = True) -> dict:
        out = asdict(self)
        if not timing:
            for key in TIMING_FIELDS:
                out["metrics"].pop(key, None)
        return out

    def to_json(self, timing: bool = True) -> str:
        return json.dumps(self.to_dict(timing), sort_keys=True)

    def flat(self) -> dict:
        """One CSV row: params, then metrics, then scalar extras."""
        row = {"scenario": self.scenario, "schema_version": self.schema_version}
        row.update({k: _cell(v) for k, v in sorted(self.params.items())})
        row.update({k: self.metrics[k] for k in METRICS})
        row.update({k: _cell(v) for k, v in sorted(self.extra.items())
                    if not isinstance(v, (list, dict))})
        return row


def _cell(v):
    if isinstance(v, float) and math.isinf(v):
        return "inf"
    if v is None:
        return ""
    return v


def reports_to_csv(reports: list[RunReport], columns: list[str] | None = None) -> str:
    rows = [r.flat() for r in reports]
    if columns is None:
        columns = []
        for row in rows:
            columns.extend(k for k in row if k not in columns)
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=columns, extrasaction="ignore", lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)
    return buf.getvalue()


def truth_metrics(order: Permutation, truth: Permutation | None) -> dict:
    if truth is None:
        return {"kemeny_to_truth": None, "dislocation": None, "max_dislocation": None}
    return {"kemeny_to_truth": kemeny_distance(order, truth),
            "dislocation": dislocation_distance(order, truth),
            "max_dislocation": max_dislocation(order, truth)}


def random_truth(n: int, seed: int) -> Permutation:
    return Permutation.from_order(np.random.default_rng(derive_seed(seed, "truth")).permutation(n))


# -- Mallows reconstruction ----------------------------------------------------

def simulate_mallows(n: int, beta: float, r: int, seed: int) -> tuple[Permutation, list[Permutation]]:
    params = MallowsParams(n, beta, r, random_truth(n, seed))
    ranks = sample_many(params, r, derive_seed(seed, "mallows"))
    return params.truth, [Permutation(row) for row in ranks]


def mrp_report(samples: list[Permutation], *, truth: Permutation | None = None,
               alpha: float = 1.0, beta: float | None = None, k_window=None,
               paper_constants: bool = False, params: dict | None = None,
               oracle: bool = False) -> RunReport:
    config = MrpConfig(alpha=alpha, beta=beta, window_k="auto" if k_window is None else k_window,
                       paper_constants=paper_constants)
    start = time.perf_counter()
    res = solve_mrp(samples, config)
    elapsed = (time.perf_counter() - start) * 1000
    metrics = truth_metrics(res.order, truth)
    metrics.update(objective=res.objective, distinct_queries=None,
                   escalations=res.escalations, wall_time_ms=round(elapsed, 3))
    extra = {"window": res.window, "verified": res.verified}
    if oracle:
        from .oracle import brute_force_mrp

        extra["oracle_match"] = brute_force_mrp(samples).best_score == res.objective
    echo = {"n": res.order.n, "r": len(samples), "alpha": alpha, "beta": beta,
            "k_window": k_window, "paper_constants": paper_constants}
    echo.update(params or {})
    result = {"order": (res.order.order + 1).tolist(), "score": res.objective,
              "distinct_queries": None, "escalations": res.escalations}
    return RunReport("mrp", echo, metrics, result, extra)


def run_mrp_trial(n: int, beta: float, r: int, seed: int, *, alpha: float = 1.0,
                  k_window=None, paper_constants: bool = False, oracle: bool = False) -> RunReport:
    truth, samples = simulate_mallows(n, beta, r, seed)
    return mrp_report(samples, truth=truth, alpha=alpha, beta=beta, k_window=k_window,
                      paper_constants=paper_constants, oracle=oracle, params={"seed": seed})


# -- noisy comparisons ---------------------------------------------------------

def snsa_source(n: int, lam: float, seed: int) -> SnsaSource:
    return SnsaSource(SnsaParams(n, lam, random_truth(n, seed), derive_seed(seed, "signals")))


def snsa_report(source: SignalSource, *, truth: Permutation | None = None, seed: int = 0,
                alpha: float = 1.0, c3: float | None = None, k_window=None,
                low_query: bool = False, paper_constants: bool = False,
                params: dict | None = None, oracle: bool = False,
                on_insertion=None) -> RunReport:
    window = {} if k_window is None else {"dp_window": int(k_window),
                                          "cap_k": max(int(k_window), NsaConfig.cap_k)}
    nsa = NsaConfig(alpha=alpha, c3=c3, paper_constants=paper_constants, **window)
    solver_seed = derive_seed(seed, "chain")
    start = time.perf_counter()
    if low_query:
        ins = InsertionConfig(paper_constants=paper_constants)
        res = solve_nsa_low_query(source, ins, nsa, seed=solver_seed)
    else:
        res = solve_nsa(source, nsa, seed=solver_seed)
    elapsed = (time.perf_counter() - start) * 1000
    metrics = truth_metrics(res.order, truth)
    metrics.update(objective=_number(res.score), distinct_queries=res.distinct_queries,
                   escalations=res.escalations, wall_time_ms=round(elapsed, 3))
    extra: dict = {}
    if low_query:
        extra["budget"] = res.budget
        extra["max_insertion_queries"] = max((x["queries"] for x in res.insertions), default=0)
        if on_insertion is not None:
            for record in res.insertions:
                on_insertion(record)
    if oracle:
        from .oracle import brute_force_ml

        best = brute_force_ml(build_score_matrix(source))
        extra["oracle_match"] = _number(best.best_score) == metrics["objective"]
    echo = {"n": source.n, "alpha": alpha, "c3": c3, "k_window": k_window,
            "low_query": low_query, "paper_constants": paper_constants, "seed": seed}
    echo.update(params or {})
    result = res.to_json()
    result["score"] = _number(result["score"])
    return RunReport("snsa-low" if low_query else "snsa", echo, metrics, result, extra)


def _number(x):
    if isinstance(x, (np.integer, int)):
        return int(x)
    x = float(x)
    return int(x) if x.is_integer() else x


def run_snsa_trial(n: int, lam: float, seed: int, **kwargs) -> RunReport:
    source = snsa_source(n, lam, seed)
    kwargs.setdefault("params", {})["lambda"] = lam
    return snsa_report(source, truth=source.truth, seed=seed, **kwargs)


# -- sweeps --------------------------------------------------------------------

@dataclass(frozen=True)
class Cell:
    scenario: str
    n: int
    beta: float = 1.0
    r: int = 1
    lam: float = 0.2
    trial: int = 0
    seed: int = 0
    alpha: float = 1.0
    c3: float | None = None
    k_window: int | None = None
    paper_constants: bool = False


def run_cell(cell: Cell) -> RunReport:
    seed = derive_seed(cell.seed, f"{cell.scenario}:n={cell.n}:beta={cell.beta}:r={cell.r}"
                       f":lambda={cell.lam}", cell.trial)
    if cell.scenario == "mrp":
        rep = run_mrp_trial(cell.n, cell.beta, cell.r, seed, alpha=cell.alpha,
                            k_window=cell.k_window, paper_constants=cell.paper_constants)
    else:
        rep = run_snsa_trial(cell.n, cell.lam, seed, alpha=cell.alpha, c3=cell.c3,
                             k_window=cell.k_window, low_query=cell.scenario == "snsa-low",
                             paper_constants=cell.paper_constants)
    rep.params.update(trial=cell.trial, master_seed=cell.seed)
    return rep


def run_cells(cells: list[Cell], workers: int | None = None) -> list[RunReport]:
    """Run every cell; results come back in input order whatever the parallelism."""
    workers = thread_cap() if workers is None else workers
    if workers <= 1 or len(cells) <= 1:
        return [run_cell(c) for c in cells]
    with ProcessPoolExecutor(max_workers=min(workers, len(cells))) as pool:
        return list(pool.map(run_cell, cells))
