"""Exhaustive ground truth for small instances."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from itertools import permutations

import numpy as np

from .core import Permutation, ScoreMatrix
from .errors import CapacityError, DomainError

MAX_N = 9


@dataclass(frozen=True)
class OracleResult:
    best_order: Permutation
    best_score: float
    tie_count: int


@lru_cache(maxsize=MAX_N + 1)
def all_orders(n: int) -> np.ndarray:
    """Every order of ``n`` elements, lexicographically sorted, one per row."""
    out = np.array(list(permutations(range(n))), dtype=np.int8)
    out.setflags(write=False)
    return out


def _guard(n: int) -> None:
    if n > MAX_N:
        raise CapacityError(f"exhaustive search is capped at n = {MAX_N}")


def brute_force_ml(q: ScoreMatrix) -> OracleResult:
    """Maximise the total score over all ``n!`` orders.

    Rows are visited in lexicographic order and the first maximum is kept, so
    the reported order is the canonical representative of its tie class.
    """
    n = q.n
    _guard(n)
    P = all_orders(n).astype(np.intp)
    v = q.values
    scores = np.zeros(P.shape[0], dtype=v.dtype)
    for i in range(n):
        for j in range(i + 1, n):
            scores += v[P[:, i], P[:, j]]
    best = scores.max()
    hits = np.flatnonzero(scores == best)
    score = int(best) if np.issubdtype(v.dtype, np.integer) else float(best)
    return OracleResult(Permutation.from_order(P[hits[0]]), score, int(hits.size))


def brute_force_mrp(samples, *, cross_check: bool = True) -> OracleResult:
    """Minimise the summed Kemeny distance to ``samples`` over all orders.

    The objective is computed by counting disagreements with each sample
    directly.  With ``cross_check`` the result is compared against
    :func:`brute_force_ml` on the pairwise counts matrix.
    """
    from .mallows import _rank_matrix, pairwise_counts

    R = _rank_matrix(samples)
    r, n = R.shape
    _guard(n)
    P = all_orders(n).astype(np.intp)
    objective = np.zeros(P.shape[0], dtype=np.int64)
    for row in R:
        seen = row[P]  # sample positions, read in candidate order
        for i in range(n):
            for j in range(i + 1, n):
                objective += seen[:, i] > seen[:, j]
    best = objective.min()
    hits = np.flatnonzero(objective == best)
    result = OracleResult(Permutation.from_order(P[hits[0]]), int(best), int(hits.size))
    if cross_check:
        ml = brute_force_ml(pairwise_counts(R))
        if (ml.best_score != r * math.comb(n, 2) - result.best_score
                or ml.best_order != result.best_order or ml.tie_count != result.tie_count):
            raise AssertionError("Kemeny-sum and score-matrix objectives disagree")
    return result


def best_score_python(q: ScoreMatrix) -> tuple[float, list[int]]:
    """Reference enumeration in reverse lexicographic order, plain loops.

    Returns the best score and the lexicographically smallest maximiser.
    """
    n = q.n
    _guard(n)
    if n < 1:
        raise DomainError("empty instance")
    best = None
    best_order: list[int] = []
    for perm in reversed(list(permutations(range(n)))):
        s = 0
        for a in range(n):
            for b in range(a + 1, n):
                s += q.values[perm[a], perm[b]]
        if best is None or s > best or (s == best and list(perm) < best_order):
            best, best_order = s, list(perm)
    return best, best_order
