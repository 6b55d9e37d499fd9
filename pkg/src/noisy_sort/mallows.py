"""Mallows model sampling and maximum-likelihood reconstruction from samples."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import Permutation, ScoreMatrix, kemeny_distance
from .errors import CapacityError, DomainError
from .presort_dp import DEFAULT_CAP_K, DpWindow, dp_sort_verified

PMF_MAX_N = 10


@dataclass(frozen=True)
class MallowsParams:
    n: int
    beta: float
    r: int = 1
    truth: Permutation | None = None

    def __post_init__(self) -> None:
        if self.n < 1:
            raise DomainError("n must be at least 1")
        if not self.beta > 0 or not math.isfinite(self.beta):
            raise DomainError("beta must be a positive finite number")
        if self.r < 1:
            raise DomainError("r must be at least 1")
        if self.truth is None:
            object.__setattr__(self, "truth", Permutation.identity(self.n))
        elif self.truth.n != self.n:
            raise DomainError("truth has the wrong size")


@dataclass(frozen=True)
class MrpConfig:
    """Solver settings.

    ``window_k="auto"`` uses ``max(4, ceil(2 (alpha+2) ln n / (beta r)))``,
    i.e. twice the averaging error bound, floored at 4.  With
    ``paper_constants`` the window is ``ceil(33 L)`` instead.  Either way the
    result is clamped to ``cap_k`` and checked by window escalation.
    """

    alpha: float = 1.0
    beta: float | None = None
    window_k: int | str = "auto"
    paper_constants: bool = False
    cap_k: int = DEFAULT_CAP_K

    def L(self, n: int, r: int) -> float:
        beta = self._beta()
        a = self.alpha
        return max(6 * (a + 2) * math.log(n) / (beta * r), 6 * (a + 2 + 1 / beta) / beta)

    def raw_window(self, n: int, r: int) -> int:
        """The window before clamping to ``cap_k`` / ``n-1``."""
        if self.window_k != "auto":
            return int(self.window_k)
        if self.paper_constants:
            return math.ceil(33 * self.L(n, r))
        if self.beta is None:
            return 4
        return max(4, math.ceil(2 * (self.alpha + 2) * math.log(max(n, 2)) / (self.beta * r)))

    def window(self, n: int, r: int) -> int:
        return max(0, min(self.raw_window(n, r), self.cap_k, n - 1))

    def _beta(self) -> float:
        if self.beta is None:
            raise DomainError("beta is required for this window rule")
        return self.beta


@dataclass(frozen=True)
class MrpResult:
    order: Permutation
    objective: int
    window: int
    escalations: int
    verified: bool


# -- distribution -------------------------------------------------------------

def mahonian_counts(n: int) -> list[int]:
    """Number of permutations of ``n`` elements with each inversion count."""
    counts = [1]
    for m in range(2, n + 1):
        new = [0] * (len(counts) + m - 1)
        for d, c in enumerate(counts):
            for extra in range(m):
                new[d + extra] += c
        counts = new
    return counts


def log_partition(n: int, beta: float) -> float:
    """``log Z(beta)``, summing ``exp(-beta d)`` over all of ``S_n`` grouped by ``d``."""
    counts = mahonian_counts(n)
    terms = np.array([math.log(c) - beta * d for d, c in enumerate(counts)])
    top = terms.max()
    return float(top + math.log(np.exp(terms - top).sum()))


def log_unnormalized(pi: Permutation, params: MallowsParams) -> float:
    return -params.beta * kemeny_distance(pi, params.truth)


def mallows_pmf(pi: Permutation, params: MallowsParams) -> float:
    if pi.n != params.n:
        raise DomainError("permutation has the wrong size")
    if params.n > PMF_MAX_N:
        raise CapacityError(f"normalising constant only computed for n <= {PMF_MAX_N}")
    return math.exp(log_unnormalized(pi, params) - log_partition(params.n, params.beta))


def insertion_probabilities(j: int, beta: float) -> np.ndarray:
    """Law of the displacement (from the end) of the ``j``-th inserted element."""
    w = np.exp(-beta * np.arange(j))
    return w / w.sum()


def _displacements(rng: np.random.Generator, n: int, beta: float, size=None) -> np.ndarray:
    # Element number j (0-based) picks d in 0..j with P(d) proportional to exp(-beta d).
    j = np.arange(n)
    shape = (n,) if size is None else (size, n)
    u = rng.random(shape)
    c = -np.expm1(-beta * (j + 1))
    d = np.floor(-np.log1p(-u * c) / beta)
    return np.clip(d, 0, j).astype(np.int64)


def sample(params: MallowsParams, seed) -> Permutation:
    """One exact Mallows draw by repeated insertion.

    Elements enter in the truth's order; each lands ``d`` slots from the end
    of the current list with probability proportional to ``exp(-beta d)``.
    Every such slot creates exactly ``d`` disagreements with the truth.
    """
    rng = np.random.default_rng(seed)
    d = _displacements(rng, params.n, params.beta)
    seq: list[int] = []
    for j, e in enumerate(params.truth.order.tolist()):
        seq.insert(j - int(d[j]), e)
    return Permutation.from_order(seq)


def sample_many(params: MallowsParams, size: int, seed) -> np.ndarray:
    """``size`` independent draws as a ``(size, n)`` array of rank vectors."""
    rng = np.random.default_rng(seed)
    n = params.n
    d = _displacements(rng, n, params.beta, size)
    pos = np.zeros((size, n), dtype=np.int64)
    for j in range(n):
        new = j - d[:, j]
        pos[:, :j] += pos[:, :j] >= new[:, None]
        pos[:, j] = new
    ranks = np.empty_like(pos)
    ranks[:, params.truth.order] = pos
    return ranks


def tail_probe(params: MallowsParams, k: int, i: int, trials: int, seed) -> float:
    """Monte-Carlo estimate of ``P[|pi(a_k) - k| >= i]``.

    ``a_k`` is the element ranked ``k``-th (1-based) by the truth.  Only that
    element's position is tracked through the insertions.
    """
    n = params.n
    if trials < 1:
        raise DomainError("trials must be positive")
    if not 1 <= k <= n:
        raise DomainError("k must be in 1..n")
    if i <= 0:
        return 1.0
    if i >= n:
        return 0.0
    rng = np.random.default_rng(seed)
    d = _displacements(rng, n, params.beta, trials)
    pos = (k - 1) - d[:, k - 1]
    for j in range(k, n):
        pos = pos + ((j - d[:, j]) <= pos)
    return float(np.mean(np.abs(pos - (k - 1)) >= i))


def displacement_tail_bound(beta: float, i: int) -> float:
    return 2 * math.exp(-beta * i) / (1 - math.exp(-beta))


# -- aggregation --------------------------------------------------------------

def _rank_matrix(samples: Sequence[Permutation] | np.ndarray) -> np.ndarray:
    if isinstance(samples, np.ndarray):
        if samples.ndim != 2 or samples.shape[0] == 0:
            raise DomainError("need a non-empty (r, n) rank array")
        return samples.astype(np.int64, copy=False)
    if len(samples) == 0:
        raise DomainError("need at least one sample")
    n = samples[0].n
    if any(s.n != n for s in samples):
        raise DomainError("samples have different sizes")
    return np.stack([s.rank for s in samples])


def average_positions(samples) -> np.ndarray:
    """Mean 1-based position of every element across the samples."""
    return _rank_matrix(samples).mean(axis=0) + 1.0


def averaged_order(samples) -> np.ndarray:
    """Elements sorted by mean position, ties by element id."""
    return np.argsort(average_positions(samples), kind="stable")


def pairwise_counts(samples) -> ScoreMatrix:
    """``q(i<j)`` = number of samples placing ``i`` before ``j``."""
    R = _rank_matrix(samples)
    r, n = R.shape
    v = np.zeros((n, n), dtype=np.int64)
    for row in R:
        v += row[:, None] < row[None, :]
    return ScoreMatrix(v, antisymmetric=False, complement=r)


class PairCounts:
    """Lazy version of :func:`pairwise_counts`; scores are computed per pair."""

    def __init__(self, samples) -> None:
        self.R = _rank_matrix(samples)
        self.r, self.n = self.R.shape

    def pair_scores(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        a = np.asarray(a)
        b = np.asarray(b)
        return (self.R[:, a] < self.R[:, b]).sum(axis=0).astype(np.float64)


def kemeny_objective(order: Permutation, samples) -> int:
    if isinstance(samples, np.ndarray):
        samples = [Permutation(row) for row in samples]
    return sum(kemeny_distance(s, order) for s in samples)


def solve_mrp(samples, config: MrpConfig | None = None) -> MrpResult:
    """Permutation minimising the summed Kemeny distance to ``samples``.

    Starts from the averaged order and re-sorts it exactly within the
    configured window (see :class:`MrpConfig`), escalating the window if a
    wider one scores higher.
    """
    config = config or MrpConfig()
    R = _rank_matrix(samples)
    r, n = R.shape
    perms = [Permutation(row) for row in R]
    if (R == R[0]).all():
        return MrpResult(perms[0], 0, 0, 0, True)
    start = averaged_order(R)
    k = config.window(n, r)
    outcome = dp_sort_verified(start, PairCounts(R), DpWindow(k, config.cap_k))
    best = Permutation.from_order(outcome.order)
    objective = sum(kemeny_distance(p, best) for p in perms)
    return MrpResult(best, objective, outcome.k, outcome.escalations, outcome.verified)
