"""Noisy pairwise comparisons: signal sources and the insertion-chain solver.

Votes are oriented: ``vote(a, b) = +1`` is evidence that ``a`` ranks after
``b``.  The score of ranking ``a`` before ``b`` is ``q(a<b) = -vote(a, b)``,
an integer stand-in for the log-likelihood ratio (every vote carries the
same weight, so only the sign matters when comparing orders).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from .core import Permutation, ScoreMatrix, total_score
from .errors import DataError, DomainError, MissingSignalError, WindowExhaustedError
from . import kernels
from .presort_dp import DpWindow, banded_score, dp_sort_segment, dp_sort_verified

_MASK64 = (1 << 64) - 1


def _splitmix64(z: np.ndarray) -> np.ndarray:
    with np.errstate(over="ignore"):
        z = z + np.uint64(0x9E3779B97F4A7C15)
        z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
        return z ^ (z >> np.uint64(31))


def pair_uniforms(seed: int, keys: np.ndarray) -> np.ndarray:
    """One uniform in [0, 1) per key, a fixed function of ``(seed, key)``."""
    base = _splitmix64(np.array([int(seed) & _MASK64], dtype=np.uint64))
    z = _splitmix64(base ^ keys.astype(np.uint64))
    return (z >> np.uint64(11)).astype(np.float64) * (1.0 / (1 << 53))


@dataclass(frozen=True)
class SnsaParams:
    n: int
    lam: float
    truth: Permutation | None = None
    seed: int = 0

    def __post_init__(self) -> None:
        if self.n < 1:
            raise DomainError("n must be at least 1")
        if not 0 < self.lam <= 0.5:
            raise DomainError("lambda must lie in (0, 1/2]")
        if self.truth is None:
            object.__setattr__(self, "truth", Permutation.identity(self.n))
        elif self.truth.n != self.n:
            raise DomainError("truth has the wrong size")


class SignalSource:
    """Memoised one-draw-per-pair comparison oracle.

    Subclasses implement :meth:`_fetch` for pairs ``lo < hi`` that have not
    been seen; the value is stored and every later query (in either
    orientation) reuses it.  ``distinct_queries`` counts memoised pairs.
    """

    lam: float | None = None
    truth: Permutation | None = None

    def __init__(self, n: int) -> None:
        if n < 1:
            raise DomainError("n must be at least 1")
        self.n = n
        self._memo = np.zeros((n, n), dtype=np.int8)
        self._count = 0

    @property
    def distinct_queries(self) -> int:
        return self._count

    def _fetch(self, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _peek(self, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
        return self._fetch(lo, hi)

    def votes(self, a, b) -> np.ndarray:
        """``vote(a_i, b_i)`` for each pair, drawing unseen pairs once."""
        a = np.atleast_1d(np.asarray(a, dtype=np.int64))
        b = np.atleast_1d(np.asarray(b, dtype=np.int64))
        a, b = np.broadcast_arrays(a, b)
        if (a == b).any():
            raise DomainError("cannot compare an element with itself")
        lo = np.minimum(a, b)
        hi = np.maximum(a, b)
        v = self._memo[lo, hi]
        missing = v == 0
        if missing.any():
            keys = np.unique(lo[missing] * self.n + hi[missing])
            nlo, nhi = keys // self.n, keys % self.n
            self._memo[nlo, nhi] = self._fetch(nlo, nhi)
            self._count += keys.size
            v = self._memo[lo, hi]
        return np.where(a == lo, v, -v).astype(np.int64)

    def pair_scores(self, a, b) -> np.ndarray:
        """``q(a_i < b_i)`` as floats."""
        return -self.votes(a, b).astype(np.float64)

    def audit_scores(self, a, b) -> np.ndarray:
        """Like :meth:`pair_scores` but without memoising or counting.

        For evaluation only (reporting the score of a final order).
        """
        a = np.atleast_1d(np.asarray(a, dtype=np.int64))
        b = np.atleast_1d(np.asarray(b, dtype=np.int64))
        lo = np.minimum(a, b)
        hi = np.maximum(a, b)
        v = self._memo[lo, hi].astype(np.int64)
        missing = v == 0
        if missing.any():
            v[missing] = self._peek(lo[missing], hi[missing])
        return -np.where(a == lo, v, -v).astype(np.float64)

    def known_scores(self) -> np.ndarray:
        """``Q[x, y] = q(x<y)`` for memoised pairs, 0 elsewhere (int8)."""
        return (self._memo.T - self._memo).astype(np.int8)

    def drawn_pairs(self) -> list[tuple[int, int, int]]:
        lo, hi = np.nonzero(self._memo)
        return [(int(x), int(y), int(self._memo[x, y])) for x, y in zip(lo, hi)]


class SnsaSource(SignalSource):
    """Simulated signals: a vote agrees with the truth with probability 1/2 + lambda.

    The randomness for pair ``{lo, hi}`` is a fixed function of the seed and
    the pair, so the table does not depend on the order of queries.
    """

    def __init__(self, params: SnsaParams) -> None:
        super().__init__(params.n)
        self.params = params
        self.lam = params.lam
        self.truth = params.truth
        self.seed = params.seed

    def _fetch(self, lo, hi):
        u = pair_uniforms(self.seed, lo * self.n + hi)
        after = self.truth.rank[lo] > self.truth.rank[hi]
        truthful = u < 0.5 + self.lam
        return np.where(after == truthful, 1, -1).astype(np.int8)


class ReplaySource(SignalSource):
    """Signals read from a table; querying an absent pair is an error."""

    def __init__(self, n: int, table: dict[tuple[int, int], int]) -> None:
        super().__init__(n)
        self._table = np.zeros((n, n), dtype=np.int8)
        for (a, b), vote in table.items():
            lo, hi = min(a, b), max(a, b)
            self._table[lo, hi] = vote if a == lo else -vote

    @classmethod
    def from_file(cls, path: str | Path, n: int | None = None) -> "ReplaySource":
        table: dict[tuple[int, int], int] = {}
        biggest = 0
        with open(path) as fh:
            for lineno, line in enumerate(fh, start=1):
                if not line.strip() or line.lstrip().startswith("#"):
                    continue
                parts = line.split()
                if len(parts) != 3:
                    raise DataError("expected 'a b vote'", lineno)
                try:
                    a, b, vote = (int(p) for p in parts)
                except ValueError:
                    raise DataError("non-integer field", lineno) from None
                if vote not in (1, -1) or a == b or a < 1 or b < 1:
                    raise DataError("vote must be +1/-1 on two distinct 1-based ids", lineno)
                key = (min(a, b) - 1, max(a, b) - 1)
                oriented = vote if a - 1 == key[0] else -vote
                if table.get(key, oriented) != oriented:
                    raise DataError(f"conflicting votes for pair {a} {b}", lineno)
                table[key] = oriented
                biggest = max(biggest, a, b)
        return cls(n if n is not None else biggest, table)

    def _fetch(self, lo, hi):
        v = self._table[lo, hi]
        if (v == 0).any():
            i = int(np.flatnonzero(v == 0)[0])
            raise MissingSignalError(
                f"replay table has no signal for pair {lo[i] + 1} {hi[i] + 1}")
        return v


def write_signals(source: SignalSource, path: str | Path, *, all_pairs: bool = True) -> None:
    """Write ``a b vote`` lines (1-based), drawing every pair first if asked."""
    n = source.n
    if all_pairs and n > 1:
        lo, hi = np.triu_indices(n, 1)
        source.votes(lo, hi)
    with open(path, "w") as fh:
        for lo, hi, vote in source.drawn_pairs():
            fh.write(f"{lo + 1} {hi + 1} {vote:+d}\n")


def snsa_signal(source: SignalSource, a: int, b: int) -> int:
    """Vote on the pair: +1 says ``a`` ranks after ``b``."""
    if a == b:
        raise DomainError("cannot compare an element with itself")
    return int(source.votes([a], [b])[0])


def score_of_signal(lam: float, vote: int, a_before_b: bool = True) -> float:
    """Log-likelihood-ratio score for the hypothesis ``a<b`` (or ``b<a``).

    ``vote`` is the signal on ``(a, b)``.  At ``lam == 1/2`` the signal is
    exact and the score is infinite.
    """
    if not 0 < lam <= 0.5:
        raise DomainError("lambda must lie in (0, 1/2]")
    if vote not in (1, -1):
        raise DomainError("vote must be +1 or -1")
    mag = math.inf if lam == 0.5 else math.log((0.5 + lam) / (0.5 - lam))
    return -vote * mag if a_before_b else vote * mag


def build_score_matrix(source: SignalSource, elements=None) -> ScoreMatrix:
    """Query every pair of ``elements`` once; index ``i`` stands for ``elements[i]``."""
    el = np.arange(source.n) if elements is None else np.asarray(elements, dtype=np.int64)
    m = el.size
    if np.unique(el).size != m:
        raise DomainError("elements must be distinct")
    v = np.zeros((m, m), dtype=np.float64)
    if m > 1:
        i, j = np.triu_indices(m, 1)
        s = source.pair_scores(el[i], el[j])
        v[i, j] = s
        v[j, i] = -s
    if np.all(v == np.round(v)):
        v = v.astype(np.int64)
    return ScoreMatrix(v, antisymmetric=True, labels=el)


# -- the insertion chain ------------------------------------------------------

@dataclass(frozen=True)
class NsaConfig:
    """Solver constants.

    Blocks for the coarse placement have length
    ``ceil(max(8, c3 * ln n))``; ``c3=None`` means ``3 / lambda**2`` when the
    source knows lambda.  ``dp_window`` is the starting window of every
    re-sort (``paper_constants`` uses ``4 * c3 * ln n`` clamped to
    ``cap_k``).  Sets of at most ``exact_n`` elements are re-sorted with a
    full window.  ``polish`` alternates single-element moves with the
    windowed DP until neither changes the order; it needs every pair's
    signal, so only the full-query solver uses it.
    """

    alpha: float = 1.0
    c3: float | None = None
    dp_window: int = 3
    escalation: bool = True
    paper_constants: bool = False
    cap_k: int = 5
    exact_n: int = 9
    polish: bool = True
    max_rounds: int = 200

    def __post_init__(self) -> None:
        if self.c3 is not None and not self.c3 > 0:
            raise DomainError("c3 must be positive")
        if self.dp_window < 1:
            raise DomainError("dp_window must be at least 1")
        if self.cap_k < self.dp_window and not self.paper_constants:
            raise DomainError("cap_k must be at least dp_window")

    def c3_for(self, source: SignalSource) -> float:
        if self.c3 is not None:
            return self.c3
        lam = getattr(source, "lam", None)
        if lam:
            return 3.0 / lam ** 2
        return 12.0

    def block_length(self, source: SignalSource) -> int:
        n = source.n
        return math.ceil(max(8.0, self.c3_for(source) * math.log(max(n, 2))))

    def window(self, source: SignalSource) -> int:
        if self.paper_constants:
            return min(self.cap_k, math.ceil(4 * self.c3_for(source) * math.log(max(source.n, 2))))
        return min(self.dp_window, self.cap_k)


@dataclass
class NsaResult:
    order: Permutation
    score: float
    distinct_queries: int
    escalations: int
    diagnostics: list[dict] = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "order": [int(e) + 1 for e in self.order.order],
            "score": self.score,
            "distinct_queries": self.distinct_queries,
            "escalations": self.escalations,
        }


def order_score(source: SignalSource, order: np.ndarray) -> float:
    """Total score of ``order`` computed from audited signals (no query cost)."""
    order = np.asarray(order, dtype=np.int64)
    n = order.size
    if n < 2:
        return 0
    i, j = np.triu_indices(n, 1)
    total = 0.0
    step = 1 << 22
    for s in range(0, i.size, step):
        total += float(source.audit_scores(order[i[s:s + step]], order[j[s:s + step]]).sum())
    return int(total) if total == int(total) else total


def _changed_blocks(seg: np.ndarray, res: np.ndarray) -> list[tuple[int, int]]:
    """Minimal position ranges ``[l, r)`` that ``res`` permutes among themselves."""
    where = {int(e): i for i, e in enumerate(seg)}
    src = [where[int(e)] for e in res]
    blocks = []
    start = 0
    reach = -1
    for i, s in enumerate(src):
        reach = max(reach, s)
        if reach == i:
            if i > start or src[start] != start:
                blocks.append((start, i + 1))
            start = i + 1
    return blocks


def _windowed(seg: np.ndarray, q, k: int, config: NsaConfig) -> tuple[np.ndarray, int, int]:
    """Windowed re-sort of ``seg``; returns (order, window used, escalations)."""
    if not config.escalation:
        return dp_sort_segment(seg, q, k), k, 0
    try:
        out = dp_sort_verified(seg, q, DpWindow(k, config.cap_k), _check_size=False)
    except WindowExhaustedError as exc:
        return exc.improved, exc.k, 1
    return out.order, out.k, out.escalations


def resort_around(order: np.ndarray, pos: int, q, config: NsaConfig, k: int) -> tuple[np.ndarray, int]:
    """Re-optimise ``order`` near position ``pos`` after an insertion there.

    If the order was optimal before the insertion, an optimal order after it
    differs only inside one contiguous block that contains the new element:
    any other rearranged block would already have improved the old order.
    So only the block containing ``pos`` is kept, plus other blocks that
    strictly improve the score; equal-score reshuffles elsewhere are dropped.
    The segment grows while a kept change reaches its edge.  The window is
    fixed at ``k`` here; escalation happens in the whole-order passes.
    """
    m = order.size
    if m <= 1:
        return order, 0
    if m <= config.exact_n:
        return dp_sort_segment(order, q, m - 1), 0
    radius = max(4 * k, 8)
    escalations = 0
    while True:
        lo = max(0, pos - radius)
        hi = min(m, pos + radius + 1)
        seg = order[lo:hi]
        res, k_used = dp_sort_segment(seg, q, k), k
        new = seg.copy()
        touched_lo, touched_hi = len(seg), -1
        for l, r in _changed_blocks(seg, res):
            if not l <= pos - lo < r:
                gain = banded_score(seg[l:r], res[l:r], q, k_used) - banded_score(seg[l:r], seg[l:r], q, k_used)
                if gain <= 0:
                    continue
            new[l:r] = res[l:r]
            touched_lo = min(touched_lo, l)
            touched_hi = max(touched_hi, r)
        if touched_hi < 0:
            return order, escalations
        at_edge = (lo > 0 and touched_lo < k_used) or (hi < m and touched_hi > len(seg) - k_used)
        if at_edge and config.escalation:
            radius *= 2
            escalations += 1
            continue
        out_order = order.copy()
        out_order[lo:hi] = new
        return out_order, escalations


def banded_sweep(order: np.ndarray, q, radius: int) -> tuple[np.ndarray, int]:
    """Best single-element moves of at most ``radius`` slots, one pass.

    Only pairs within ``radius`` of each other are queried.
    """
    cur = order.tolist()
    m = len(cur)
    moved = 0
    for e in order.tolist():
        i = cur.index(e)
        best, target = 0.0, i
        if i > 0:
            left = np.asarray(cur[max(0, i - radius):i], dtype=np.int64)
            g = np.cumsum(q.pair_scores(np.full(left.size, e), left)[::-1])[::-1]
            j = int(np.argmax(g))
            if g[j] > best:
                best, target = g[j], i - left.size + j
        if i < m - 1:
            right = np.asarray(cur[i + 1:i + 1 + radius], dtype=np.int64)
            g = np.cumsum(q.pair_scores(right, np.full(right.size, e)))
            j = int(np.argmax(g))
            if g[j] > best:
                best, target = g[j], i + 1 + j
        if target != i:
            cur.pop(i)
            cur.insert(target, e)
            moved += 1
    return np.asarray(cur, dtype=np.int64), moved


def _fixed_point(order: np.ndarray, q, config: NsaConfig, k: int,
                 sweep: Callable[[np.ndarray], int]) -> tuple[np.ndarray, int]:
    # Alternate ``sweep`` (in place, returns moves) with the window-k DP; the
    # escalating check only runs once neither changes anything.
    order = np.array(order, dtype=np.int64)
    if order.size <= config.exact_n:
        return dp_sort_segment(order, q, max(order.size - 1, 0)), 0
    escalations = 0
    for _ in range(config.max_rounds):
        moved = sweep(order)
        new = dp_sort_segment(order, q, k)
        if not moved and np.array_equal(new, order):
            new, _, esc = _windowed(order, q, k, config)
            escalations += esc
            if np.array_equal(new, order):
                return order, escalations
        order = np.array(new, dtype=np.int64)
    raise WindowExhaustedError(f"no fixed point after {config.max_rounds} rounds", order, order, k)


def polish(order: np.ndarray, source: SignalSource, config: NsaConfig, k: int) -> tuple[np.ndarray, int]:
    """Alternate best single-element moves and the windowed DP to a fixed point.

    Every pair among ``order`` must already be memoised.  The result cannot
    be improved by moving one element or by any rearrangement inside the
    final window.
    """
    Q = source.known_scores()
    return _fixed_point(order, source, config, k, lambda o: kernels.insertion_sweep(o, Q))


def banded_polish(order: np.ndarray, q, config: NsaConfig, k: int, radius: int) -> tuple[np.ndarray, int]:
    """:func:`polish` restricted to moves of at most ``radius`` slots.

    Queries only pairs that are close in the current order, so it suits
    sources where every query counts.
    """
    def sweep(o: np.ndarray) -> int:
        new, moved = banded_sweep(o, q, radius)
        o[:] = new
        return moved

    return _fixed_point(order, q, config, k, sweep)


def insertion_scores(before: np.ndarray, after: np.ndarray) -> np.ndarray:
    """Score gained by inserting at each of the ``m+1`` slots.

    ``before[j] = q(x_j < a)`` and ``after[j] = q(a < x_j)`` for the current
    order ``x``; slot ``i`` puts ``a`` between ``x_{i-1}`` and ``x_i``.
    """
    c = np.zeros(before.size + 1)
    c[1:] = np.cumsum(before)
    tail = np.zeros(before.size + 1)
    tail[:-1] = np.cumsum(after[::-1])[::-1]
    return c + tail


def block_scan_position(order: np.ndarray, a: int, q, block: int) -> int:
    """Coarse-to-fine slot for ``a``: best block boundary, then best slot within two blocks."""
    m = order.size
    before = q.pair_scores(order, np.full(m, a))
    after = -before
    c = insertion_scores(before, after)
    bounds = np.unique(np.append(np.arange(0, m + 1, block), m))
    b_star = int(bounds[np.argmax(c[bounds])])
    lo = max(0, b_star - 2 * block)
    hi = min(m, b_star + 2 * block)
    return lo + int(np.argmax(c[lo:hi + 1]))


Repair = Callable[[np.ndarray], tuple[np.ndarray, int]]


def run_chain(source: SignalSource, config: NsaConfig, seed,
              place: Callable[[np.ndarray, int, int], int],
              repair: Repair | None = None) -> tuple[np.ndarray, int]:
    """Insert elements in a random order, re-sorting locally after each one.

    ``repair`` runs whenever the order doubles in size (from 32) and at the
    end; without it the order gets one final windowed pass.
    """
    n = source.n
    rng = np.random.default_rng(seed)
    chain = rng.permutation(n)
    k = config.window(source)
    order = chain[:1].astype(np.int64)
    escalations = 0
    checkpoint = 32
    for step in range(1, n):
        a = int(chain[step])
        pos = place(order, a, step)
        order = np.insert(order, pos, a)
        order, esc = resort_around(order, pos, source, config, k)
        escalations += esc
        if repair is not None and order.size == checkpoint and order.size < n:
            order, esc = repair(order)
            escalations += esc
            checkpoint *= 2
    if repair is not None:
        order, esc = repair(order)
        escalations += esc
    elif n > config.exact_n:
        order, _, esc = _windowed(order, source, k, config)
        escalations += esc
    return order, escalations


def solve_nsa(source: SignalSource, config: NsaConfig | None = None, seed=0) -> NsaResult:
    """Maximum-likelihood order from noisy comparisons by insertion chain.

    Each new element is compared with every element of the current order,
    placed using block sums, and its neighbourhood is re-sorted exactly with
    the windowed dynamic program.
    """
    config = config or NsaConfig()
    n = source.n
    if n == 1:
        return NsaResult(Permutation.identity(1), 0, 0, 0)
    block = config.block_length(source)
    k = config.window(source)
    repair = (lambda order: polish(order, source, config, k)) if config.polish else None
    order, escalations = run_chain(
        source, config, seed, lambda order, a, step: block_scan_position(order, a, source, block),
        repair)
    return NsaResult(Permutation.from_order(order), order_score(source, order),
                     source.distinct_queries, escalations)


# -- strong bias --------------------------------------------------------------

@dataclass(frozen=True)
class BiasEstimate:
    p_hat: float
    gamma_hat: float
    correct: int
    m: int


def estimate_bias(lam: float, m: int, trials: int, correct_fraction: float = 1.0,
                  seed=0) -> BiasEstimate:
    """Probability that ``m`` summed SNSA scores favour the majority orientation.

    ``ceil(correct_fraction * m)`` of the pairs are oriented as in the truth
    and the rest against it.  Returns ``p_hat`` and
    ``gamma_hat = -log2(1 - p_hat) / m`` (infinite when every trial succeeds).
    """
    if m < 1 or trials < 1:
        raise DomainError("m and trials must be positive")
    if not 0 < lam <= 0.5:
        raise DomainError("lambda must lie in (0, 1/2]")
    rng = np.random.default_rng(seed)
    good = min(m, math.ceil(correct_fraction * m - 1e-12))
    bad = m - good
    # A pair contributes +1 when its vote points along the hypothesised orientation.
    agree_good = rng.binomial(good, 0.5 + lam, size=trials)
    agree_bad = rng.binomial(bad, 0.5 - lam, size=trials)
    total = (2 * agree_good - good) + (2 * agree_bad - bad)
    p_hat = float(np.mean(total > 0))
    gamma = math.inf if p_hat >= 1.0 else -math.log2(1.0 - p_hat) / m
    return BiasEstimate(p_hat, gamma, good, m)


def exact_ml_check(source: SignalSource, order) -> bool:
    """Whether ``order`` attains the exhaustive optimum (small ``n`` only)."""
    from .oracle import brute_force_ml

    q = build_score_matrix(source)
    return total_score(order, q) == brute_force_ml(q).best_score
