"""Exact re-sorting of an almost sorted list.

Given an initial order and the promise that some optimal order moves every
element at most ``k`` positions, both routines below return the best order
within that window.  Ties are broken towards the lexicographically smallest
sequence of element ids.

``dp_sort`` defaults to a left-to-right frontier sweep (compiled kernel,
``O(n * k * C(2k, k))``).  ``method="interval"`` runs the interval-halving
recursion with boundary-set memoisation, which is much slower and is kept as
an independent implementation for cross-checking.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations, permutations
from typing import Sequence

import numpy as np

from . import kernels
from .core import PairScores
from .errors import CapacityError, DomainError, WindowExhaustedError

DEFAULT_CAP_K = 10
# Largest n * C(2k, k) choice table the sweep may allocate (bytes, uint8 cells).
MAX_TABLE_CELLS = 300_000_000


@dataclass(frozen=True)
class DpWindow:
    k: int
    cap_k: int = DEFAULT_CAP_K

    def __post_init__(self) -> None:
        if self.k < 0:
            raise DomainError("window k must be non-negative")
        if self.cap_k < 1:
            raise DomainError("cap_k must be positive")
        if self.k > self.cap_k:
            raise CapacityError(f"window k={self.k} exceeds cap_k={self.cap_k}")


@dataclass(frozen=True)
class DpOutcome:
    order: np.ndarray
    k: int
    escalations: int
    verified: bool


def band(initial: np.ndarray, q: PairScores, k: int) -> tuple[np.ndarray, np.ndarray]:
    """Scores of every pair less than ``2k+1`` apart in ``initial``.

    ``up[x, d] = q(initial[x] < initial[x+d])`` and
    ``down[x, d] = q(initial[x] < initial[x-d])``; out-of-range cells are 0.
    """
    n = len(initial)
    w = 2 * k
    up = np.zeros((n, w + 1))
    down = np.zeros((n, w + 1))
    for d in range(1, min(w, n - 1) + 1):
        a = initial[:-d]
        b = initial[d:]
        up[: n - d, d] = q.pair_scores(a, b)
        down[d:, d] = q.pair_scores(b, a)
    return up, down


def banded_score(initial: Sequence[int], order: Sequence[int], q: PairScores, k: int) -> float:
    """Score of ``order`` counting only pairs less than ``2k`` apart in ``initial``.

    For two orders that both respect window ``k`` this differs from the full
    score by the same constant, so it is enough to compare them.
    """
    initial = np.asarray(initial, dtype=np.int64)
    order = np.asarray(order, dtype=np.int64)
    n = initial.size
    where = {int(e): i for i, e in enumerate(order)}
    pos = np.array([where[int(e)] for e in initial])
    total = 0.0
    for d in range(1, min(2 * k, n)):
        a = initial[:-d]
        b = initial[d:]
        fwd = pos[:-d] < pos[d:]
        s_ab = q.pair_scores(a, b)
        s_ba = q.pair_scores(b, a)
        total += float(np.where(fwd, s_ab, s_ba).sum())
    return total


def _as_order(initial) -> np.ndarray:
    if hasattr(initial, "order") and not isinstance(initial, np.ndarray):
        return np.asarray(initial.order, dtype=np.int64)
    return np.asarray(initial, dtype=np.int64)


def _check(initial: np.ndarray, q: PairScores) -> None:
    if initial.size != q.n:
        raise DomainError(f"size mismatch: initial has {initial.size} elements, q has {q.n}")


def dp_sort(initial, q: PairScores, window: DpWindow | int, *, method: str = "sweep",
            backend: str | None = None) -> np.ndarray:
    """Best order among those moving each element at most ``window.k`` slots.

    ``initial`` is a sequence of element ids (position -> element) or a
    :class:`~noisy_sort.core.Permutation`.  Returns the order as an array of
    element ids.
    """
    if not isinstance(window, DpWindow):
        window = DpWindow(int(window))
    init = _as_order(initial)
    _check(init, q)
    return dp_sort_segment(init, q, window.k, method=method, backend=backend)


def dp_sort_segment(init: np.ndarray, q: PairScores, k: int, *, method: str = "sweep",
                    backend: str | None = None) -> np.ndarray:
    """``dp_sort`` on an arbitrary subset of ``q``'s elements (no size check)."""
    n = init.size
    if n <= 1:
        return init.copy()
    k = min(k, n - 1)
    if k == 0:
        return init.copy()
    if method == "interval":
        return IntervalDP(init, q, k).solve()
    if method != "sweep":
        raise DomainError(f"unknown method {method!r}")
    if n * math.comb(2 * k, k) > MAX_TABLE_CELLS:
        raise CapacityError(f"window k={k} on {n} elements needs too large a table")
    up, down = band(init, q, k)
    idx, _ = kernels.sweep_dp(up, down, init, k, backend=backend)
    return init[idx]


def dp_sort_verified(initial, q: PairScores, window: DpWindow | int, *,
                     backend: str | None = None, _check_size: bool = True) -> DpOutcome:
    """``dp_sort`` with a confirming pass at ``k+1`` and doubling on improvement.

    Raises :class:`WindowExhaustedError` if ``cap_k`` is reached while a wider
    window still scores higher.  When ``k+1`` would exceed ``cap_k`` the
    result is returned with ``verified=False``.
    """
    if not isinstance(window, DpWindow):
        window = DpWindow(int(window))
    init = _as_order(initial)
    if _check_size:
        _check(init, q)
    n = init.size
    full = max(n - 1, 0)
    k = min(window.k, full)
    escalations = 0
    best = dp_sort_segment(init, q, k, backend=backend)
    while True:
        if k >= full:
            return DpOutcome(best, k, escalations, True)
        if k + 1 > window.cap_k:
            return DpOutcome(best, k, escalations, False)
        wider = dp_sort_segment(init, q, k + 1, backend=backend)
        gain = banded_score(init, wider, q, k + 1) - banded_score(init, best, q, k + 1)
        if gain <= 0:
            return DpOutcome(best, k, escalations, True)
        if k + 1 >= full:
            return DpOutcome(wider, k + 1, escalations + 1, True)
        if k + 1 >= window.cap_k:
            raise WindowExhaustedError(
                f"score still improving at window cap {window.cap_k}", best, wider, k + 1)
        escalations += 1
        k = min(2 * max(k, 1), window.cap_k, full)
        best = dp_sort_segment(init, q, k, backend=backend)


class IntervalDP:
    """Interval-halving recursion over boundary sets.

    For positions ``[i, j]`` the set of elements landing there must contain
    every element initially in ``[i+k, j-k]`` and lie inside ``[i-k, j+k]``;
    a state is the interval plus a bitmask over the remaining boundary slots.
    Scores only count pairs less than ``2k`` apart initially (``s'``); the
    omitted pairs can never swap, so they shift every candidate equally.
    Elements are handled by their initial index ``x``; ties go to the
    lexicographically smallest sequence of ``labels``.
    """

    def __init__(self, init: np.ndarray, q: PairScores, k: int, leaf: int | None = None) -> None:
        self.init = np.asarray(init, dtype=np.int64)
        self.n = n = self.init.size
        self.k = k
        self.leaf = max(2, k) if leaf is None else max(2, leaf)
        a, b = np.meshgrid(self.init, self.init, indexing="ij")
        self.Q = q.pair_scores(a.ravel(), b.ravel()).reshape(n, n)
        self.labels = [int(e) for e in self.init]
        self.memo: dict[tuple[int, int, int], tuple[float, tuple[int, ...]] | None] = {}

    def _near(self, x: int, y: int) -> bool:
        return abs(x - y) < 2 * self.k

    def boundary_code(self, i: int, j: int, S: frozenset[int]) -> int:
        k = self.k
        slots = [x for x in range(max(0, i - k), min(self.n, j + k + 1))
                 if not (i + k <= x <= j - k)]
        return sum(1 << b for b, x in enumerate(slots) if x in S)

    def _key(self, order: tuple[int, ...]) -> list[int]:
        return [self.labels[x] for x in order]

    def truncated_score(self, order: Sequence[int]) -> float:
        s = 0.0
        for a_i, x in enumerate(order):
            for y in order[a_i + 1:]:
                if self._near(x, y):
                    s += self.Q[x, y]
        return s

    def far_constant(self) -> float:
        n, w = self.n, 2 * self.k
        return float(sum(self.Q[x, y] for x in range(n) for y in range(x + w, n)))

    def _leaf(self, i: int, S: frozenset[int]):
        best = None
        for perm in permutations(sorted(S, key=lambda x: self.labels[x])):
            if any(abs(i + p - x) > self.k for p, x in enumerate(perm)):
                continue
            s = self.truncated_score(perm)
            if best is None or s > best[0]:
                best = (s, perm)
        return best

    def solve_interval(self, i: int, j: int, S: frozenset[int]):
        key = (i, j, self.boundary_code(i, j, S))
        if key in self.memo:
            return self.memo[key]
        length = j - i + 1
        k = self.k
        if length <= self.leaf:
            res = self._leaf(i, S)
            self.memo[key] = res
            return res
        m = i + (length + 1) // 2 - 1
        forced_left = [x for x in S if x <= m - k]
        forced_right = [x for x in S if x >= m + k + 1]
        free = sorted(x for x in S if m - k < x < m + k + 1)
        need = (m - i + 1) - len(forced_left)
        best = None
        if 0 <= need <= len(free) and len(forced_right) <= j - m:
            for comb in combinations(free, need):
                left = frozenset(forced_left).union(comb)
                right = S - left
                lres = self.solve_interval(i, m, left)
                if lres is None:
                    continue
                rres = self.solve_interval(m + 1, j, right)
                if rres is None:
                    continue
                seam = sum(self.Q[a, b] for a in left if a > m - 3 * k
                           for b in right if self._near(a, b))
                s = lres[0] + rres[0] + seam
                order = lres[1] + rres[1]
                if best is None or s > best[0] or (s == best[0] and self._key(order) < self._key(best[1])):
                    best = (s, order)
        self.memo[key] = best
        return best

    def solve_with_score(self) -> tuple[np.ndarray, float]:
        res = self.solve_interval(0, self.n - 1, frozenset(range(self.n)))
        assert res is not None
        return self.init[list(res[1])], res[0]

    def solve(self) -> np.ndarray:
        return self.solve_with_score()[0]
