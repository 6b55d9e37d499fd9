"""Permutations, pairwise score matrices and the distances between orders.

Elements are the integers ``0..n-1`` internally.  A :class:`Permutation`
stores ``rank[e]`` (the position of element ``e``) together with its inverse
``order[p]`` (the element sitting at position ``p``).  The text format used
on disk and by the CLI is 1-based.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Protocol, Sequence

import numpy as np

from . import kernels
from .errors import DataError, DomainError


class Permutation:
    """An immutable bijection stored as a rank vector with a cached inverse."""

    __slots__ = ("_rank", "_order")

    def __init__(self, rank: Sequence[int] | np.ndarray) -> None:
        r = np.array(rank, dtype=np.int64)
        if r.ndim != 1 or r.size < 1:
            raise DomainError("a permutation needs at least one element")
        n = r.size
        order = np.full(n, -1, dtype=np.int64)
        if r.min() < 0 or r.max() >= n:
            raise DomainError(f"rank vector is not a bijection on {n} elements")
        order[r] = np.arange(n, dtype=np.int64)
        if (order < 0).any():
            raise DomainError(f"rank vector is not a bijection on {n} elements")
        r.setflags(write=False)
        order.setflags(write=False)
        self._rank = r
        self._order = order

    @classmethod
    def from_order(cls, order: Sequence[int] | np.ndarray) -> "Permutation":
        o = np.asarray(order, dtype=np.int64)
        n = o.size
        if o.ndim != 1 or n < 1 or o.min() < 0 or o.max() >= n:
            raise DomainError("order is not a bijection")
        rank = np.full(n, -1, dtype=np.int64)
        rank[o] = np.arange(n, dtype=np.int64)
        return cls(rank)

    @classmethod
    def identity(cls, n: int) -> "Permutation":
        return cls(np.arange(n))

    @classmethod
    def reversal(cls, n: int) -> "Permutation":
        return cls(np.arange(n)[::-1])

    @property
    def n(self) -> int:
        return self._rank.size

    @property
    def rank(self) -> np.ndarray:
        return self._rank

    @property
    def order(self) -> np.ndarray:
        return self._order

    def relabel(self, mapping: Sequence[int] | np.ndarray) -> "Permutation":
        """Rename element ``e`` to ``mapping[e]``; positions are unchanged."""
        mapping = np.asarray(mapping, dtype=np.int64)
        return Permutation.from_order(mapping[self._order])

    def __len__(self) -> int:
        return self.n

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Permutation):
            return NotImplemented
        return np.array_equal(self._rank, other._rank)

    def __hash__(self) -> int:
        return hash(self._rank.tobytes())

    def __repr__(self) -> str:
        if self.n <= 12:
            return f"Permutation(order={self._order.tolist()})"
        return f"Permutation(n={self.n})"


class PairScores(Protocol):
    """Anything that can report ``q(a<b)`` for vectors of element pairs."""

    n: int

    def pair_scores(self, a: np.ndarray, b: np.ndarray) -> np.ndarray: ...


class ScoreMatrix:
    """Dense table of scores ``q(i<j)`` for every ordered pair ``i != j``.

    ``values[i, j]`` is the reward for ranking ``i`` before ``j``.  The
    diagonal is ignored.  ``complement`` records ``r`` when the matrix came
    from counting ``r`` sampled permutations (``q(i,j) + q(j,i) == r``).
    """

    def __init__(
        self,
        values: np.ndarray,
        *,
        antisymmetric: bool | None = None,
        complement: int | None = None,
        labels: Sequence[int] | None = None,
    ) -> None:
        v = np.array(values)
        if v.ndim != 2 or v.shape[0] != v.shape[1] or v.shape[0] < 1:
            raise DomainError("score matrix must be square and non-empty")
        if not np.issubdtype(v.dtype, np.integer):
            v = v.astype(np.float64)
            if not np.isfinite(v).all():
                raise DomainError("scores must be finite")
        np.fill_diagonal(v, 0)
        v.setflags(write=False)
        self.values = v
        self.n = v.shape[0]
        off = ~np.eye(self.n, dtype=bool)
        if antisymmetric is None:
            antisymmetric = bool(np.array_equal(v, -v.T))
        self.antisymmetric = antisymmetric
        if complement is not None:
            s = (v + v.T)[off]
            if s.size and not (s == complement).all():
                raise DomainError(f"q(i,j) + q(j,i) != {complement} for some pair")
        self.complement = complement
        self.labels = None if labels is None else np.asarray(labels, dtype=np.int64)

    @classmethod
    def from_pairs(cls, n: int, pairs: dict[tuple[int, int], float]) -> "ScoreMatrix":
        v = np.zeros((n, n), dtype=np.float64)
        for (i, j), s in pairs.items():
            v[i, j] = s
        return cls(v)

    def __getitem__(self, ij: tuple[int, int]):
        return self.values[ij]

    def pair_scores(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        return self.values[np.asarray(a), np.asarray(b)].astype(np.float64)

    def shifted(self, c: float) -> "ScoreMatrix":
        """Add ``c`` to every off-diagonal entry."""
        return ScoreMatrix(self.values + c)

    def relabel(self, mapping: Sequence[int] | np.ndarray) -> "ScoreMatrix":
        """Matrix for the instance where element ``e`` is renamed ``mapping[e]``."""
        mapping = np.asarray(mapping, dtype=np.int64)
        v = np.zeros_like(self.values)
        v[np.ix_(mapping, mapping)] = self.values
        return ScoreMatrix(v, antisymmetric=self.antisymmetric, complement=self.complement)


@dataclass(frozen=True)
class DistanceReport:
    kemeny: int
    dislocation: int
    max_dislocation: int


def _check_sizes(a: Permutation, b: Permutation) -> None:
    if a.n != b.n:
        raise DomainError(f"size mismatch: {a.n} != {b.n}")


def kemeny_distance(a: Permutation, b: Permutation) -> int:
    """Number of pairs ordered differently by ``a`` and ``b``."""
    _check_sizes(a, b)
    # Walk b's positions in a's order; every descent pair is a disagreement.
    seq = np.ascontiguousarray(b.rank[a.order])
    return int(kernels.inversion_count(seq))


def kemeny_distance_naive(a: Permutation, b: Permutation) -> int:
    _check_sizes(a, b)
    ra, rb = a.rank, b.rank
    n = a.n
    count = 0
    for i in range(n):
        for j in range(i + 1, n):
            if (ra[i] < ra[j]) != (rb[i] < rb[j]):
                count += 1
    return count


def dislocation_distance(a: Permutation, b: Permutation) -> int:
    _check_sizes(a, b)
    return int(np.abs(a.rank - b.rank).sum())


def max_dislocation(a: Permutation, b: Permutation) -> int:
    _check_sizes(a, b)
    return int(np.abs(a.rank - b.rank).max())


def distance_report(a: Permutation, b: Permutation) -> DistanceReport:
    return DistanceReport(
        kemeny=kemeny_distance(a, b),
        dislocation=dislocation_distance(a, b),
        max_dislocation=max_dislocation(a, b),
    )


def total_score(sigma: Permutation | Sequence[int], q: ScoreMatrix):
    """Sum of ``q(i<j)`` over all pairs with ``i`` placed before ``j``."""
    order = sigma.order if isinstance(sigma, Permutation) else np.asarray(sigma)
    if len(order) != q.n:
        raise DomainError(f"size mismatch: order has {len(order)} elements, q has {q.n}")
    sub = q.values[np.ix_(order, order)]
    s = np.triu(sub, 1).sum()
    return int(s) if np.issubdtype(q.values.dtype, np.integer) else float(s)


# -- text format ------------------------------------------------------------

def parse_permutation_line(line: str, lineno: int | None = None) -> Permutation:
    try:
        ranks = [int(tok) for tok in line.split()]
    except ValueError as exc:
        raise DataError(f"non-integer token ({exc})", lineno) from None
    n = len(ranks)
    if n == 0:
        raise DataError("empty permutation", lineno)
    if sorted(ranks) != list(range(1, n + 1)):
        raise DataError(f"not a bijection on 1..{n}", lineno)
    return Permutation(np.asarray(ranks) - 1)


def parse_permutations(text: str | Iterable[str]) -> list[Permutation]:
    lines = text.splitlines() if isinstance(text, str) else text
    perms = []
    for lineno, line in enumerate(lines, start=1):
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        p = parse_permutation_line(line, lineno)
        if perms and p.n != perms[0].n:
            raise DataError(f"expected {perms[0].n} entries, found {p.n}", lineno)
        perms.append(p)
    return perms


def format_permutation(p: Permutation) -> str:
    return " ".join(str(int(x) + 1) for x in p.rank)


def format_permutations(perms: Iterable[Permutation]) -> str:
    return "".join(format_permutation(p) + "\n" for p in perms)
