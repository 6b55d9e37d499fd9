import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from noisy_sort import kernels
from noisy_sort.core import Permutation, ScoreMatrix, total_score
from noisy_sort.errors import CapacityError, DomainError, WindowExhaustedError
from noisy_sort.oracle import brute_force_ml
from noisy_sort.presort_dp import (DpWindow, IntervalDP, band, banded_score, dp_sort,
                                   dp_sort_segment, dp_sort_verified)

from conftest import antisymmetric_matrices, random_antisymmetric

needs_compiled = pytest.mark.skipif(kernels._compiled is None, reason="extension not built")


def score(order, q):
    return total_score(Permutation.from_order(order), q)


def feasible(init, k):
    n = len(init)
    for perm in itertools.permutations(init):
        pos = {e: i for i, e in enumerate(perm)}
        if all(abs(pos[e] - i) <= k for i, e in enumerate(init)):
            yield list(perm)


def window_best(init, q, k):
    """Best order within the window by enumeration, lexicographic tie-break."""
    best = None
    for perm in feasible(init, k):
        s = score(perm, q)
        if best is None or s > best[0] or (s == best[0] and perm < best[1]):
            best = (s, perm)
    return best


def test_zero_scores_give_lexicographic_minimum():
    init = np.array([3, 1, 0, 4, 2])
    q = ScoreMatrix(np.zeros((5, 5), dtype=np.int64))
    got = dp_sort(init, q, 2).tolist()
    assert got == min(feasible(init.tolist(), 2))


def test_three_element_example():
    v = np.array([[0, 1, 1], [-1, 0, 1], [-1, -1, 0]])
    q = ScoreMatrix(v)
    got = dp_sort(np.array([1, 0, 2]), q, 1)
    assert got.tolist() == [0, 1, 2]
    assert score(got, q) == 3
    assert score([1, 0, 2], q) == 1


def test_oracle_equivalence_full_window(rng):
    for _ in range(200):
        n = int(rng.integers(2, 9))
        q = random_antisymmetric(rng, n)
        init = rng.permutation(n)
        got = dp_sort(init, q, n)
        assert score(got, q) == brute_force_ml(q).best_score


@pytest.mark.parametrize("method", ["sweep", "interval"])
def test_matches_window_enumeration(rng, method):
    for _ in range(40):
        n = int(rng.integers(2, 8))
        k = int(rng.integers(1, 4))
        q = random_antisymmetric(rng, n)
        init = rng.permutation(n)
        got = dp_sort(init, q, k, method=method)
        best = window_best(init.tolist(), q, k)
        assert score(got, q) == best[0]
        assert got.tolist() == best[1]


@settings(max_examples=60, deadline=None)
@given(antisymmetric_matrices(max_n=8), st.randoms(use_true_random=False))
def test_window_soundness_and_monotonicity(q, rnd):
    n = q.n
    init = list(range(n))
    rnd.shuffle(init)
    init = np.array(init)
    prev = None
    for k in range(0, n + 1):
        got = dp_sort(init, q, k)
        where = {int(e): i for i, e in enumerate(got)}
        assert all(abs(where[int(e)] - i) <= k for i, e in enumerate(init))
        s = score(got, q)
        assert prev is None or s >= prev
        prev = s
    assert prev == brute_force_ml(q).best_score


def test_split_consistency(rng):
    for _ in range(30):
        n = int(rng.integers(3, 12))
        k = int(rng.integers(1, 3))
        q = random_antisymmetric(rng, n)
        init = rng.permutation(n)
        solver = IntervalDP(init, q, k)
        order, s_trunc = solver.solve_with_score()
        assert s_trunc + solver.far_constant() == score(order, q)
        assert banded_score(init, order, q, k) == s_trunc


def test_deterministic(rng):
    q = random_antisymmetric(rng, 30)
    init = rng.permutation(30)
    assert (dp_sort(init, q, 3) == dp_sort(init, q, 3)).all()


def test_errors(rng):
    q = random_antisymmetric(rng, 5)
    with pytest.raises(CapacityError):
        DpWindow(11)
    with pytest.raises(DomainError):
        dp_sort(np.arange(4), q, 1)
    with pytest.raises(DomainError):
        dp_sort(np.arange(5), q, 1, method="nope")


def test_verified_no_escalation_when_window_holds(rng):
    v = np.triu(np.ones((40, 40), dtype=np.int64), 1)
    q = ScoreMatrix(v - v.T)
    init = np.arange(40)
    init[[3, 5]] = init[[5, 3]]
    out = dp_sort_verified(init, q, DpWindow(3))
    assert out.escalations == 0 and out.verified
    assert (out.order == dp_sort(init, q, 3)).all()


def test_verified_escalates_from_reversal():
    n = 8
    v = np.triu(np.ones((n, n), dtype=np.int64), 1)
    q = ScoreMatrix(v - v.T)
    out = dp_sort_verified(np.arange(n)[::-1].copy(), q, DpWindow(1))
    assert out.escalations >= 1
    assert out.order.tolist() == list(range(n))


def test_verified_zero_scores_stop_at_once():
    q = ScoreMatrix(np.zeros((10, 10), dtype=np.int64))
    out = dp_sort_verified(np.arange(10)[::-1].copy(), q, DpWindow(2))
    assert out.escalations == 0 and out.k == 2


def test_verified_raises_at_cap():
    n = 12
    v = np.triu(np.ones((n, n), dtype=np.int64), 1)
    q = ScoreMatrix(v - v.T)
    with pytest.raises(WindowExhaustedError) as err:
        dp_sort_verified(np.arange(n)[::-1].copy(), q, DpWindow(1, cap_k=3))
    assert err.value.k == 3
    assert score(err.value.improved, q) > score(err.value.previous, q)


@needs_compiled
def test_backends_agree_sweep(rng):
    for _ in range(50):
        n = int(rng.integers(2, 40))
        k = int(rng.integers(1, 4))
        q = random_antisymmetric(rng, n)
        init = rng.permutation(n).astype(np.int64)
        a = dp_sort_segment(init, q, k, backend="compiled")
        b = dp_sort_segment(init, q, k, backend="python")
        assert (a == b).all()


@needs_compiled
def test_backends_agree_inversions(rng):
    for n in (1, 2, 17, 500):
        seq = rng.permutation(n).astype(np.int64)
        assert kernels.inversion_count(seq, "compiled") == kernels.inversion_count(seq, "python")


@needs_compiled
def test_backends_agree_insertion_sweep(rng):
    for _ in range(100):
        n = int(rng.integers(2, 30))
        q = random_antisymmetric(rng, n, -1, 2)
        Q = q.values.astype(np.int8)
        a = rng.permutation(n).astype(np.int64)
        b = a.copy()
        ma = kernels.insertion_sweep(a, Q, "compiled")
        mb = kernels.insertion_sweep(b, Q, "python")
        assert ma == mb and (a == b).all()


def test_insertion_sweep_never_lowers_score(rng):
    for _ in range(50):
        n = int(rng.integers(2, 20))
        q = random_antisymmetric(rng, n, -1, 2)
        order = rng.permutation(n).astype(np.int64)
        before = score(order, q)
        kernels.insertion_sweep(order, q.values)
        assert sorted(order.tolist()) == list(range(n))
        assert score(order, q) >= before


def test_band_layout(rng):
    q = random_antisymmetric(rng, 6)
    init = rng.permutation(6)
    up, down = band(init, q, 1)
    assert up[0, 1] == q[init[0], init[1]]
    assert down[2, 2] == q[init[2], init[0]]
    assert up[5, 1] == 0
