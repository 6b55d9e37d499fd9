import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from noisy_sort.core import Permutation, total_score
from noisy_sort.errors import DataError, DomainError, MissingSignalError
from noisy_sort.noisy_comparisons import (NsaConfig, ReplaySource, SnsaParams, SnsaSource,
                                          block_scan_position, build_score_matrix,
                                          estimate_bias, exact_ml_check, insertion_scores,
                                          order_score, pair_uniforms, score_of_signal,
                                          snsa_signal, solve_nsa, write_signals)
from noisy_sort.oracle import brute_force_ml


def source(n, lam, seed=0, truth=None):
    if truth is None:
        truth = Permutation.from_order(np.random.default_rng(seed + 1000).permutation(n))
    return SnsaSource(SnsaParams(n, lam, truth, seed))


def test_noiseless_signals_follow_truth():
    src = source(30, 0.5, 4)
    r = src.truth.rank
    for a in range(30):
        for b in range(30):
            if a != b:
                assert snsa_signal(src, a, b) == (1 if r[a] > r[b] else -1)


def test_memoised_pair_counts_once():
    src = source(10, 0.1)
    v = snsa_signal(src, 2, 7)
    assert src.distinct_queries == 1
    assert snsa_signal(src, 7, 2) == -v
    assert src.distinct_queries == 1
    with pytest.raises(DomainError):
        snsa_signal(src, 3, 3)


def test_correct_rate():
    n = 500
    src = source(n, 0.2, 9)
    lo, hi = np.triu_indices(n, 1)
    pick = np.random.default_rng(0).choice(lo.size, 100_000, replace=False)
    a, b = lo[pick], hi[pick]
    truth_after = src.truth.rank[a] > src.truth.rank[b]
    votes = src.votes(a, b)
    rate = np.mean((votes == 1) == truth_after)
    assert abs(rate - 0.7) <= 4 * math.sqrt(0.21 / 100_000)
    assert src.distinct_queries == 100_000


@settings(max_examples=50)
@given(st.lists(st.tuples(st.integers(0, 11), st.integers(0, 11)), max_size=80))
def test_one_draw_contract(queries):
    src = source(12, 0.25, 3)
    seen = {}
    for a, b in queries:
        if a == b:
            continue
        v = snsa_signal(src, a, b)
        key = (min(a, b), max(a, b))
        oriented = v if a < b else -v
        assert seen.setdefault(key, oriented) == oriented
    assert src.distinct_queries == len(seen)


def test_signals_do_not_depend_on_query_order():
    a, b = source(40, 0.2, 5), source(40, 0.2, 5)
    lo, hi = np.triu_indices(40, 1)
    va = a.votes(lo, hi)
    vb = b.votes(lo[::-1], hi[::-1])[::-1]
    assert (va == vb).all()
    u = pair_uniforms(5, np.arange(1000))
    assert (0 <= u).all() and (u < 1).all()


def test_score_of_signal():
    assert score_of_signal(0.25, -1) == pytest.approx(math.log(3))
    assert score_of_signal(0.25, 1) == pytest.approx(-math.log(3))
    assert abs(score_of_signal(1e-9, 1)) < 1e-7
    for lam in (0.05, 0.3):
        for vote in (1, -1):
            assert score_of_signal(lam, vote, True) + score_of_signal(lam, vote, False) == 0
    assert score_of_signal(0.5, -1) == math.inf
    with pytest.raises(DomainError):
        score_of_signal(0.6, 1)


def test_build_score_matrix():
    src = source(7, 0.5, 2)
    q = build_score_matrix(src)
    assert q.antisymmetric and (q.values == -q.values.T).all()
    assert brute_force_ml(q).best_order == src.truth
    src = source(12, 0.2, 2)
    snsa_signal(src, 0, 1)
    snsa_signal(src, 5, 9)
    build_score_matrix(src, [0, 1, 2, 3, 4, 5])
    assert src.distinct_queries == math.comb(6, 2) + 1
    with pytest.raises(DomainError):
        build_score_matrix(src, [1, 1])


def test_solve_noiseless():
    for n in (2, 3, 9, 10, 60, 300):
        src = source(n, 0.5, n)
        res = solve_nsa(src, seed=n)
        assert res.order == src.truth


def test_solve_against_oracle():
    for i in range(100):
        n = 2 + i % 7
        src = source(n, 0.3, i)
        res = solve_nsa(src, seed=i)
        assert res.score == brute_force_ml(build_score_matrix(src)).best_score
        assert exact_ml_check(src, res.order)


def test_solve_relabel_equivariant():
    for i in range(20):
        n = 3 + i % 6
        src = source(n, 0.2, i)
        mapping = np.random.default_rng(i).permutation(n)
        table = {}
        for lo, hi, vote in [(x, y, v) for x, y, v in _all_pairs(src)]:
            table[(int(mapping[lo]), int(mapping[hi]))] = vote
        moved = ReplaySource(n, table)
        a = solve_nsa(src, seed=i)
        b = solve_nsa(moved, seed=i)
        assert a.score == b.score


def _all_pairs(src):
    lo, hi = np.triu_indices(src.n, 1)
    src.votes(lo, hi)
    return src.drawn_pairs()


def test_solve_deterministic():
    a = solve_nsa(source(150, 0.2, 1), seed=3)
    b = solve_nsa(source(150, 0.2, 1), seed=3)
    assert a.order == b.order and a.score == b.score
    assert a.to_json() == b.to_json()


def test_solve_medium_quality():
    n = 1000
    src = source(n, 0.2, 7)
    res = solve_nsa(src, seed=7)
    d = np.abs(res.order.rank - src.truth.rank)
    assert d.max() <= 10 * math.log2(n)
    assert res.score == order_score(src, res.order.order)
    assert res.distinct_queries == src.distinct_queries


def test_result_json():
    res = solve_nsa(source(5, 0.5, 0), seed=0)
    out = res.to_json()
    assert set(out) == {"order", "score", "distinct_queries", "escalations"}
    assert sorted(out["order"]) == [1, 2, 3, 4, 5]


def test_config():
    src = source(100, 0.2)
    cfg = NsaConfig()
    assert cfg.c3_for(src) == pytest.approx(3 / 0.04)
    assert cfg.block_length(src) == math.ceil(max(8, 75 * math.log(100)))
    assert NsaConfig(c3=2.0).block_length(src) == math.ceil(max(8, 2 * math.log(100)))
    with pytest.raises(DomainError):
        NsaConfig(c3=0)
    with pytest.raises(DomainError):
        NsaConfig(dp_window=6, cap_k=5)


def test_block_scan_and_insertion_scores():
    before = np.array([1.0, 1.0, -1.0])
    c = insertion_scores(before, -before)
    assert int(np.argmax(c)) == 2
    src = source(60, 0.5, 2, truth=Permutation.identity(60))
    order = np.array([e for e in range(60) if e != 31])
    assert block_scan_position(order, 31, src, 8) == 31


def test_estimate_bias_examples():
    for m in (1, 5, 50):
        assert estimate_bias(0.5, m, 1000).p_hat == 1.0
    est = estimate_bias(0.2, 200, 10_000, seed=1)
    assert est.p_hat >= 1 - 2 ** (-0.01 * 200)
    assert est.gamma_hat > 0.01
    est = estimate_bias(0.45, 300, 10_000, correct_fraction=2 / 3, seed=2)
    assert est.correct == 200 and est.p_hat > 0.99
    with pytest.raises(DomainError):
        estimate_bias(0.2, 0, 10)


def test_replay_round_trip(tmp_path):
    src = source(9, 0.2, 5)
    path = tmp_path / "sig.txt"
    write_signals(src, path)
    rep = ReplaySource.from_file(path)
    lo, hi = np.triu_indices(9, 1)
    assert (rep.votes(lo, hi) == src.votes(lo, hi)).all()
    a = solve_nsa(source(9, 0.2, 5), seed=1)
    b = solve_nsa(ReplaySource.from_file(path), seed=1)
    assert a.to_json() == b.to_json()


@pytest.mark.parametrize("text,line", [
    ("1 2 +1\n1 2\n", 2),
    ("1 2 +1\n2 3 0\n", 2),
    ("1 2 +1\n2 1 +1\n", 2),
    ("# c\n1 x 1\n", 2),
    ("3 3 1\n", 1),
])
def test_replay_errors(tmp_path, text, line):
    path = tmp_path / "bad.txt"
    path.write_text(text)
    with pytest.raises(DataError) as err:
        ReplaySource.from_file(path)
    assert err.value.line == line


def test_replay_missing_pair(tmp_path):
    path = tmp_path / "few.txt"
    path.write_text("1 2 -1\n2 3 -1\n")
    rep = ReplaySource.from_file(path)
    assert snsa_signal(rep, 1, 0) == 1
    with pytest.raises(MissingSignalError):
        snsa_signal(rep, 0, 2)


def test_total_score_matches_order_score():
    src = source(40, 0.3, 1)
    q = build_score_matrix(src)
    order = np.random.default_rng(0).permutation(40)
    assert order_score(src, order) == total_score(Permutation.from_order(order), q)
