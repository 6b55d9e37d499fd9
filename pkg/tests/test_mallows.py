import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from noisy_sort.core import Permutation, kemeny_distance
from noisy_sort.errors import CapacityError, DomainError
from noisy_sort.mallows import (MallowsParams, MrpConfig, average_positions, averaged_order,
                                insertion_probabilities, kemeny_objective, displacement_tail_bound,
                                log_partition, mahonian_counts, mallows_pmf, pairwise_counts,
                                sample, sample_many, solve_mrp, tail_probe)
from noisy_sort.oracle import brute_force_mrp

LN2 = math.log(2)


def all_perms(n):
    return [Permutation.from_order(o) for o in itertools.permutations(range(n))]


def test_pmf_three_elements():
    p = MallowsParams(3, LN2)
    assert mallows_pmf(Permutation.identity(3), p) == pytest.approx(8 / 21, abs=1e-12)
    assert math.exp(log_partition(3, LN2)) == pytest.approx(21 / 8)


def test_pmf_concentrates():
    p = MallowsParams(5, 50.0)
    assert mallows_pmf(Permutation.identity(5), p) == pytest.approx(1.0, abs=1e-10)


def test_pmf_depends_only_on_distance():
    p = MallowsParams(3, 0.7)
    at_one = [mallows_pmf(s, p) for s in all_perms(3) if kemeny_distance(s, p.truth) == 1]
    assert len(at_one) == 2 and at_one[0] == at_one[1]


@pytest.mark.parametrize("n", range(1, 7))
def test_pmf_normalised(n):
    p = MallowsParams(n, 0.8, truth=Permutation.reversal(n))
    assert abs(sum(mallows_pmf(s, p) for s in all_perms(n)) - 1) <= 1e-12


def test_pmf_capacity():
    with pytest.raises(CapacityError):
        mallows_pmf(Permutation.identity(11), MallowsParams(11, 1.0))


def test_mahonian_counts():
    assert mahonian_counts(3) == [1, 2, 2, 1]
    assert sum(mahonian_counts(6)) == 720


def test_insertion_probabilities_match_marginal():
    probs = insertion_probabilities(3, LN2)
    assert probs == pytest.approx([4 / 7, 2 / 7, 1 / 7])
    # the third element of the truth ends at position 2 - d, so d is its
    # count of elements placed after it
    p = MallowsParams(3, LN2)
    marginal = np.zeros(3)
    for s in all_perms(3):
        marginal[2 - s.rank[2]] += mallows_pmf(s, p)
    assert marginal == pytest.approx(probs)


def test_sampler_deterministic_and_consistent():
    p = MallowsParams(20, 0.5)
    assert sample(p, 3) == sample(p, 3)
    assert (sample_many(p, 1, 3)[0] == sample(p, 3).rank).all()


def test_sampler_large_beta():
    p = MallowsParams(6, 50.0, truth=Permutation([3, 1, 0, 2, 5, 4]))
    ranks = sample_many(p, 10_000, 1)
    assert (ranks == p.truth.rank).all(axis=1).mean() > 0.999
    assert sample(p, 9) == p.truth


def test_sampler_chi_square_small():
    p = MallowsParams(3, 1.0, truth=Permutation([1, 2, 0]))
    ranks = sample_many(p, 60_000, 11)
    perms = all_perms(3)
    index = {tuple(s.rank.tolist()): i for i, s in enumerate(perms)}
    counts = np.bincount([index[tuple(r)] for r in ranks.tolist()], minlength=6)
    expected = np.array([mallows_pmf(s, p) for s in perms]) * ranks.shape[0]
    assert stats.chisquare(counts, expected).pvalue > 0.001


def test_tail_probe_edges():
    p = MallowsParams(10, 1.0)
    assert tail_probe(p, 4, 0, 5, 0) == 1.0
    assert tail_probe(p, 4, 11, 5, 0) == 0.0
    with pytest.raises(DomainError):
        tail_probe(p, 0, 1, 5, 0)


def test_tail_probe_against_bound():
    p = MallowsParams(100, 1.0)
    est = tail_probe(p, 50, 5, 100_000, 5)
    bound = displacement_tail_bound(1.0, 5)
    assert bound == pytest.approx(2 * math.exp(-5) / (1 - math.exp(-1)))
    assert est <= bound + 4 * math.sqrt(bound * (1 - bound) / 100_000)


def test_tail_probe_matches_full_sampler():
    p = MallowsParams(30, 0.4)
    ranks = sample_many(p, 40_000, 2)
    direct = np.mean(np.abs(ranks[:, 9] - 9) >= 3)
    est = tail_probe(p, 10, 3, 40_000, 3)
    assert abs(direct - est) < 0.02


def test_average_positions():
    a = Permutation([2, 0, 1, 4, 3])
    assert average_positions([a]).tolist() == (a.rank + 1).tolist()
    b = Permutation([4, 0, 1, 2, 3])
    assert average_positions([a, b])[0] == 4.0
    with pytest.raises(DomainError):
        average_positions([])


@given(st.integers(1, 6), st.integers(1, 15), st.integers(0, 2 ** 32 - 1))
def test_average_positions_sum(r, n, seed):
    samples = sample_many(MallowsParams(n, 0.3), r, seed)
    assert average_positions(samples).sum() == pytest.approx(n * (n + 1) / 2)


def test_averaged_order_ties_by_id():
    a = Permutation.identity(2)
    b = Permutation.reversal(2)
    assert averaged_order([a, b]).tolist() == [0, 1]


def test_pairwise_counts_examples(rng):
    q = pairwise_counts([Permutation.identity(4)] * 3)
    assert all(q[i, j] == 3 for i in range(4) for j in range(i + 1, 4))
    q = pairwise_counts([Permutation.identity(2), Permutation.reversal(2)])
    assert q[0, 1] == 1 and q[1, 0] == 1
    samples = sample_many(MallowsParams(9, 0.5), 6, 4)
    q = pairwise_counts(samples)
    assert q.values.sum() == 6 * math.comb(9, 2)
    assert q.complement == 6
    with pytest.raises(DomainError):
        pairwise_counts([])


def test_solve_single_sample():
    p = Permutation([3, 0, 4, 1, 2])
    res = solve_mrp([p], MrpConfig(beta=1.0))
    assert res.order == p and res.objective == 0


def test_solve_two_opposite_samples():
    res = solve_mrp([Permutation.identity(2), Permutation.reversal(2)], MrpConfig(beta=1.0))
    assert res.order == Permutation.identity(2) and res.objective == 1


def test_solve_against_oracle(rng):
    for i in range(100):
        n = int(rng.integers(2, 8))
        r = int(rng.integers(1, 6))
        p = MallowsParams(n, 0.5, r, Permutation.from_order(rng.permutation(n)))
        samples = [Permutation(row) for row in sample_many(p, r, i)]
        res = solve_mrp(samples, MrpConfig(beta=0.5))
        assert res.objective == brute_force_mrp(samples).best_score
        assert res.objective == kemeny_objective(res.order, samples)


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 7), st.integers(1, 5), st.integers(0, 10_000))
def test_solve_relabel_equivariant(n, r, seed):
    rng = np.random.default_rng(seed)
    samples = [Permutation(row) for row in sample_many(MallowsParams(n, 0.4), r, seed)]
    mapping = rng.permutation(n)
    moved = [s.relabel(mapping) for s in samples]
    a = solve_mrp(samples, MrpConfig(beta=0.4))
    b = solve_mrp(moved, MrpConfig(beta=0.4))
    assert a.objective == b.objective
    if brute_force_mrp(samples, cross_check=False).tie_count == 1:
        assert b.order == a.order.relabel(mapping)


def test_window_rules():
    cfg = MrpConfig(beta=1.0)
    assert cfg.raw_window(1000, 1) == max(4, math.ceil(2 * 3 * math.log(1000)))
    assert cfg.raw_window(1000, 16) < cfg.raw_window(1000, 1)
    assert cfg.window(1000, 1) == cfg.cap_k
    assert MrpConfig(beta=1.0, window_k=3).window(50, 1) == 3
    paper = MrpConfig(beta=1.0, paper_constants=True)
    assert paper.raw_window(100, 2) == math.ceil(33 * paper.L(100, 2))
    assert MrpConfig().raw_window(100, 1) == 4
    with pytest.raises(DomainError):
        MrpConfig().L(10, 1)


def test_params_validation():
    with pytest.raises(DomainError):
        MallowsParams(3, 0.0)
    with pytest.raises(DomainError):
        MallowsParams(3, 1.0, r=0)
    with pytest.raises(DomainError):
        MallowsParams(3, 1.0, truth=Permutation.identity(4))
