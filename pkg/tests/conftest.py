import numpy as np
import pytest
from hypothesis import strategies as st

from noisy_sort.core import Permutation, ScoreMatrix


def random_perm(rng, n):
    return Permutation.from_order(rng.permutation(n))


def random_antisymmetric(rng, n, low=-3, high=4):
    v = rng.integers(low, high, size=(n, n))
    v = np.triu(v, 1)
    return ScoreMatrix(v - v.T)


@st.composite
def permutations(draw, min_n=1, max_n=12):
    n = draw(st.integers(min_n, max_n))
    order = draw(st.permutations(list(range(n))))
    return Permutation.from_order(order)


@st.composite
def perm_pairs(draw, min_n=1, max_n=12):
    n = draw(st.integers(min_n, max_n))
    a = draw(st.permutations(list(range(n))))
    b = draw(st.permutations(list(range(n))))
    return Permutation.from_order(a), Permutation.from_order(b)


@st.composite
def antisymmetric_matrices(draw, min_n=2, max_n=7, values=(-2, -1, 0, 1, 2)):
    n = draw(st.integers(min_n, max_n))
    cells = draw(st.lists(st.sampled_from(values), min_size=n * n, max_size=n * n))
    v = np.triu(np.array(cells, dtype=np.int64).reshape(n, n), 1)
    return ScoreMatrix(v - v.T)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


LOW_QUERY_GRID = (512, 1024, 2048, 4096)


@pytest.fixture(scope="session")
def low_query_runs():
    """One low-query solve per grid size at lambda = 0.2 (about a minute)."""
    from noisy_sort.harness import run_snsa_trial

    return {n: run_snsa_trial(n, 0.2, 0, low_query=True) for n in LOW_QUERY_GRID}


# criterion number -> (passed, detail); filled by test_acceptance
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[num]
        terminalreporter.write_line(f"criterion {num:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
