"""Maximum-likelihood sorting from noisy orders and noisy pairwise comparisons."""

from .core import (Permutation, ScoreMatrix, dislocation_distance, kemeny_distance,
                   max_dislocation, total_score)
from .errors import (CapacityError, DataError, DomainError, MissingSignalError,
                     NoisySortError, WindowExhaustedError)
from .kernels import BACKEND
from .mallows import MallowsParams, MrpConfig, MrpResult, sample, sample_many, solve_mrp
from .noisy_comparisons import (NsaConfig, NsaResult, ReplaySource, SignalSource, SnsaParams,
                                SnsaSource, build_score_matrix, solve_nsa)
from .oracle import brute_force_ml, brute_force_mrp
from .presort_dp import DpWindow, dp_sort, dp_sort_verified
from .query_efficient import InsertionConfig, solve_nsa_low_query

__version__ = "0.1.0"

__all__ = [
    "BACKEND", "CapacityError", "DataError", "DomainError", "DpWindow", "InsertionConfig",
    "MallowsParams", "MissingSignalError", "MrpConfig", "MrpResult", "NoisySortError",
    "NsaConfig", "NsaResult", "Permutation", "ReplaySource", "ScoreMatrix", "SignalSource",
    "SnsaParams", "SnsaSource", "WindowExhaustedError", "brute_force_ml", "brute_force_mrp",
    "build_score_matrix", "dislocation_distance", "dp_sort", "dp_sort_verified",
    "kemeny_distance", "max_dislocation", "sample", "sample_many", "solve_mrp", "solve_nsa",
    "solve_nsa_low_query", "total_score",
]
