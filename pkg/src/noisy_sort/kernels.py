"""Kernel selection: the compiled extension when it imports, numpy otherwise.

Set ``NOISY_SORT_PURE=1`` to force the fallback (used by the kernel
benchmark and the cross-implementation tests).
"""

from __future__ import annotations

import os
from functools import lru_cache
from itertools import combinations

import numpy as np

from . import _fallback

try:
    if os.environ.get("NOISY_SORT_PURE", "") not in ("", "0"):
        raise ImportError("pure mode requested")
    from . import _kernels as _compiled
except ImportError:
    _compiled = None

BACKEND = "compiled" if _compiled is not None else "python"


@lru_cache(maxsize=None)
def window_states(k: int) -> tuple[np.ndarray, np.ndarray]:
    """All ``2k``-bit masks with exactly ``k`` bits set, and a reverse index."""
    w = 2 * k
    masks = np.array(
        sorted(sum(1 << b for b in c) for c in combinations(range(w), k)),
        dtype=np.int64,
    )
    idx_of = np.full(1 << w, -1, dtype=np.int32)
    idx_of[masks] = np.arange(masks.size, dtype=np.int32)
    masks.setflags(write=False)
    idx_of.setflags(write=False)
    return masks, idx_of


def inversion_count(seq: np.ndarray, backend: str | None = None) -> int:
    seq = np.ascontiguousarray(seq, dtype=np.int64)
    if _pick(backend) == "compiled":
        return int(_compiled.inversion_count(seq))
    return _fallback.inversion_count(seq)


def sweep_dp(up: np.ndarray, down: np.ndarray, labels: np.ndarray, k: int,
             backend: str | None = None) -> tuple[np.ndarray, float]:
    masks, idx_of = window_states(k)
    up = np.ascontiguousarray(up, dtype=np.float64)
    down = np.ascontiguousarray(down, dtype=np.float64)
    labels = np.ascontiguousarray(labels, dtype=np.int64)
    if _pick(backend) == "compiled":
        return _compiled.sweep_dp(up, down, labels, k, masks, idx_of)
    return _fallback.sweep_dp(up, down, labels, k, masks, idx_of)


def _pick(backend: str | None) -> str:
    if backend is None:
        return BACKEND
    if backend == "compiled" and _compiled is None:
        raise RuntimeError("compiled kernels are not available")
    return backend


def insertion_sweep(order: np.ndarray, Q: np.ndarray, backend: str | None = None) -> int:
    """Best single-element moves over ``order`` (int64, modified in place)."""
    Q = np.ascontiguousarray(Q, dtype=np.int8)
    if _pick(backend) == "compiled":
        return int(_compiled.insertion_sweep(order, Q))
    return _fallback.insertion_sweep(order, Q)
