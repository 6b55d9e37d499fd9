"""Pure-Python/numpy versions of the compiled kernels.

Same inputs, same outputs, same tie-breaking as ``_kernels.pyx``.  The sweep
is vectorised across window states so it stays usable without a compiler.
"""

from __future__ import annotations

import numpy as np


def inversion_count(seq) -> int:
    a = [int(x) for x in seq]
    n = len(a)
    inv = 0
    width = 1
    while width < n:
        out = []
        for lo in range(0, n, 2 * width):
            left = a[lo:lo + width]
            right = a[lo + width:lo + 2 * width]
            i = j = 0
            while i < len(left) and j < len(right):
                if left[i] <= right[j]:
                    out.append(left[i])
                    i += 1
                else:
                    out.append(right[j])
                    inv += len(left) - i
                    j += 1
            out.extend(left[i:])
            out.extend(right[j:])
        a = out
        width *= 2
    return inv


def sweep_dp(up, down, labels, k, masks, idx_of):
    """Exact windowed maximisation over orders with displacement <= ``k``.

    Positions are filled left to right.  Before position ``p`` is filled the
    only undecided elements near the frontier are the ``2k`` elements with
    initial index in ``[p-k, p+k-1]``; a state is the bitmask of those already
    placed (always exactly ``k`` bits once indices below 0 count as placed).
    ``up[x, d]`` / ``down[x, d]`` hold ``q(x, x+d)`` / ``q(x, x-d)``.  Only
    pairs whose initial indices differ by less than ``2k`` are scored; all
    other pairs keep their initial order in every admissible arrangement.

    Returns ``(order, value)`` where ``order`` lists initial indices and ties
    in value go to the smallest label at the earliest position.
    """
    n = up.shape[0]
    w = 2 * k
    S = masks.size
    init_mask = (1 << k) - 1
    bits = ((masks[:, None] >> np.arange(w)) & 1).astype(bool)
    choice = np.full((n, S), 255, dtype=np.uint8)
    vnext = np.full(S, -np.inf)
    vnext[idx_of[init_mask]] = 0.0

    for p in range(n - 1, -1, -1):
        xs = p - k + np.arange(w + 1)
        valid = (xs >= 0) & (xs < n)
        W = np.zeros((w + 1, w))
        tail = np.zeros(w + 1)
        for t in range(w + 1):
            if not valid[t]:
                continue
            x = xs[t]
            for u in range(w):
                if u == t or not valid[u]:
                    continue
                W[t, u] = down[x, t - u] if u < t else up[x, u - t]
            lo = w - t if t < w else 1
            tail[t] = up[x, lo:w].sum()

        best = np.full(S, -np.inf)
        bestt = np.full(S, 255, dtype=np.int64)
        cand = [t for t in range(w + 1) if valid[t]]
        cand.sort(key=lambda t: labels[xs[t]])
        unplaced = ~bits
        for t in cand:
            tbit = np.int64(1) << t
            ok = (masks & tbit) == 0 if t < w else np.ones(S, dtype=bool)
            nm = masks | tbit
            ok &= (nm & 1) == 1
            ni = idx_of[nm >> 1]
            ok &= ni >= 0
            vn = np.where(ok, vnext[np.where(ni >= 0, ni, 0)], -np.inf)
            ok &= vn > -np.inf
            g = tail[t] + unplaced.astype(np.float64) @ W[t]
            val = np.where(ok, g + vn, -np.inf)
            better = ok & ((bestt == 255) | (val > best))
            best = np.where(better, val, best)
            bestt = np.where(better, t, bestt)
        choice[p] = bestt.astype(np.uint8)
        vnext = best

    value = float(vnext[idx_of[init_mask]])
    out = np.empty(n, dtype=np.int64)
    mask = init_mask
    for p in range(n):
        t = int(choice[p, idx_of[mask]])
        out[p] = p - k + t
        mask = (mask | (1 << t)) >> 1
    return out, value


def insertion_sweep(order: np.ndarray, Q: np.ndarray) -> int:
    """Numpy version of the compiled single-element move pass (in place)."""
    n = order.size
    cur = order.tolist()
    moved = 0
    for e in order.copy().tolist():
        i = cur.index(e)
        row = Q[e, cur].astype(np.int64)
        g = np.zeros(n, dtype=np.int64)
        if i:
            g[:i] = np.cumsum(row[:i][::-1])[::-1]
        if i < n - 1:
            g[i + 1:] = -np.cumsum(row[i + 1:])
        j = int(np.argmax(g))
        if g[j] > 0:
            cur.pop(i)
            cur.insert(j, e)
            moved += 1
    order[:] = cur
    return moved
