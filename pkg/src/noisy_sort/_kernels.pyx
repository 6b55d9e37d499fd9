# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot loops: the windowed sweep DP and inversion counting."""

import numpy as np

from libc.math cimport INFINITY
from libc.stdint cimport int64_t, int32_t, uint8_t


def inversion_count(const int64_t[::1] seq):
    cdef Py_ssize_t n = seq.shape[0]
    if n < 2:
        return 0
    buf = np.array(seq, dtype=np.int64)
    tmp = np.empty(n, dtype=np.int64)
    cdef int64_t[::1] a = buf
    cdef int64_t[::1] b = tmp
    cdef int64_t[::1] swap_
    cdef Py_ssize_t width = 1, lo, mid, hi, i, j, k
    cdef long long inv = 0
    while width < n:
        lo = 0
        while lo < n:
            mid = lo + width
            if mid > n:
                mid = n
            hi = lo + 2 * width
            if hi > n:
                hi = n
            i = lo
            j = mid
            k = lo
            while i < mid and j < hi:
                if a[i] <= a[j]:
                    b[k] = a[i]
                    i += 1
                else:
                    b[k] = a[j]
                    inv += mid - i
                    j += 1
                k += 1
            while i < mid:
                b[k] = a[i]
                i += 1
                k += 1
            while j < hi:
                b[k] = a[j]
                j += 1
                k += 1
            lo += 2 * width
        swap_ = a
        a = b
        b = swap_
        width *= 2
    return inv


def sweep_dp(const double[:, ::1] up, const double[:, ::1] down,
             const int64_t[::1] labels, int k,
             const int64_t[::1] masks, const int32_t[::1] idx_of):
    """Backward value sweep plus forward reconstruction; see ``_fallback.sweep_dp``."""
    cdef Py_ssize_t n = up.shape[0]
    cdef int w = 2 * k
    cdef Py_ssize_t S = masks.shape[0]
    cdef Py_ssize_t p, si, t, u, x, y, d
    cdef int64_t mask, nm, init_mask = (1 << k) - 1
    cdef int32_t ni
    cdef double g, val, best, vn
    cdef int64_t bestlab, lab
    cdef int bestt

    choice_arr = np.full((n, S), 255, dtype=np.uint8)
    cdef uint8_t[:, ::1] choice = choice_arr
    vnext_arr = np.full(S, -INFINITY)
    vcur_arr = np.empty(S)
    cdef double[::1] vnext = vnext_arr
    cdef double[::1] vcur = vcur_arr
    cdef double[::1] tmpv
    W_arr = np.zeros((w + 1, w + 1))
    tail_arr = np.zeros(w + 1)
    xs_arr = np.zeros(w + 1, dtype=np.int64)
    valid_arr = np.zeros(w + 1, dtype=np.uint8)
    cdef double[:, ::1] W = W_arr
    cdef double[::1] tail = tail_arr
    cdef int64_t[::1] xs = xs_arr
    cdef uint8_t[::1] valid = valid_arr

    vnext[idx_of[init_mask]] = 0.0

    for p in range(n - 1, -1, -1):
        for t in range(w + 1):
            x = p - k + t
            xs[t] = x
            valid[t] = 1 if (x >= 0 and x < n) else 0
        for t in range(w + 1):
            tail[t] = 0.0
            for u in range(w):
                W[t, u] = 0.0
            if not valid[t]:
                continue
            x = xs[t]
            for u in range(w):
                if u == t or not valid[u]:
                    continue
                if u < t:
                    W[t, u] = down[x, t - u]
                else:
                    W[t, u] = up[x, u - t]
            if t < w:
                for d in range(w - t, w):
                    tail[t] += up[x, d]
            else:
                for d in range(1, w):
                    tail[t] += up[x, d]

        for si in range(S):
            mask = masks[si]
            best = -INFINITY
            bestlab = 0
            bestt = 255
            for t in range(w + 1):
                if not valid[t]:
                    continue
                if t < w and (mask >> t) & 1:
                    continue
                nm = mask | (<int64_t>1 << t)
                if not (nm & 1):
                    continue
                ni = idx_of[nm >> 1]
                if ni < 0:
                    continue
                vn = vnext[ni]
                if vn == -INFINITY:
                    continue
                g = tail[t]
                for u in range(w):
                    if u != t and not ((mask >> u) & 1):
                        g += W[t, u]
                val = g + vn
                lab = labels[xs[t]]
                if bestt == 255 or val > best or (val == best and lab < bestlab):
                    best = val
                    bestlab = lab
                    bestt = <int>t
            vcur[si] = best
            choice[p, si] = <uint8_t>bestt
        tmpv = vnext
        vnext = vcur
        vcur = tmpv

    value = vnext[idx_of[init_mask]]
    out_arr = np.empty(n, dtype=np.int64)
    cdef int64_t[::1] out = out_arr
    mask = init_mask
    for p in range(n):
        t = choice[p, idx_of[mask]]
        out[p] = p - k + t
        mask = (mask | (<int64_t>1 << t)) >> 1
    return out_arr, float(value)


def insertion_sweep(int64_t[::1] order, const signed char[:, ::1] Q):
    """One pass of best single-element moves, in place; returns the move count.

    Elements are visited in their order at the start of the pass.  ``Q[x, y]``
    is the score of ``x`` before ``y``; a move is taken only if it gains.
    """
    cdef Py_ssize_t n = order.shape[0]
    cdef Py_ssize_t s, i, j, p, best_j
    cdef long long acc, best, moved = 0
    cdef int64_t e
    snapshot = np.array(order, dtype=np.int64)
    pos_arr = np.empty(Q.shape[0], dtype=np.int64)
    cdef int64_t[::1] snap = snapshot
    cdef int64_t[::1] pos = pos_arr
    for p in range(n):
        pos[order[p]] = p
    for s in range(n):
        e = snap[s]
        i = pos[e]
        best = 0
        best_j = i
        acc = 0
        for j in range(i - 1, -1, -1):
            acc += Q[e, order[j]]
            if acc >= best and acc > 0:
                best = acc
                best_j = j
        acc = 0
        for j in range(i + 1, n):
            acc -= Q[e, order[j]]
            if acc > best:
                best = acc
                best_j = j
        if best_j < i:
            for p in range(i, best_j, -1):
                order[p] = order[p - 1]
                pos[order[p]] = p
        elif best_j > i:
            for p in range(i, best_j):
                order[p] = order[p + 1]
                pos[order[p]] = p
        else:
            continue
        order[best_j] = e
        pos[e] = best_j
        moved += 1
    return moved
