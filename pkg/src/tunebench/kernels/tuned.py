"""Tuned kernel variants and the evaluation engine.

Every kernel exposes the same tuning vocabulary where it makes sense: tile
or chunk extents with 0 meaning "whole extent", a loop-order permutation, a
thread count realized as a chunked parallel loop, a work-item schedule
(static / dynamic / guided), and a 4-wide unroll switch.

Determinism notes. Thread chunking always partitions an output dimension,
so results never depend on how many workers actually run. Kernels whose
arithmetic is exact per element (stencil, scal, spmm) are bitwise identical
across all configurations; the reduction kernels differ only by float
reassociation. kmeans is bitwise identical across configurations by
construction: assignment arithmetic is canonical per point, and the update
and objective passes are serial canonical loops.

Hidden constraints live here, not in the search space: a configuration can
pass every known constraint and still be refused at run time, either because
the packing workspace its tiles imply exceeds the study's scratch budget, or
because it asks for more threads than the declared machine tolerates. Both
rules are deterministic functions of the configuration and the study's
problem block, so any machine reproduces the same feasibility set.
"""

from __future__ import annotations

import os
import statistics
import time
from typing import Callable, Mapping

import numpy as np
from numba import njit, prange

from ..records import FidelitySettings, InvalidConfigError, QueryResult
from .problems import (
    KMEANS_MAX_ITERS,
    KMEANS_TOL,
    STENCIL_WEIGHTS,
    KernelProblem,
    MalformedProblemError,
    assign_point,
    compute_reference,
    kmeans_objective,
    kmeans_update,
)
from .traffic import traffic_model

__all__ = [
    "execute",
    "scratch_bytes",
    "hidden_infeasibility",
    "clear_cache",
    "list_default_config",
    "DEFAULT_CONFIGS",
    "HiddenInfeasible",
    "KernelVerificationError",
    "relative_error",
]


class HiddenInfeasible(Exception):
    """Internal marker; execute() converts this to an infeasible result."""


class KernelVerificationError(RuntimeError):
    """A tuned run disagreed with the naive reference."""


# gemm block bodies, one per loop order. Each covers the half-open block
# [i0,i1) x [j0,j1) x [k0,k1) and accumulates into out.


@njit(cache=True)
def _g_ijk(A, B, out, i0, i1, j0, j1, k0, k1, unroll):
    if unroll:
        for i in range(i0, i1):
            for j in range(j0, j1):
                a0 = 0.0
                a1 = 0.0
                a2 = 0.0
                a3 = 0.0
                kk = k0
                while kk + 4 <= k1:
                    a0 += A[i, kk] * B[kk, j]
                    a1 += A[i, kk + 1] * B[kk + 1, j]
                    a2 += A[i, kk + 2] * B[kk + 2, j]
                    a3 += A[i, kk + 3] * B[kk + 3, j]
                    kk += 4
                tail = 0.0
                while kk < k1:
                    tail += A[i, kk] * B[kk, j]
                    kk += 1
                out[i, j] += a0 + a1 + a2 + a3 + tail
    else:
        for i in range(i0, i1):
            for j in range(j0, j1):
                acc = 0.0
                for kk in range(k0, k1):
                    acc += A[i, kk] * B[kk, j]
                out[i, j] += acc


@njit(cache=True)
def _g_jik(A, B, out, i0, i1, j0, j1, k0, k1, unroll):
    if unroll:
        for j in range(j0, j1):
            for i in range(i0, i1):
                a0 = 0.0
                a1 = 0.0
                a2 = 0.0
                a3 = 0.0
                kk = k0
                while kk + 4 <= k1:
                    a0 += A[i, kk] * B[kk, j]
                    a1 += A[i, kk + 1] * B[kk + 1, j]
                    a2 += A[i, kk + 2] * B[kk + 2, j]
                    a3 += A[i, kk + 3] * B[kk + 3, j]
                    kk += 4
                tail = 0.0
                while kk < k1:
                    tail += A[i, kk] * B[kk, j]
                    kk += 1
                out[i, j] += a0 + a1 + a2 + a3 + tail
    else:
        for j in range(j0, j1):
            for i in range(i0, i1):
                acc = 0.0
                for kk in range(k0, k1):
                    acc += A[i, kk] * B[kk, j]
                out[i, j] += acc


@njit(cache=True)
def _g_ikj(A, B, out, i0, i1, j0, j1, k0, k1, unroll):
    if unroll:
        for i in range(i0, i1):
            for kk in range(k0, k1):
                a = A[i, kk]
                j = j0
                while j + 4 <= j1:
                    out[i, j] += a * B[kk, j]
                    out[i, j + 1] += a * B[kk, j + 1]
                    out[i, j + 2] += a * B[kk, j + 2]
                    out[i, j + 3] += a * B[kk, j + 3]
                    j += 4
                while j < j1:
                    out[i, j] += a * B[kk, j]
                    j += 1
    else:
        for i in range(i0, i1):
            for kk in range(k0, k1):
                a = A[i, kk]
                for j in range(j0, j1):
                    out[i, j] += a * B[kk, j]


@njit(cache=True)
def _g_kij(A, B, out, i0, i1, j0, j1, k0, k1, unroll):
    if unroll:
        for kk in range(k0, k1):
            for i in range(i0, i1):
                a = A[i, kk]
                j = j0
                while j + 4 <= j1:
                    out[i, j] += a * B[kk, j]
                    out[i, j + 1] += a * B[kk, j + 1]
                    out[i, j + 2] += a * B[kk, j + 2]
                    out[i, j + 3] += a * B[kk, j + 3]
                    j += 4
                while j < j1:
                    out[i, j] += a * B[kk, j]
                    j += 1
    else:
        for kk in range(k0, k1):
            for i in range(i0, i1):
                a = A[i, kk]
                for j in range(j0, j1):
                    out[i, j] += a * B[kk, j]


@njit(cache=True)
def _g_jki(A, B, out, i0, i1, j0, j1, k0, k1, unroll):
    if unroll:
        for j in range(j0, j1):
            for kk in range(k0, k1):
                b = B[kk, j]
                i = i0
                while i + 4 <= i1:
                    out[i, j] += A[i, kk] * b
                    out[i + 1, j] += A[i + 1, kk] * b
                    out[i + 2, j] += A[i + 2, kk] * b
                    out[i + 3, j] += A[i + 3, kk] * b
                    i += 4
                while i < i1:
                    out[i, j] += A[i, kk] * b
                    i += 1
    else:
        for j in range(j0, j1):
            for kk in range(k0, k1):
                b = B[kk, j]
                for i in range(i0, i1):
                    out[i, j] += A[i, kk] * b


@njit(cache=True)
def _g_kji(A, B, out, i0, i1, j0, j1, k0, k1, unroll):
    if unroll:
        for kk in range(k0, k1):
            for j in range(j0, j1):
                b = B[kk, j]
                i = i0
                while i + 4 <= i1:
                    out[i, j] += A[i, kk] * b
                    out[i + 1, j] += A[i + 1, kk] * b
                    out[i + 2, j] += A[i + 2, kk] * b
                    out[i + 3, j] += A[i + 3, kk] * b
                    i += 4
                while i < i1:
                    out[i, j] += A[i, kk] * b
                    i += 1
    else:
        for kk in range(k0, k1):
            for j in range(j0, j1):
                b = B[kk, j]
                for i in range(i0, i1):
                    out[i, j] += A[i, kk] * b


@njit(cache=True, parallel=True)
def _gemm_run(A, B, out, ti, tj, tk, o0, o1, o2, threads, unroll):
    m, kd = A.shape
    n = B.shape[1]
    out[:, :] = 0.0
    chunk = (m + threads - 1) // threads
    for t in prange(threads):
        i_lo = t * chunk
        i_hi = min(i_lo + chunk, m)
        if i_lo >= i_hi:
            continue
        bi = ti if ti > 0 else (i_hi - i_lo)
        bj = tj if tj > 0 else n
        bk = tk if tk > 0 else kd
        ni = (i_hi - i_lo + bi - 1) // bi
        nj = (n + bj - 1) // bj
        nk = (kd + bk - 1) // bk
        n0 = ni if o0 == 0 else (nj if o0 == 1 else nk)
        n1 = ni if o1 == 0 else (nj if o1 == 1 else nk)
        n2 = ni if o2 == 0 else (nj if o2 == 1 else nk)
        for x0 in range(n0):
            for x1 in range(n1):
                for x2 in range(n2):
                    ib = x0 if o0 == 0 else (x1 if o1 == 0 else x2)
                    jb = x0 if o0 == 1 else (x1 if o1 == 1 else x2)
                    kb = x0 if o0 == 2 else (x1 if o1 == 2 else x2)
                    i0 = i_lo + ib * bi
                    i1 = min(i0 + bi, i_hi)
                    j0 = jb * bj
                    j1 = min(j0 + bj, n)
                    k0 = kb * bk
                    k1 = min(k0 + bk, kd)
                    if o0 == 0:
                        if o1 == 1:
                            _g_ijk(A, B, out, i0, i1, j0, j1, k0, k1, unroll)
                        else:
                            _g_ikj(A, B, out, i0, i1, j0, j1, k0, k1, unroll)
                    elif o0 == 1:
                        if o1 == 0:
                            _g_jik(A, B, out, i0, i1, j0, j1, k0, k1, unroll)
                        else:
                            _g_jki(A, B, out, i0, i1, j0, j1, k0, k1, unroll)
                    else:
                        if o1 == 0:
                            _g_kij(A, B, out, i0, i1, j0, j1, k0, k1, unroll)
                        else:
                            _g_kji(A, B, out, i0, i1, j0, j1, k0, k1, unroll)
    return out[0, 0]


@njit(cache=True, parallel=True)
def _stencil_run(A, out, w0, w1, w2, w3, w4, tr, tc, threads, unroll):
    r, c = A.shape
    for j in range(c):
        out[0, j] = A[0, j]
        out[r - 1, j] = A[r - 1, j]
    for i in range(r):
        out[i, 0] = A[i, 0]
        out[i, c - 1] = A[i, c - 1]
    interior = r - 2
    if interior <= 0 or c <= 2:
        return out[0, 0]
    chunk = (interior + threads - 1) // threads
    for t in prange(threads):
        lo = 1 + t * chunk
        hi = min(lo + chunk, r - 1)
        if lo >= hi:
            continue
        br = tr if tr > 0 else (hi - lo)
        bc = tc if tc > 0 else (c - 2)
        nbr = (hi - lo + br - 1) // br
        nbc = (c - 2 + bc - 1) // bc
        for bri in range(nbr):
            for bci in range(nbc):
                i0 = lo + bri * br
                i1 = min(i0 + br, hi)
                j0 = 1 + bci * bc
                j1 = min(j0 + bc, c - 1)
                if unroll:
                    for i in range(i0, i1):
                        j = j0
                        while j + 4 <= j1:
                            out[i, j] = (
                                w0 * A[i, j] + w1 * A[i - 1, j] + w2 * A[i + 1, j]
                                + w3 * A[i, j - 1] + w4 * A[i, j + 1]
                            )
                            out[i, j + 1] = (
                                w0 * A[i, j + 1] + w1 * A[i - 1, j + 1] + w2 * A[i + 1, j + 1]
                                + w3 * A[i, j] + w4 * A[i, j + 2]
                            )
                            out[i, j + 2] = (
                                w0 * A[i, j + 2] + w1 * A[i - 1, j + 2] + w2 * A[i + 1, j + 2]
                                + w3 * A[i, j + 1] + w4 * A[i, j + 3]
                            )
                            out[i, j + 3] = (
                                w0 * A[i, j + 3] + w1 * A[i - 1, j + 3] + w2 * A[i + 1, j + 3]
                                + w3 * A[i, j + 2] + w4 * A[i, j + 4]
                            )
                            j += 4
                        while j < j1:
                            out[i, j] = (
                                w0 * A[i, j] + w1 * A[i - 1, j] + w2 * A[i + 1, j]
                                + w3 * A[i, j - 1] + w4 * A[i, j + 1]
                            )
                            j += 1
                else:
                    for i in range(i0, i1):
                        for j in range(j0, j1):
                            out[i, j] = (
                                w0 * A[i, j] + w1 * A[i - 1, j] + w2 * A[i + 1, j]
                                + w3 * A[i, j - 1] + w4 * A[i, j + 1]
                            )
    return out[0, 0]


@njit(cache=True, parallel=True)
def _asum_run(x, chunksz, threads, unroll, tp):
    n = x.shape[0]
    cs = chunksz if chunksz > 0 else n
    nitems = (n + cs - 1) // cs
    per = (nitems + threads - 1) // threads
    for t in prange(threads):
        s = 0.0
        for it in range(t * per, min((t + 1) * per, nitems)):
            lo = it * cs
            hi = min(lo + cs, n)
            if unroll:
                a0 = 0.0
                a1 = 0.0
                a2 = 0.0
                a3 = 0.0
                i = lo
                while i + 4 <= hi:
                    a0 += abs(x[i])
                    a1 += abs(x[i + 1])
                    a2 += abs(x[i + 2])
                    a3 += abs(x[i + 3])
                    i += 4
                part = a0 + a1 + a2 + a3
                while i < hi:
                    part += abs(x[i])
                    i += 1
            else:
                part = 0.0
                for i in range(lo, hi):
                    part += abs(x[i])
            s += part
        tp[t] = s
    total = 0.0
    for t in range(threads):
        total += tp[t]
    return total


@njit(cache=True, parallel=True)
def _scal_run(x, out, alpha, chunksz, threads, unroll):
    n = x.shape[0]
    cs = chunksz if chunksz > 0 else n
    nitems = (n + cs - 1) // cs
    per = (nitems + threads - 1) // threads
    for t in prange(threads):
        for it in range(t * per, min((t + 1) * per, nitems)):
            lo = it * cs
            hi = min(lo + cs, n)
            if unroll:
                i = lo
                while i + 4 <= hi:
                    out[i] = alpha * x[i]
                    out[i + 1] = alpha * x[i + 1]
                    out[i + 2] = alpha * x[i + 2]
                    out[i + 3] = alpha * x[i + 3]
                    i += 4
                while i < hi:
                    out[i] = alpha * x[i]
                    i += 1
            else:
                for i in range(lo, hi):
                    out[i] = alpha * x[i]
    return out[0]


@njit(cache=True)
def _seg_dot(indices, values, x, lo, hi, unroll):
    if unroll:
        a0 = 0.0
        a1 = 0.0
        a2 = 0.0
        a3 = 0.0
        e = lo
        while e + 4 <= hi:
            a0 += values[e] * x[indices[e]]
            a1 += values[e + 1] * x[indices[e + 1]]
            a2 += values[e + 2] * x[indices[e + 2]]
            a3 += values[e + 3] * x[indices[e + 3]]
            e += 4
        acc = a0 + a1 + a2 + a3
        while e < hi:
            acc += values[e] * x[indices[e]]
            e += 1
        return acc
    acc = 0.0
    for e in range(lo, hi):
        acc += values[e] * x[indices[e]]
    return acc


@njit(cache=True, parallel=True)
def _spmv_run(offsets, indices, values, x, out, item_lo, item_hi, titems, toff, split_first, unroll):
    T = toff.shape[0] - 1
    for t in prange(T):
        for ii in range(toff[t], toff[t + 1]):
            item = titems[ii]
            for r in range(item_lo[item], item_hi[item]):
                lo = offsets[r]
                hi = offsets[r + 1]
                mid = lo + (hi - lo) // 2
                if split_first == 0:
                    acc = _seg_dot(indices, values, x, lo, mid, unroll)
                    acc += _seg_dot(indices, values, x, mid, hi, unroll)
                else:
                    acc = _seg_dot(indices, values, x, mid, hi, unroll)
                    acc += _seg_dot(indices, values, x, lo, mid, unroll)
                out[r] = acc
    return out[0]


@njit(cache=True)
def _spmm_row(offsets, indices, values, B, out, r, j0, j1, unroll):
    for e in range(offsets[r], offsets[r + 1]):
        v = values[e]
        c = indices[e]
        if unroll:
            j = j0
            while j + 4 <= j1:
                out[r, j] += v * B[c, j]
                out[r, j + 1] += v * B[c, j + 1]
                out[r, j + 2] += v * B[c, j + 2]
                out[r, j + 3] += v * B[c, j + 3]
                j += 4
            while j < j1:
                out[r, j] += v * B[c, j]
                j += 1
        else:
            for j in range(j0, j1):
                out[r, j] += v * B[c, j]


@njit(cache=True, parallel=True)
def _spmm_run(offsets, indices, values, B, out, item_lo, item_hi, titems, toff, col_tile, col_outer, unroll):
    n = B.shape[1]
    out[:, :] = 0.0
    ct = col_tile if col_tile > 0 else n
    ntiles = (n + ct - 1) // ct
    T = toff.shape[0] - 1
    for t in prange(T):
        if col_outer:
            for tile in range(ntiles):
                j0 = tile * ct
                j1 = min(j0 + ct, n)
                for ii in range(toff[t], toff[t + 1]):
                    item = titems[ii]
                    for r in range(item_lo[item], item_hi[item]):
                        _spmm_row(offsets, indices, values, B, out, r, j0, j1, unroll)
        else:
            for ii in range(toff[t], toff[t + 1]):
                item = titems[ii]
                for r in range(item_lo[item], item_hi[item]):
                    for tile in range(ntiles):
                        j0 = tile * ct
                        j1 = min(j0 + ct, n)
                        _spmm_row(offsets, indices, values, B, out, r, j0, j1, unroll)
    return out[0, 0]


@njit(cache=True)
def _dot_seg(C, D, r, c, t0, t1, unroll):
    if unroll:
        a0 = 0.0
        a1 = 0.0
        a2 = 0.0
        a3 = 0.0
        t = t0
        while t + 4 <= t1:
            a0 += C[r, t] * D[c, t]
            a1 += C[r, t + 1] * D[c, t + 1]
            a2 += C[r, t + 2] * D[c, t + 2]
            a3 += C[r, t + 3] * D[c, t + 3]
            t += 4
        acc = a0 + a1 + a2 + a3
        while t < t1:
            acc += C[r, t] * D[c, t]
            t += 1
        return acc
    acc = 0.0
    for t in range(t0, t1):
        acc += C[r, t] * D[c, t]
    return acc


@njit(cache=True, parallel=True)
def _sddmm_run(offsets, indices, values, C, D, out, item_lo, item_hi, titems, toff, k_tile, unroll):
    k = C.shape[1]
    kt = k_tile if k_tile > 0 else k
    T = toff.shape[0] - 1
    for t in prange(T):
        for ii in range(toff[t], toff[t + 1]):
            item = titems[ii]
            for r in range(item_lo[item], item_hi[item]):
                for e in range(offsets[r], offsets[r + 1]):
                    c = indices[e]
                    acc = 0.0
                    t0 = 0
                    while t0 < k:
                        t1 = min(t0 + kt, k)
                        acc += _dot_seg(C, D, r, c, t0, t1, unroll)
                        t0 = t1
                    out[e] = values[e] * acc
    return out[0]


@njit(cache=True)
def _assign_point_unrolled(points, i, centroids):
    # Pairwise scan with an explicit tie-break so the winner is always the
    # lowest index among minima, exactly as the sequential scan picks it.
    k, d = centroids.shape
    best = 0
    best_dist = 0.0
    for t in range(d):
        diff = points[i, t] - centroids[0, t]
        best_dist += diff * diff
    c = 1
    while c + 1 < k:
        d1 = 0.0
        for t in range(d):
            diff = points[i, t] - centroids[c, t]
            d1 += diff * diff
        d2 = 0.0
        for t in range(d):
            diff = points[i, t] - centroids[c + 1, t]
            d2 += diff * diff
        if d2 < d1:
            cand = c + 1
            cd = d2
        else:
            cand = c
            cd = d1
        if cd < best_dist:
            best = cand
            best_dist = cd
        c += 2
    if c < k:
        dl = 0.0
        for t in range(d):
            diff = points[i, t] - centroids[c, t]
            dl += diff * diff
        if dl < best_dist:
            best = c
            best_dist = dl
    return best, best_dist


@njit(cache=True, parallel=True)
def _kmeans_assign(points, centroids, assign, item_lo, item_hi, titems, toff, unroll):
    T = toff.shape[0] - 1
    for t in prange(T):
        for ii in range(toff[t], toff[t + 1]):
            item = titems[ii]
            for i in range(item_lo[item], item_hi[item]):
                if unroll:
                    c, _ = _assign_point_unrolled(points, i, centroids)
                else:
                    c, _ = assign_point(points, i, centroids)
                assign[i] = c


@njit(cache=True)
def _kmeans_apply_update(centroids, sums, counts):
    k, d = centroids.shape
    movement = 0.0
    for c in range(k):
        if counts[c] > 0:
            move = 0.0
            for t in range(d):
                new = sums[c, t] / counts[c]
                diff = new - centroids[c, t]
                move += diff * diff
                centroids[c, t] = new
            move = np.sqrt(move)
            if move > movement:
                movement = move
    return movement


# Work-item scheduling: deterministic assignment of chunk items to threads.


def _row_items(total: int, chunk: int) -> tuple[np.ndarray, np.ndarray]:
    cs = chunk if chunk > 0 else total
    nitems = max(1, -(-total // cs))
    lo = np.arange(nitems, dtype=np.int64) * cs
    hi = np.minimum(lo + cs, total)
    return lo, hi


def _schedule_items(nitems: int, threads: int, schedule: str) -> tuple[np.ndarray, np.ndarray]:
    """Flat item list plus per-thread offsets into it."""
    per_thread: list[list[int]] = [[] for _ in range(threads)]
    if schedule == "static":
        per = -(-nitems // threads)
        for t in range(threads):
            per_thread[t] = list(range(t * per, min((t + 1) * per, nitems)))
    elif schedule == "dynamic":
        for i in range(nitems):
            per_thread[i % threads].append(i)
    elif schedule == "guided":
        t = 0
        i = 0
        remaining = nitems
        while remaining > 0:
            take = max(1, remaining // (2 * threads))
            per_thread[t].extend(range(i, i + take))
            i += take
            remaining -= take
            t = (t + 1) % threads
    else:
        raise MalformedProblemError(f"unknown schedule {schedule!r}")
    flat: list[int] = []
    offsets = [0]
    for t in range(threads):
        flat.extend(per_thread[t])
        offsets.append(len(flat))
    return np.asarray(flat, dtype=np.int64), np.asarray(offsets, dtype=np.int64)


# Cache clearing: a sequential write sweep over a buffer sized 4x the
# study's declared last-level cache, run before each repeat.

_SWEEP_BUFS: dict[int, np.ndarray] = {}
SWEEP_FACTOR = 4


@njit(cache=True)
def _sweep(buf):
    for i in range(buf.shape[0]):
        buf[i] = buf[i] * 0.5 + 1.0
    return buf[0]


def clear_cache(llc_bytes: int) -> None:
    n = max(1, SWEEP_FACTOR * llc_bytes // 8)
    buf = _SWEEP_BUFS.get(n)
    if buf is None:
        buf = np.zeros(n)
        _SWEEP_BUFS[n] = buf
    _sweep(buf)


# Hidden feasibility rules.


def scratch_bytes(kernel: str, config: Mapping) -> int:
    """Workspace a blocked implementation of this config would reserve.

    The rule is the product of the kernel's blocking extents times 8 bytes;
    an extent of 0 (whole dimension, nothing blocked) zeroes the product, so
    unblocked configurations never need scratch.
    """
    if kernel == "gemm":
        return 8 * int(config["tile_i"]) * int(config["tile_j"]) * int(config["tile_k"])
    if kernel == "stencil":
        return 8 * int(config["row_tile"]) * int(config["col_tile"])
    if kernel == "spmm":
        return 8 * int(config["row_chunk"]) * int(config["col_tile"])
    if kernel == "sddmm":
        return 8 * int(config["k_tile"])
    return 0


DEFAULT_CONFIGS: dict[str, dict] = {
    "gemm": {"tile_i": 0, "tile_j": 0, "tile_k": 0, "loop_order": (0, 1, 2),
             "threads": 1, "unroll": "false"},
    "stencil": {"row_tile": 0, "col_tile": 0, "threads": 1, "unroll": "false"},
    "asum": {"chunk": 0, "threads": 1, "unroll": "false"},
    "scal": {"chunk": 0, "threads": 1, "unroll": "false"},
    "spmv": {"row_chunk": 0, "schedule": "static", "threads": 1,
             "split": (0, 1), "unroll": "false"},
    "spmm": {"row_chunk": 0, "col_tile": 0, "order": (0, 1), "schedule": "static",
             "threads": 1, "unroll": "false"},
    "sddmm": {"row_chunk": 0, "k_tile": 0, "schedule": "static", "threads": 1,
              "unroll": "false"},
    "kmeans": {"point_block": 0, "schedule": "static", "threads": 1, "unroll": "false"},
}


def list_default_config(kernel: str) -> dict:
    """The untuned baseline: nothing blocked, natural loop order, one
    thread, no unroll."""
    if kernel not in DEFAULT_CONFIGS:
        raise MalformedProblemError(f"unknown kernel {kernel!r}")
    return dict(DEFAULT_CONFIGS[kernel])


def declared_core_limit(problem_spec) -> int:
    cores = int(os.environ.get("TUNEBENCH_CORES", problem_spec.declared_cores))
    return cores * problem_spec.oversub_factor


def hidden_infeasibility(study, config: Mapping) -> str | None:
    """The reason this config fails at run time, or None if it runs."""
    spec = study.problem
    threads = config.get("threads")
    if threads is not None:
        limit = declared_core_limit(spec)
        if int(threads) > limit:
            return f"thread oversubscription: {threads} threads on a {limit}-thread budget"
    need = scratch_bytes(spec.kernel, config)
    if need > spec.scratch_budget_bytes:
        return f"scratch overflow: {need} bytes needed, budget {spec.scratch_budget_bytes}"
    return None


# Runner construction: one closure per (problem, config), called per
# iteration inside the timing loop.


def _build_runner(problem: KernelProblem, cfg: Mapping) -> tuple[Callable[[], None], Callable[[], object]]:
    a = problem.arrays
    kind = problem.kernel
    try:
        if kind == "gemm":
            A, B = a["A"], a["B"]
            out = np.empty((problem.sizes["m"], problem.sizes["n"]))
            ti, tj, tk = int(cfg["tile_i"]), int(cfg["tile_j"]), int(cfg["tile_k"])
            o0, o1, o2 = (int(v) for v in cfg["loop_order"])
            threads = int(cfg["threads"])
            unroll = cfg["unroll"] == "true"

            def run():
                _gemm_run(A, B, out, ti, tj, tk, o0, o1, o2, threads, unroll)

            return run, lambda: out

        if kind == "stencil":
            A = a["A"]
            out = np.empty_like(A)
            tr, tc = int(cfg["row_tile"]), int(cfg["col_tile"])
            threads = int(cfg["threads"])
            unroll = cfg["unroll"] == "true"
            w0, w1, w2, w3, w4 = STENCIL_WEIGHTS

            def run():
                _stencil_run(A, out, w0, w1, w2, w3, w4, tr, tc, threads, unroll)

            return run, lambda: out

        if kind == "asum":
            x = a["x"]
            chunk = int(cfg["chunk"])
            threads = int(cfg["threads"])
            unroll = cfg["unroll"] == "true"
            tp = np.zeros(threads)
            box = [0.0]

            def run():
                box[0] = _asum_run(x, chunk, threads, unroll, tp)

            return run, lambda: box[0]

        if kind == "scal":
            x = a["x"]
            out = np.empty_like(x)
            chunk = int(cfg["chunk"])
            threads = int(cfg["threads"])
            unroll = cfg["unroll"] == "true"
            alpha = problem.alpha

            def run():
                _scal_run(x, out, alpha, chunk, threads, unroll)

            return run, lambda: out

        if kind == "spmv":
            offsets, indices, values, x = a["offsets"], a["indices"], a["values"], a["x"]
            rows = problem.sizes["rows"]
            out = np.empty(rows)
            item_lo, item_hi = _row_items(rows, int(cfg["row_chunk"]))
            titems, toff = _schedule_items(item_lo.shape[0], int(cfg["threads"]), cfg["schedule"])
            split_first = int(tuple(cfg["split"])[0])
            unroll = cfg["unroll"] == "true"

            def run():
                _spmv_run(offsets, indices, values, x, out, item_lo, item_hi, titems, toff, split_first, unroll)

            return run, lambda: out

        if kind == "spmm":
            offsets, indices, values, B = a["offsets"], a["indices"], a["values"], a["B"]
            rows, n = problem.sizes["rows"], problem.sizes["n"]
            out = np.empty((rows, n))
            item_lo, item_hi = _row_items(rows, int(cfg["row_chunk"]))
            titems, toff = _schedule_items(item_lo.shape[0], int(cfg["threads"]), cfg["schedule"])
            col_tile = int(cfg["col_tile"])
            col_outer = tuple(cfg["order"])[0] == 1
            unroll = cfg["unroll"] == "true"

            def run():
                _spmm_run(offsets, indices, values, B, out, item_lo, item_hi, titems, toff, col_tile, col_outer, unroll)

            return run, lambda: out

        if kind == "sddmm":
            offsets, indices, values, C, D = (
                a["offsets"], a["indices"], a["values"], a["C"], a["D"],
            )
            rows = problem.sizes["rows"]
            out = np.empty_like(values)
            item_lo, item_hi = _row_items(rows, int(cfg["row_chunk"]))
            titems, toff = _schedule_items(item_lo.shape[0], int(cfg["threads"]), cfg["schedule"])
            k_tile = int(cfg["k_tile"])
            unroll = cfg["unroll"] == "true"

            def run():
                _sddmm_run(offsets, indices, values, C, D, out, item_lo, item_hi, titems, toff, k_tile, unroll)

            return run, lambda: out

        if kind == "kmeans":
            points = a["points"]
            k = problem.sizes["clusters"]
            p = problem.sizes["points"]
            item_lo, item_hi = _row_items(p, int(cfg["point_block"]))
            titems, toff = _schedule_items(item_lo.shape[0], int(cfg["threads"]), cfg["schedule"])
            unroll = cfg["unroll"] == "true"
            assign = np.zeros(p, dtype=np.int64)
            box: list = [0.0, 0]

            def run():
                centroids = points[:k].copy()
                iters = 0
                for _ in range(KMEANS_MAX_ITERS):
                    iters += 1
                    _kmeans_assign(points, centroids, assign, item_lo, item_hi, titems, toff, unroll)
                    sums, counts = kmeans_update(points, assign, k)
                    movement = _kmeans_apply_update(centroids, sums, counts)
                    if movement < KMEANS_TOL:
                        break
                box[0] = kmeans_objective(points, centroids)
                box[1] = iters

            return run, lambda: (box[0], box[1])
    except KeyError as exc:
        raise MalformedProblemError(
            f"kernel {kind!r} expects a parameter named {exc.args[0]!r}"
        ) from None
    raise MalformedProblemError(f"unknown kernel {kind!r}")


def relative_error(value, ref) -> float:
    if isinstance(ref, (int, float)):
        return abs(float(value) - float(ref)) / max(abs(float(ref)), 1e-300)
    diff = np.max(np.abs(np.asarray(value) - np.asarray(ref)))
    scale = max(float(np.max(np.abs(ref))), 1e-300)
    return float(diff / scale)


_REF_CACHE: dict[tuple, object] = {}


def reference_for(problem: KernelProblem):
    key = (
        problem.kernel,
        problem.seed,
        tuple(sorted(problem.sizes.items())),
        problem.alpha,
    )
    if key not in _REF_CACHE:
        _REF_CACHE[key] = compute_reference(problem)
    return _REF_CACHE[key]


VERIFY_TOL = 1e-9


def execute(
    study,
    problem: KernelProblem,
    config: Mapping,
    fidelities: FidelitySettings,
    *,
    verify: bool = False,
    evaluation_id: str = "",
) -> QueryResult:
    """Run one evaluation and report objectives.

    Raises InvalidConfigError for domain or known-constraint failures;
    hidden-constraint failures come back as an infeasible QueryResult.
    runtime_seconds is the median over repeats of (repeat wall time /
    iterations); each repeat starts behind a cache-clearing sweep.
    """
    space = study.space
    cfg = space.canonical(config)
    vr = space.validate(cfg)
    if not vr.valid:
        raise InvalidConfigError(
            "known constraint violated: " + "; ".join(vr.violated)
        )
    reason = hidden_infeasibility(study, cfg)
    if reason is not None:
        return QueryResult(
            objectives={},
            feasible=False,
            infeasibility_reason=reason,
            evaluation_id=evaluation_id,
        )

    run, finish = _build_runner(problem, cfg)
    spec = study.problem
    raw: list[float] = []
    for rep in range(fidelities.repeats):
        if rep > 0 and fidelities.wait_between_repeats > 0:
            time.sleep(fidelities.wait_between_repeats / 1000.0)
        clear_cache(spec.llc_bytes)
        t0 = time.perf_counter()
        for _ in range(fidelities.iterations):
            run()
        dt = time.perf_counter() - t0
        raw.append(dt / fidelities.iterations)
    if fidelities.wait_after_evaluation > 0:
        time.sleep(fidelities.wait_after_evaluation / 1000.0)

    runtime = statistics.median(raw)
    value = finish()
    lloyd_iters = None
    if problem.kernel == "kmeans":
        value, lloyd_iters = value
    traffic = traffic_model(
        problem, cfg, cache_bytes=spec.model_cache_bytes, lloyd_iters=lloyd_iters
    )
    if verify:
        err = relative_error(value, reference_for(problem))
        if err > VERIFY_TOL:
            raise KernelVerificationError(
                f"{problem.kernel}: relative error {err:.3e} vs reference"
            )

    available = {"runtime_seconds": runtime, "memory_traffic_bytes": traffic}
    objectives = {name: available[name] for name in study.objective_names}
    return QueryResult(
        objectives=objectives,
        feasible=True,
        infeasibility_reason=None,
        evaluation_id=evaluation_id,
        raw_timings=tuple(raw),
    )
