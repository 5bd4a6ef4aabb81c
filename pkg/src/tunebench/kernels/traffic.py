"""Analytic memory-traffic estimates.

The second objective every study can report. Traffic is a deterministic
function of the problem instance and the configuration; evaluation effort
settings never enter.

gemm uses a hierarchical cache-fit model over its six-level loop nest (three
block loops then three element loops, both in the configured order). Each
operand is charged at the outermost nest depth where its footprint fits in
the modeled cache, times the trip counts of the loops outside that depth.
The output operand additionally pays a read per revisit: stores equal
visits, reads equal visits minus distinct elements. For the untiled i,j,k
order this reduces to 8*(m*n*k + m*k + m*n) bytes, i.e. 8*(n^3 + 2*n^2) in
the square case.

The other kernels use streaming closed forms (8-byte floats, 4-byte CSR
index arrays):

    stencil  16*rows*cols
    asum     8*n
    scal     16*n
    spmv     4*(rows+1) + 12*nnz + 8*nnz + 8*rows
    spmm     4*(rows+1) + 12*nnz + 8*rows*n + 8*cols*n*ceil(rows/row_chunk)
    sddmm    4*(rows+1) + 12*nnz + 8*nnz + 16*k*nnz
    kmeans   iters*(8*p*d + 8*k*d + 8*p) + 8*p*d

kmeans needs the converged Lloyd iteration count, which is itself
config-invariant; callers that already ran the kernel pass it in, otherwise
it comes from the canonical reference run.
"""

from __future__ import annotations

import math
from typing import Mapping

from .problems import KernelProblem, MalformedProblemError, kmeans_reference_iters

__all__ = ["traffic_model", "gemm_traffic"]


def gemm_traffic(
    m: int,
    n: int,
    k: int,
    tile_i: int,
    tile_j: int,
    tile_k: int,
    order: tuple[int, int, int],
    cache_bytes: int,
) -> float:
    ext = {0: m, 1: n, 2: k}
    blk = {
        0: tile_i if tile_i > 0 else m,
        1: tile_j if tile_j > 0 else n,
        2: tile_k if tile_k > 0 else k,
    }
    nblocks = {a: -(-ext[a] // blk[a]) for a in (0, 1, 2)}
    # outer to inner: block loops then element loops, both in `order`
    levels = [(a, nblocks[a]) for a in order] + [(a, blk[a]) for a in order]

    def operand_bytes(axes: tuple[int, ...], output: bool) -> float:
        for cut in range(len(levels) + 1):
            foot = 8.0
            for ax in axes:
                inside = 1
                for lvl_ax, trip in levels[cut:]:
                    if lvl_ax == ax:
                        inside *= trip
                foot *= min(inside, ext[ax])
            if foot <= cache_bytes:
                break
        visits = foot
        unique = foot
        for lvl_ax, trip in levels[:cut]:
            visits *= trip
            if not (output and lvl_ax == 2):
                unique *= trip
        if not output:
            return visits
        # stores once per visit, reads only on revisits
        return visits + (visits - unique)

    total = operand_bytes((0, 2), output=False)  # A
    total += operand_bytes((2, 1), output=False)  # B
    total += operand_bytes((0, 1), output=True)  # C
    return total


def traffic_model(
    problem: KernelProblem,
    config: Mapping,
    *,
    cache_bytes: int,
    lloyd_iters: int | None = None,
) -> float:
    kind = problem.kernel
    s = problem.sizes
    if kind == "gemm":
        return gemm_traffic(
            s["m"],
            s["n"],
            s["k"],
            int(config["tile_i"]),
            int(config["tile_j"]),
            int(config["tile_k"]),
            tuple(config["loop_order"]),
            cache_bytes,
        )
    if kind == "stencil":
        return 16.0 * s["rows"] * s["cols"]
    if kind == "asum":
        return 8.0 * s["n"]
    if kind == "scal":
        return 16.0 * s["n"]
    nnz = problem.nnz if kind in ("spmv", "spmm", "sddmm") else 0
    if kind == "spmv":
        return 4.0 * (s["rows"] + 1) + 12.0 * nnz + 8.0 * nnz + 8.0 * s["rows"]
    if kind == "spmm":
        chunk = int(config["row_chunk"])
        blocks = math.ceil(s["rows"] / chunk) if chunk > 0 else 1
        return (
            4.0 * (s["rows"] + 1)
            + 12.0 * nnz
            + 8.0 * s["rows"] * s["n"]
            + 8.0 * s["cols"] * s["n"] * blocks
        )
    if kind == "sddmm":
        return 4.0 * (s["rows"] + 1) + 12.0 * nnz + 8.0 * nnz + 16.0 * s["k"] * nnz
    if kind == "kmeans":
        iters = lloyd_iters if lloyd_iters is not None else kmeans_reference_iters(problem)
        p, d, k = s["points"], s["dims"], s["clusters"]
        return iters * (8.0 * p * d + 8.0 * k * d + 8.0 * p) + 8.0 * p * d
    raise MalformedProblemError(f"no traffic model for kernel {kind!r}")
