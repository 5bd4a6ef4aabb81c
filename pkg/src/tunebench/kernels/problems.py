"""Problem instances for the native kernels: deterministic generation and
naive reference results.

The eight native kernels:

    gemm     C[i,j] = sum_k A[i,k] * B[k,j]
    stencil  five-point weighted stencil on a 2D grid, boundary passes through
    asum     sum_i |x[i]|
    scal     y[i] = alpha * x[i]
    spmv     y = S x, S in CSR form
    spmm     C = S B, S sparse, B dense
    sddmm    out[e] = values[e] * dot(C[row_e], D[col_e]) for each stored entry
    kmeans   Lloyd's iteration to convergence; the result is the final
             within-cluster sum of squared distances

All operands are generated from a seeded generator with entries uniform in
[-1, 1). Sparse matrices are CSR with a fixed per-row population count
derived from the declared density, int32 index arrays, strictly increasing
column indices per row.

kmeans convergence: at most 100 Lloyd iterations, stopping once no centroid
moved by 1e-9 or more (Euclidean). Assignment ties go to the lowest cluster
index. Empty clusters keep their previous centroid.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

import numpy as np
from numba import njit

__all__ = [
    "KERNELS",
    "KernelProblem",
    "MalformedProblemError",
    "generate_problem",
    "compute_reference",
    "problem_for_study",
    "STENCIL_WEIGHTS",
    "KMEANS_TOL",
    "KMEANS_MAX_ITERS",
]

KERNELS = ("gemm", "stencil", "asum", "scal", "spmv", "spmm", "sddmm", "kmeans")

STENCIL_WEIGHTS = (0.5, 0.125, 0.125, 0.125, 0.125)
KMEANS_TOL = 1e-9
KMEANS_MAX_ITERS = 100

_SIZE_KEYS = {
    "gemm": ("m", "n", "k"),
    "stencil": ("rows", "cols"),
    "asum": ("n",),
    "scal": ("n",),
    "spmv": ("rows", "cols"),
    "spmm": ("rows", "cols", "n"),
    "sddmm": ("rows", "cols", "k"),
    "kmeans": ("points", "dims", "clusters"),
}


class MalformedProblemError(ValueError):
    """Operand shapes or CSR structure are inconsistent."""


@dataclass(frozen=True)
class KernelProblem:
    kernel: str
    sizes: dict[str, int]
    seed: int
    arrays: dict[str, np.ndarray] = field(repr=False)
    alpha: float = 1.0

    def __post_init__(self):
        validate_problem(self)

    def size(self, key: str) -> int:
        return self.sizes[key]

    @property
    def nnz(self) -> int:
        return int(self.arrays["offsets"][-1])


def validate_problem(p: KernelProblem) -> None:
    if p.kernel not in KERNELS:
        raise MalformedProblemError(f"unknown kernel {p.kernel!r}")
    missing = [k for k in _SIZE_KEYS[p.kernel] if k not in p.sizes]
    if missing:
        raise MalformedProblemError(f"{p.kernel}: missing sizes {missing}")
    a = p.arrays
    if p.kernel == "gemm":
        if a["A"].shape != (p.sizes["m"], p.sizes["k"]) or a["B"].shape != (
            p.sizes["k"],
            p.sizes["n"],
        ):
            raise MalformedProblemError("gemm operand shapes do not match sizes")
    elif p.kernel == "stencil":
        if a["A"].shape != (p.sizes["rows"], p.sizes["cols"]):
            raise MalformedProblemError("stencil grid shape does not match sizes")
    elif p.kernel in ("asum", "scal"):
        if a["x"].shape != (p.sizes["n"],):
            raise MalformedProblemError(f"{p.kernel} vector length does not match sizes")
    elif p.kernel in ("spmv", "spmm", "sddmm"):
        _check_csr(a, p.sizes["rows"], p.sizes["cols"])
        if p.kernel == "spmm" and a["B"].shape != (p.sizes["cols"], p.sizes["n"]):
            raise MalformedProblemError("spmm dense operand shape mismatch")
        if p.kernel == "sddmm":
            if a["C"].shape != (p.sizes["rows"], p.sizes["k"]) or a["D"].shape != (
                p.sizes["cols"],
                p.sizes["k"],
            ):
                raise MalformedProblemError("sddmm factor shapes mismatch")
        if p.kernel == "spmv" and a["x"].shape != (p.sizes["cols"],):
            raise MalformedProblemError("spmv vector length mismatch")
    elif p.kernel == "kmeans":
        if a["points"].shape != (p.sizes["points"], p.sizes["dims"]):
            raise MalformedProblemError("kmeans point array shape mismatch")
        if not (1 <= p.sizes["clusters"] <= p.sizes["points"]):
            raise MalformedProblemError("kmeans needs 1 <= clusters <= points")


def _check_csr(a: dict[str, np.ndarray], rows: int, cols: int) -> None:
    offsets, indices, values = a["offsets"], a["indices"], a["values"]
    if offsets.shape != (rows + 1,) or offsets[0] != 0:
        raise MalformedProblemError("CSR offsets must have rows+1 entries starting at 0")
    if np.any(np.diff(offsets) < 0):
        raise MalformedProblemError("CSR offsets must be non-decreasing")
    nnz = int(offsets[-1])
    if indices.shape != (nnz,) or values.shape != (nnz,):
        raise MalformedProblemError("CSR indices/values length must equal nnz")
    if nnz and (indices.min() < 0 or indices.max() >= cols):
        raise MalformedProblemError("CSR column index out of range")
    for r in range(rows):
        seg = indices[offsets[r] : offsets[r + 1]]
        if seg.size > 1 and np.any(np.diff(seg) <= 0):
            raise MalformedProblemError(f"CSR row {r} indices not strictly increasing")


def generate_problem(
    kernel: str,
    sizes: dict[str, int],
    seed: int,
    *,
    density: float | None = None,
    alpha: float = 1.5,
) -> KernelProblem:
    if kernel not in KERNELS:
        raise MalformedProblemError(f"unknown kernel {kernel!r}")
    rng = np.random.default_rng(seed)

    def uni(*shape):
        return rng.uniform(-1.0, 1.0, size=shape)

    arrays: dict[str, np.ndarray] = {}
    if kernel == "gemm":
        arrays["A"] = uni(sizes["m"], sizes["k"])
        arrays["B"] = uni(sizes["k"], sizes["n"])
    elif kernel == "stencil":
        arrays["A"] = uni(sizes["rows"], sizes["cols"])
    elif kernel in ("asum", "scal"):
        arrays["x"] = uni(sizes["n"])
    elif kernel in ("spmv", "spmm", "sddmm"):
        if density is None:
            raise MalformedProblemError(f"{kernel} needs a density")
        rows, cols = sizes["rows"], sizes["cols"]
        per_row = max(1, round(density * cols))
        offsets = np.arange(rows + 1, dtype=np.int32) * per_row
        indices = np.empty(rows * per_row, dtype=np.int32)
        for r in range(rows):
            picked = rng.choice(cols, size=per_row, replace=False)
            picked.sort()
            indices[r * per_row : (r + 1) * per_row] = picked
        arrays["offsets"] = offsets
        arrays["indices"] = indices
        arrays["values"] = uni(rows * per_row)
        if kernel == "spmv":
            arrays["x"] = uni(cols)
        elif kernel == "spmm":
            arrays["B"] = uni(cols, sizes["n"])
        else:
            arrays["C"] = uni(rows, sizes["k"])
            arrays["D"] = uni(cols, sizes["k"])
    elif kernel == "kmeans":
        arrays["points"] = uni(sizes["points"], sizes["dims"])
    return KernelProblem(kernel=kernel, sizes=dict(sizes), seed=seed, arrays=arrays, alpha=alpha)


def problem_for_study(study, preset: str | None = None) -> KernelProblem:
    """Build the problem a study's problem block describes."""
    spec = study.problem
    if spec is None:
        raise MalformedProblemError(f"study {study.study_id!r} has no problem block")
    name = preset or spec.default_preset
    if name not in spec.presets:
        raise MalformedProblemError(
            f"study {study.study_id!r} has no preset {name!r}; "
            f"available: {sorted(spec.presets)}"
        )
    return generate_problem(
        spec.kernel, spec.presets[name], spec.seed, density=spec.density
    )


# Naive references. Plain loop nests, no blocking, no reordering; these are
# the ground truth the tuned variants are checked against.


@njit(cache=True)
def _ref_gemm(A, B):
    m, k = A.shape
    n = B.shape[1]
    out = np.zeros((m, n))
    for i in range(m):
        for j in range(n):
            acc = 0.0
            for kk in range(k):
                acc += A[i, kk] * B[kk, j]
            out[i, j] = acc
    return out


@njit(cache=True)
def _ref_stencil(A, w0, w1, w2, w3, w4):
    r, c = A.shape
    out = A.copy()
    for i in range(1, r - 1):
        for j in range(1, c - 1):
            out[i, j] = (
                w0 * A[i, j]
                + w1 * A[i - 1, j]
                + w2 * A[i + 1, j]
                + w3 * A[i, j - 1]
                + w4 * A[i, j + 1]
            )
    return out


@njit(cache=True)
def _ref_asum(x):
    acc = 0.0
    for i in range(x.shape[0]):
        acc += abs(x[i])
    return acc


@njit(cache=True)
def _ref_scal(x, alpha):
    out = np.empty_like(x)
    for i in range(x.shape[0]):
        out[i] = alpha * x[i]
    return out


@njit(cache=True)
def _ref_spmv(offsets, indices, values, x):
    rows = offsets.shape[0] - 1
    out = np.zeros(rows)
    for r in range(rows):
        acc = 0.0
        for e in range(offsets[r], offsets[r + 1]):
            acc += values[e] * x[indices[e]]
        out[r] = acc
    return out


@njit(cache=True)
def _ref_spmm(offsets, indices, values, B):
    rows = offsets.shape[0] - 1
    n = B.shape[1]
    out = np.zeros((rows, n))
    for r in range(rows):
        for e in range(offsets[r], offsets[r + 1]):
            v = values[e]
            c = indices[e]
            for j in range(n):
                out[r, j] += v * B[c, j]
    return out


@njit(cache=True)
def _ref_sddmm(offsets, indices, values, C, D):
    rows = offsets.shape[0] - 1
    k = C.shape[1]
    out = np.empty_like(values)
    for r in range(rows):
        for e in range(offsets[r], offsets[r + 1]):
            c = indices[e]
            acc = 0.0
            for t in range(k):
                acc += C[r, t] * D[c, t]
            out[e] = values[e] * acc
    return out


@njit(cache=True)
def assign_point(points, i, centroids):
    """Index of the nearest centroid to points[i], ties to the lowest index.

    Shared by the reference and the tuned variants so the arithmetic is
    identical everywhere: the per-centroid distance is a sequential sum over
    dimensions, the scan keeps the first strict improvement.
    """
    k, d = centroids.shape
    best = 0
    best_dist = 0.0
    for t in range(d):
        diff = points[i, t] - centroids[0, t]
        best_dist += diff * diff
    for c in range(1, k):
        dist = 0.0
        for t in range(d):
            diff = points[i, t] - centroids[c, t]
            dist += diff * diff
        if dist < best_dist:
            best = c
            best_dist = dist
    return best, best_dist


@njit(cache=True)
def kmeans_update(points, assign, k):
    """Canonical centroid update: serial over points in index order."""
    p, d = points.shape
    sums = np.zeros((k, d))
    counts = np.zeros(k, dtype=np.int64)
    for i in range(p):
        c = assign[i]
        counts[c] += 1
        for t in range(d):
            sums[c, t] += points[i, t]
    return sums, counts


@njit(cache=True)
def kmeans_objective(points, centroids):
    """Final score: reassign every point, sum squared distances serially."""
    total = 0.0
    for i in range(points.shape[0]):
        _, dist = assign_point(points, i, centroids)
        total += dist
    return total


@njit(cache=True)
def _ref_kmeans(points, k, tol, max_iters):
    p, d = points.shape
    centroids = points[:k].copy()
    assign = np.zeros(p, dtype=np.int64)
    iters = 0
    for _ in range(max_iters):
        iters += 1
        for i in range(p):
            c, _ = assign_point(points, i, centroids)
            assign[i] = c
        sums, counts = kmeans_update(points, assign, k)
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
        if movement < tol:
            break
    return kmeans_objective(points, centroids), iters


def kmeans_reference_iters(problem: KernelProblem) -> int:
    """How many Lloyd iterations the canonical run takes (config-invariant)."""
    _, iters = _ref_kmeans(
        problem.arrays["points"], problem.sizes["clusters"], KMEANS_TOL, KMEANS_MAX_ITERS
    )
    return int(iters)


def compute_reference(problem: KernelProblem):
    """Naive result for the problem: an array for most kernels, a float for
    asum and kmeans."""
    a = problem.arrays
    kind = problem.kernel
    if kind == "gemm":
        return _ref_gemm(a["A"], a["B"])
    if kind == "stencil":
        return _ref_stencil(a["A"], *STENCIL_WEIGHTS)
    if kind == "asum":
        return _ref_asum(a["x"])
    if kind == "scal":
        return _ref_scal(a["x"], problem.alpha)
    if kind == "spmv":
        return _ref_spmv(a["offsets"], a["indices"], a["values"], a["x"])
    if kind == "spmm":
        return _ref_spmm(a["offsets"], a["indices"], a["values"], a["B"])
    if kind == "sddmm":
        return _ref_sddmm(a["offsets"], a["indices"], a["values"], a["C"], a["D"])
    if kind == "kmeans":
        obj, _ = _ref_kmeans(
            a["points"], problem.sizes["clusters"], KMEANS_TOL, KMEANS_MAX_ITERS
        )
        return obj
    raise MalformedProblemError(f"unknown kernel {kind!r}")
