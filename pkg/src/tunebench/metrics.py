"""Analysis of evaluation logs.

Incumbent trajectories, Pareto fronts, exact 2-D hypervolume, speedup
densities, and permutation feature importance. Everything here is a pure
function of its inputs; replaying the same log with the same seeds gives
bit-identical analyses.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .records import EvaluationRecord
from .surrogate import SurrogateModel, feature_matrix

__all__ = [
    "AnalysisError",
    "dominates",
    "pareto_indices",
    "pareto_front",
    "clip_to_reference",
    "hypervolume_2d",
    "hypervolume_trajectory",
    "default_reference",
    "incumbent_trajectory",
    "trajectory_aggregate",
    "SpeedupDistribution",
    "speedup_distribution",
    "permutation_importance",
    "objective_points",
]


class AnalysisError(ValueError):
    """An analysis precondition does not hold."""


def dominates(a: Sequence[float], b: Sequence[float]) -> bool:
    """Minimization: a is nowhere worse and somewhere better."""
    return all(x <= y for x, y in zip(a, b)) and any(x < y for x, y in zip(a, b))


def pareto_indices(points: Sequence[Sequence[float]]) -> list[int]:
    """Indices of the non-dominated points, in input order.

    Duplicate points keep their first occurrence only. Single pass over a
    lexicographic order: a point can only be dominated by one sorting
    before it, so the running front never needs pruning.
    """
    order = sorted(range(len(points)), key=lambda i: (tuple(points[i]), i))
    front: list[int] = []
    seen: set[tuple] = set()
    for i in order:
        p = tuple(points[i])
        if p in seen or any(dominates(points[j], p) for j in front):
            continue
        seen.add(p)
        front.append(i)
    return sorted(front)


def pareto_front(points: Sequence[Sequence[float]]) -> list[tuple]:
    """The non-dominated subset as sorted unique tuples."""
    return sorted(tuple(points[i]) for i in pareto_indices(points))


def clip_to_reference(
    points: Sequence[Sequence[float]], ref: Sequence[float]
) -> tuple[list[tuple], int]:
    """Clip every coordinate to the reference; count the points touched.

    A clipped coordinate contributes zero extent to any hypervolume box, so
    clipping never inflates the value.
    """
    clipped = 0
    out = []
    for p in points:
        if len(p) != len(ref):
            raise AnalysisError(f"point {p!r} does not match reference arity {len(ref)}")
        q = tuple(min(x, r) for x, r in zip(p, ref))
        if q != tuple(p):
            clipped += 1
        out.append(q)
    return out, clipped


def hypervolume_2d(points: Sequence[Sequence[float]], ref: Sequence[float]) -> float:
    """Exact area dominated by `points` and bounded by `ref`, two objectives.

    Sort the Pareto front by the first objective and sweep: each front point
    contributes a rectangle from its first coordinate to the reference, over
    the second-coordinate gap to the previous point.
    """
    if len(ref) != 2:
        raise AnalysisError("hypervolume_2d takes exactly two objectives")
    pts, _ = clip_to_reference(points, ref)
    pts = [p for p in pts if p[0] < ref[0] and p[1] < ref[1]]
    if not pts:
        return 0.0
    front = pareto_front(pts)
    area = 0.0
    prev_y = ref[1]
    for x, y in front:
        area += (ref[0] - x) * (prev_y - y)
        prev_y = y
    return area


def default_reference(points: Sequence[Sequence[float]]) -> tuple[float, ...]:
    """Per-objective maximum over the points, scaled by 1.1."""
    if not points:
        raise AnalysisError("no points to take a reference from")
    m = len(points[0])
    return tuple(1.1 * max(p[d] for p in points) for d in range(m))


def objective_points(
    records: Iterable[EvaluationRecord], names: Sequence[str]
) -> tuple[list[tuple], list[int]]:
    """Objective vectors of the feasible records carrying all `names`.

    Returns (points, indices into the input order).
    """
    points = []
    idx = []
    for i, r in enumerate(records):
        if r.result.feasible and all(n in r.result.objectives for n in names):
            points.append(tuple(r.result.objectives[n] for n in names))
            idx.append(i)
    return points, idx


def _sorted_run(records: Sequence[EvaluationRecord]) -> list[EvaluationRecord]:
    return sorted(records, key=lambda r: r.iteration)


def incumbent_trajectory(
    records: Sequence[EvaluationRecord], objective: str
) -> list[float | None]:
    """Running minimum of one objective over a single (optimizer, seed) run.

    Entries before the first feasible record are None; infeasible records
    carry the previous incumbent forward.
    """
    run = _sorted_run(records)
    best: float | None = None
    out: list[float | None] = []
    for r in run:
        if r.result.feasible and objective in r.result.objectives:
            v = r.result.objectives[objective]
            best = v if best is None else min(best, v)
        out.append(best)
    if best is None:
        raise AnalysisError("no feasible record in the run")
    return out


def hypervolume_trajectory(
    records: Sequence[EvaluationRecord], names: Sequence[str], ref: Sequence[float]
) -> list[float]:
    """Hypervolume of the feasible points seen so far, per iteration."""
    run = _sorted_run(records)
    out = []
    pts: list[tuple] = []
    for r in run:
        if r.result.feasible and all(n in r.result.objectives for n in names):
            pts.append(tuple(r.result.objectives[n] for n in names))
        out.append(hypervolume_2d(pts, ref) if pts else 0.0)
    return out


def trajectory_aggregate(
    trajectories: Sequence[Sequence[float | None]],
) -> tuple[list[float | None], list[float | None], list[float | None]]:
    """Pointwise mean with a 2-standard-error band across seeds.

    Positions where any seed is still at the None sentinel stay None.
    """
    if len(trajectories) < 2:
        raise AnalysisError("aggregation needs at least two seeds")
    length = len(trajectories[0])
    if any(len(t) != length for t in trajectories):
        raise AnalysisError("trajectories must have equal lengths")
    mean: list[float | None] = []
    lo: list[float | None] = []
    hi: list[float | None] = []
    for t in range(length):
        col = [traj[t] for traj in trajectories]
        if any(v is None for v in col):
            mean.append(None)
            lo.append(None)
            hi.append(None)
            continue
        arr = np.asarray(col, dtype=np.float64)
        m = float(arr.mean())
        se = float(arr.std(ddof=1)) / math.sqrt(len(arr))
        mean.append(m)
        lo.append(m - 2.0 * se)
        hi.append(m + 2.0 * se)
    return mean, lo, hi


@dataclass(frozen=True)
class SpeedupDistribution:
    """Histogram of baseline/runtime on a log10 axis.

    densities integrate to 1 over log10(speedup); fixed-width bins.
    """

    log10_edges: tuple[float, ...]
    densities: tuple[float, ...]
    median: float
    maximum: float
    count: int


def speedup_distribution(
    records: Iterable[EvaluationRecord],
    baseline: float,
    objective: str = "runtime_seconds",
    bins: int = 24,
) -> SpeedupDistribution:
    if baseline <= 0:
        raise AnalysisError(f"baseline must be positive, got {baseline}")
    values = [
        r.result.objectives[objective]
        for r in records
        if r.result.feasible and objective in r.result.objectives
    ]
    if not values:
        raise AnalysisError("no feasible records to take speedups from")
    speedups = np.array([baseline / v for v in values])
    logs = np.log10(speedups)
    lo, hi = float(logs.min()), float(logs.max())
    if lo == hi:
        lo -= 0.025
        hi += 0.025
    dens, edges = np.histogram(logs, bins=bins, range=(lo, hi), density=True)
    return SpeedupDistribution(
        log10_edges=tuple(float(e) for e in edges),
        densities=tuple(float(d) for d in dens),
        median=float(np.median(speedups)),
        maximum=float(speedups.max()),
        count=len(values),
    )


def permutation_importance(
    model: SurrogateModel,
    holdout: Sequence[EvaluationRecord],
    objective: str,
    seed: int,
    rounds: int = 20,
) -> dict[str, float]:
    """Per-parameter increase in holdout RMSE from shuffling that parameter.

    All encoded coordinates of a parameter are shuffled with one shared row
    permutation per round. Scores clip at zero and are normalized to sum 1
    when any signal remains.
    """
    if model.mode != "ensemble":
        raise AnalysisError("permutation importance needs the ensemble surrogate")
    usable = [
        r
        for r in holdout
        if r.result.feasible and objective in r.result.objectives
    ]
    if len(usable) < 20:
        raise AnalysisError(f"need >= 20 holdout records, got {len(usable)}")
    space = model.space
    X = feature_matrix(
        space, [r.configuration for r in usable], [r.fidelities for r in usable]
    )
    y = np.array([r.result.objectives[objective] for r in usable])
    reg = model.regressors[objective]

    def rmse(mat):
        return float(np.sqrt(np.mean((reg.predict_rows(mat) - y) ** 2)))

    base = rmse(X)
    rng = np.random.default_rng(seed)
    raw = {}
    for name, start, stop in space.encoded_blocks:
        delta = 0.0
        for _ in range(rounds):
            perm = rng.permutation(X.shape[0])
            shuffled = X.copy()
            shuffled[:, start:stop] = X[perm, start:stop]
            delta += rmse(shuffled) - base
        raw[name] = max(delta / rounds, 0.0)
    total = sum(raw.values())
    if total > 0.0:
        return {name: v / total for name, v in raw.items()}
    return raw
