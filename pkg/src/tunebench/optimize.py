"""Search drivers over one study: random, evolutionary, model-guided.

Every driver proposes only configurations that pass the known constraints
and treats the budget as the number of issued queries, infeasible outcomes
included. Hidden infeasibility shows up in results (feasible=False) and is
handled by each driver; it is never filtered out of the accounting.

Drivers talk to the benchmark through a single callable
`evaluate(config) -> QueryResult`, so the same code runs against a local
backend, a remote server, or a dispatcher over several servers.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass
from typing import Any, Callable, Mapping, Sequence

import numpy as np

from . import surrogate as _surrogate
from .records import EvaluationRecord, FidelitySettings, QueryResult
from .space import SearchSpace
from .studies import StudyDefinition, resolve_fidelities

__all__ = [
    "Evaluation",
    "EvaluateFn",
    "random_search",
    "non_dominated_sort",
    "crowding_distance",
    "nsga2",
    "expected_improvement",
    "constrained_ei",
    "FeasibilityClassifier",
    "one_step_neighbors",
    "model_based",
    "OPTIMIZERS",
]

EvaluateFn = Callable[[Mapping[str, Any]], QueryResult]


@dataclass(frozen=True)
class Evaluation:
    """One issued query and its outcome."""

    configuration: dict
    result: QueryResult

    def point(self, names: Sequence[str]) -> tuple[float, ...] | None:
        """Objective vector, or None when infeasible or incomplete."""
        if not self.result.feasible:
            return None
        if any(n not in self.result.objectives for n in names):
            return None
        return tuple(self.result.objectives[n] for n in names)


def random_search(
    study: StudyDefinition, evaluate: EvaluateFn, budget: int, seed: int
) -> list[Evaluation]:
    """Uniform valid sampling, one query per draw."""
    configs = study.space.sample_valid(budget, seed)
    return [Evaluation(dict(c), evaluate(c)) for c in configs]


# ---------------------------------------------------------------------------
# dominance machinery


def non_dominated_sort(points: Sequence[Sequence[float]]) -> list[list[int]]:
    """Indices layered into fronts; front 0 is the non-dominated set.

    Bookkeeping variant: count dominators per point, peel counts layer by
    layer. Within a front, indices keep input order.
    """
    n = len(points)
    dominated_by: list[list[int]] = [[] for _ in range(n)]
    counts = [0] * n
    for i in range(n):
        pi = points[i]
        for j in range(i + 1, n):
            pj = points[j]
            i_le_j = all(a <= b for a, b in zip(pi, pj))
            j_le_i = all(b <= a for a, b in zip(pi, pj))
            if i_le_j and not j_le_i:
                dominated_by[i].append(j)
                counts[j] += 1
            elif j_le_i and not i_le_j:
                dominated_by[j].append(i)
                counts[i] += 1
    fronts = []
    current = [i for i in range(n) if counts[i] == 0]
    while current:
        fronts.append(current)
        nxt = []
        for i in current:
            for j in dominated_by[i]:
                counts[j] -= 1
                if counts[j] == 0:
                    nxt.append(j)
        current = sorted(nxt)
    return fronts


def crowding_distance(
    points: Sequence[Sequence[float]], front: Sequence[int]
) -> list[float]:
    """Crowding of each front member, aligned with `front` order.

    Boundary points get infinity; interior points sum the normalized gap
    between their neighbors per objective. Order of `front` does not change
    the values.
    """
    k = len(front)
    if k == 0:
        return []
    if k <= 2:
        return [math.inf] * k
    m = len(points[front[0]])
    out = [0.0] * k
    pos = {idx: at for at, idx in enumerate(front)}
    for d in range(m):
        ordered = sorted(front, key=lambda i: (points[i][d], i))
        lo = points[ordered[0]][d]
        hi = points[ordered[-1]][d]
        out[pos[ordered[0]]] = math.inf
        out[pos[ordered[-1]]] = math.inf
        if hi == lo:
            continue
        for at in range(1, k - 1):
            prev_v = points[ordered[at - 1]][d]
            next_v = points[ordered[at + 1]][d]
            target = pos[ordered[at]]
            if out[target] != math.inf:
                out[target] += (next_v - prev_v) / (hi - lo)
    return out


# ---------------------------------------------------------------------------
# NSGA-II


def _rank_population(evals: Sequence[Evaluation], names) -> tuple[list[int], list[float]]:
    """Feasibility-first rank and crowding for each individual.

    Feasible individuals get their front index; every infeasible one ranks
    behind the last feasible front with zero crowding.
    """
    pts = [e.point(names) for e in evals]
    feas = [i for i, p in enumerate(pts) if p is not None]
    rank = [0] * len(evals)
    crowd = [0.0] * len(evals)
    worst = 1
    if feas:
        fronts = non_dominated_sort([pts[i] for i in feas])
        for fi, front in enumerate(fronts):
            dist = crowding_distance([pts[i] for i in feas], front)
            for at, local in enumerate(front):
                rank[feas[local]] = fi
                crowd[feas[local]] = dist[at]
        worst = len(fronts)
    for i, p in enumerate(pts):
        if p is None:
            rank[i] = worst
            crowd[i] = 0.0
    return rank, crowd


def _tournament(rng, order, rank, crowd) -> int:
    a = order[rng.randrange(len(order))]
    b = order[rng.randrange(len(order))]
    if rank[a] != rank[b]:
        return a if rank[a] < rank[b] else b
    if crowd[a] != crowd[b]:
        return a if crowd[a] > crowd[b] else b
    return a if rng.random() < 0.5 else b


def _order_crossover(rng, a: tuple, b: tuple) -> tuple:
    n = len(a)
    if n < 2:
        return a
    i = rng.randrange(n)
    j = rng.randrange(n)
    if i > j:
        i, j = j, i
    segment = a[i:j]
    used = set(segment)
    fill = [e for e in b if e not in used]
    child = fill[:i] + list(segment) + fill[i:]
    return tuple(child)


def _vary(rng, space: SearchSpace, pa: Mapping, pb: Mapping) -> dict:
    """Uniform / order crossover followed by per-gene mutation at rate 1/D."""
    d = len(space.parameters)
    rate = 1.0 / d if d else 0.0
    child: dict = {}
    for p in space.parameters:
        if p.kind == "permutation":
            v = _order_crossover(rng, pa[p.name], pb[p.name])
            if rng.random() < rate and p.size >= 2:
                w = list(v)
                i = rng.randrange(p.size)
                j = rng.randrange(p.size)
                w[i], w[j] = w[j], w[i]
                v = tuple(w)
        else:
            v = pa[p.name] if rng.random() < 0.5 else pb[p.name]
            if rng.random() < rate:
                v = p.values[rng.randrange(len(p.values))]
        child[p.name] = v
    return child


def nsga2(
    study: StudyDefinition,
    evaluate: EvaluateFn,
    budget: int,
    population: int = 20,
    seed: int = 0,
) -> list[Evaluation]:
    """Elitist evolutionary search with feasibility-first selection.

    Children failing known constraints are re-varied up to 100 times and
    then replaced by a fresh valid sample, so every issued query is valid.
    With population >= budget no child generation is ever issued.
    """
    if population < 4 or population % 2:
        raise ValueError(f"population must be an even number >= 4, got {population}")
    space = study.space
    names = study.objective_names
    rng = random.Random(seed)
    evals: list[Evaluation] = []

    def issue(cfg) -> Evaluation:
        e = Evaluation(dict(cfg), evaluate(cfg))
        evals.append(e)
        return e

    pop = [issue(c) for c in space.sample_valid(min(population, budget), seed)]
    while len(evals) < budget:
        rank, crowd = _rank_population(pop, names)
        order = list(range(len(pop)))
        children: list[Evaluation] = []
        while len(children) < population and len(evals) < budget:
            pa = pop[_tournament(rng, order, rank, crowd)].configuration
            pb = pop[_tournament(rng, order, rank, crowd)].configuration
            child = None
            for _ in range(100):
                candidate = _vary(rng, space, pa, pb)
                if space.is_valid(candidate):
                    child = candidate
                    break
            if child is None:
                child = space.sample_valid(1, rng.randrange(2**63))[0]
            children.append(issue(child))
        union = pop + children
        rank, crowd = _rank_population(union, names)
        keep = sorted(
            range(len(union)), key=lambda i: (rank[i], -crowd[i], i)
        )[:population]
        pop = [union[i] for i in sorted(keep)]
    return evals


# ---------------------------------------------------------------------------
# model-guided search


def expected_improvement(mean: float, stddev: float, best: float) -> float:
    """EI of a normal belief against the incumbent, minimization."""
    if stddev <= 0.0:
        return max(best - mean, 0.0)
    z = (best - mean) / stddev
    pdf = math.exp(-0.5 * z * z) / math.sqrt(2.0 * math.pi)
    cdf = 0.5 * (1.0 + math.erf(z / math.sqrt(2.0)))
    return (best - mean) * cdf + stddev * pdf


def constrained_ei(mean: float, stddev: float, best: float, p_feasible: float) -> float:
    """Expected improvement discounted by the feasibility belief."""
    return expected_improvement(mean, stddev, best) * p_feasible


class FeasibilityClassifier:
    """k-nearest-neighbor vote over observed (config, feasible) pairs."""

    def __init__(self, space: SearchSpace, codes: np.ndarray, labels: np.ndarray, k: int):
        self.space = space
        self.codes = codes
        self.labels = labels
        self.k = k

    @classmethod
    def fit(cls, space, configs, feasible_flags, k: int = 5) -> "FeasibilityClassifier":
        labels = np.asarray(list(feasible_flags), dtype=bool)
        return cls(space, space.integer_codes(configs), labels, k)

    def predict(self, configs) -> np.ndarray:
        """Feasible fraction among the k nearest observations, per config."""
        if self.labels.all():
            # nothing infeasible seen yet: the vote is 1 everywhere
            return np.ones(len(configs))
        d = self.space.cross_distances(self.space.integer_codes(configs), self.codes)
        kk = min(self.k, self.labels.size)
        order = np.argsort(d, axis=1, kind="stable")[:, :kk]
        return self.labels[order].mean(axis=1)


def one_step_neighbors(space: SearchSpace, config: Mapping[str, Any]) -> list[dict]:
    """Every config one move away: ordinal rank +-1, categorical swap to any
    other label, permutation one adjacent transposition. Unfiltered."""
    cfg = space.canonical(config)
    out = []
    for p in space.parameters:
        v = cfg[p.name]
        if p.kind == "ordinal":
            r = p.rank(v)
            for nr in (r - 1, r + 1):
                if 0 <= nr < len(p.values):
                    out.append({**cfg, p.name: p.values[nr]})
        elif p.kind == "categorical":
            for other in p.values:
                if other != v:
                    out.append({**cfg, p.name: other})
        else:
            for i in range(p.size - 1):
                w = list(v)
                w[i], w[i + 1] = w[i + 1], w[i]
                out.append({**cfg, p.name: tuple(w)})
    return out


def model_based(
    study: StudyDefinition,
    evaluate: EvaluateFn,
    budget: int,
    seed: int = 0,
    *,
    initial: int = 10,
    pool_size: int = 1000,
    trees: int = 24,
    max_depth: int = 12,
) -> list[Evaluation]:
    """Surrogate-guided search with constrained expected improvement.

    After an initial random design, each step fits the tree ensemble per
    objective (member spread as uncertainty), scores a pool of random valid
    configs plus the incumbents' one-step neighbors with EI on a random-
    weight Chebyshev scalarization times a feasibility vote, and queries the
    argmax (ties to the lowest pool index). With budget = initial + 1
    exactly one model-guided query is issued.
    """
    space = study.space
    names = study.objective_names
    rng = random.Random(seed)
    np_rng = np.random.default_rng(seed)
    base_fids = resolve_fidelities(study, None)
    evals: list[Evaluation] = []

    def issue(cfg) -> Evaluation:
        e = Evaluation(dict(cfg), evaluate(cfg))
        evals.append(e)
        return e

    for c in space.sample_valid(min(initial, budget), seed):
        issue(c)

    while len(evals) < budget:
        feasible = [(e, e.point(names)) for e in evals]
        feasible = [(e, p) for e, p in feasible if p is not None]
        if len(feasible) < _surrogate.MIN_FIT_RECORDS:
            issue(space.sample_valid(1, rng.randrange(2**63))[0])
            continue

        records = [
            EvaluationRecord(
                study_id=study.study_id,
                server="local",
                optimizer="model_based",
                seed=seed,
                iteration=i,
                timestamp=0.0,
                configuration=e.configuration,
                fidelities=base_fids,
                result=e.result,
            )
            for i, e in enumerate(evals)
        ]
        model = _surrogate.fit(
            space,
            records,
            names,
            seed * 1_000_003 + len(evals),
            trees=trees,
            max_depth=max_depth,
        )
        classifier = FeasibilityClassifier.fit(
            space,
            [e.configuration for e in evals],
            [e.result.feasible for e in evals],
        )

        pts = np.array([p for _, p in feasible])
        ideal = pts.min(axis=0)
        spans = np.where(pts.max(axis=0) > ideal, pts.max(axis=0) - ideal, 1.0)
        weights = np_rng.dirichlet(np.ones(len(names))) if len(names) > 1 else np.ones(1)

        front_idx = (
            range(len(feasible))
            if len(names) == 1
            else _pareto_of(pts)
        )
        incumbents = (
            [feasible[int(np.argmin(pts[:, 0]))][0].configuration]
            if len(names) == 1
            else [feasible[i][0].configuration for i in front_idx]
        )
        pool = space.sample_valid(pool_size, rng.randrange(2**63))
        for inc in incumbents:
            pool.extend(n for n in one_step_neighbors(space, inc) if space.is_valid(n))

        X = _surrogate.feature_matrix(space, pool, base_fids)
        member = np.stack(
            [model.regressors[n].member_rows(X) for n in names]
        )  # (M, T, n)
        scaled = (member - ideal[:, None, None]) / spans[:, None, None]
        g = (weights[:, None, None] * scaled).max(axis=0)  # (T, n)
        mean = g.mean(axis=0)
        std = g.std(axis=0)
        best = float(((pts - ideal) / spans * weights).max(axis=1).min())
        p_feas = classifier.predict(pool)
        acq = np.array(
            [
                constrained_ei(float(mean[i]), float(std[i]), best, float(p_feas[i]))
                for i in range(len(pool))
            ]
        )
        issue(pool[int(np.argmax(acq))])
    return evals


def _pareto_of(pts: np.ndarray) -> list[int]:
    out = []
    for i in range(pts.shape[0]):
        dominated = (
            (pts <= pts[i]).all(axis=1) & (pts < pts[i]).any(axis=1)
        ).any()
        if not dominated:
            out.append(i)
    return out


OPTIMIZERS = {
    "random_search": random_search,
    "nsga2": nsga2,
    "model_based": model_based,
}
