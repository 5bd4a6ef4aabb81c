"""Predictive models fitted from evaluation logs, served as backends.

Two model families. The default is a bagged ensemble of depth-limited
regression trees over the encoded configuration plus the four fidelity
values; the spread of the member predictions doubles as a predictive
uncertainty for acquisition functions. The fallback is a k-nearest-neighbor
table under the search-space distance, which ignores fidelities and, at
k=1, replays an enumerated study exactly.

Models never enforce constraints: any in-domain configuration gets a finite
prediction, including ones that were invalid or infeasible when measured.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import Any, Iterable, Mapping, Sequence

import numpy as np

from .records import FIDELITY_NAMES, EvaluationRecord, FidelitySettings, QueryResult
from .space import SearchSpace
from .studies import StudyDefinition

__all__ = [
    "MIN_FIT_RECORDS",
    "InsufficientDataError",
    "UndefinedScoreError",
    "SurrogateModel",
    "TreeEnsembleRegressor",
    "NearestNeighborRegressor",
    "feature_matrix",
    "fit",
    "predict",
    "r2_score",
    "SurrogateBackend",
]

MIN_FIT_RECORDS = 10


class InsufficientDataError(ValueError):
    """Too few feasible records to fit a model."""


class UndefinedScoreError(ValueError):
    """The holdout set cannot support an R^2 (too small or zero variance)."""


def feature_matrix(
    space: SearchSpace,
    configs: Sequence[Mapping[str, Any]],
    fidelities: FidelitySettings | Sequence[FidelitySettings],
) -> np.ndarray:
    """Encoded configurations with the fidelity values appended as columns."""
    enc = space.encode_matrix(configs)
    if isinstance(fidelities, FidelitySettings):
        fidelities = [fidelities] * len(configs)
    if len(fidelities) != len(configs):
        raise ValueError("one FidelitySettings per configuration required")
    fid = np.array(
        [[float(getattr(f, name)) for name in FIDELITY_NAMES] for f in fidelities],
        dtype=np.float64,
    ).reshape(len(configs), len(FIDELITY_NAMES))
    return np.hstack([enc, fid])


def _feasible_with(records: Iterable[EvaluationRecord], names: Sequence[str]):
    out = []
    for r in records:
        if r.result.feasible and all(n in r.result.objectives for n in names):
            out.append(r)
    return out


# ---------------------------------------------------------------------------
# regression trees


class _Tree:
    """Flat-array binary regression tree. feature < 0 marks a leaf."""

    __slots__ = ("feature", "threshold", "left", "right", "value")

    def __init__(self):
        self.feature: list[int] = []
        self.threshold: list[float] = []
        self.left: list[int] = []
        self.right: list[int] = []
        self.value: list[float] = []

    def seal(self):
        self.feature = np.asarray(self.feature, dtype=np.int32)
        self.threshold = np.asarray(self.threshold, dtype=np.float64)
        self.left = np.asarray(self.left, dtype=np.int32)
        self.right = np.asarray(self.right, dtype=np.int32)
        self.value = np.asarray(self.value, dtype=np.float64)
        return self

    def apply(self, X: np.ndarray) -> np.ndarray:
        node = np.zeros(X.shape[0], dtype=np.int64)
        rows = np.arange(X.shape[0])
        while True:
            feat = self.feature[node]
            at_leaf = feat < 0
            if at_leaf.all():
                break
            go_left = X[rows, np.maximum(feat, 0)] <= self.threshold[node]
            step = np.where(go_left, self.left[node], self.right[node])
            node = np.where(at_leaf, node, step)
        return self.value[node]


def _best_split(X: np.ndarray, y: np.ndarray, rows: np.ndarray, min_leaf: int):
    """Exhaustive variance-reduction split search over all features.

    Returns (feature, threshold) or None. Candidate thresholds are midpoints
    between consecutive distinct values; ties resolve to the first feature
    and first threshold reaching the minimum, so growth is deterministic.
    """
    ysub = y[rows]
    n = rows.size
    best_sse = np.inf
    best = None
    for j in range(X.shape[1]):
        col = X[rows, j]
        order = np.argsort(col, kind="stable")
        cs = col[order]
        ys = ysub[order]
        cut = np.nonzero(cs[1:] > cs[:-1])[0]
        if cut.size == 0:
            continue
        pre = np.cumsum(ys)
        pre2 = np.cumsum(ys * ys)
        nl = cut + 1.0
        nr = n - nl
        ok = (nl >= min_leaf) & (nr >= min_leaf)
        if not ok.any():
            continue
        sl = pre[cut]
        s2l = pre2[cut]
        sse = (s2l - sl * sl / nl) + ((pre2[-1] - s2l) - (pre[-1] - sl) ** 2 / nr)
        sse = np.where(ok, sse, np.inf)
        k = int(np.argmin(sse))
        # strict comparison: ties stay with the earlier feature, and the
        # choice commutes with rescaling the targets
        if sse[k] < best_sse:
            best_sse = sse[k]
            best = (j, 0.5 * (cs[cut[k]] + cs[cut[k] + 1]))
    return best


def _grow(X, y, rows, depth, max_depth, min_leaf, tree: _Tree) -> int:
    idx = len(tree.feature)
    tree.feature.append(-1)
    tree.threshold.append(0.0)
    tree.left.append(-1)
    tree.right.append(-1)
    tree.value.append(float(np.mean(y[rows])))
    if depth >= max_depth or rows.size < 2 * min_leaf:
        return idx
    if np.ptp(y[rows]) == 0.0:
        return idx
    split = _best_split(X, y, rows, min_leaf)
    if split is None:
        return idx
    j, thr = split
    mask = X[rows, j] <= thr
    tree.feature[idx] = j
    tree.threshold[idx] = thr
    tree.left[idx] = _grow(X, y, rows[mask], depth + 1, max_depth, min_leaf, tree)
    tree.right[idx] = _grow(X, y, rows[~mask], depth + 1, max_depth, min_leaf, tree)
    return idx


@dataclass(frozen=True)
class TreeEnsembleRegressor:
    """Bootstrap-aggregated regression trees on feature rows."""

    members: tuple[_Tree, ...]

    def member_rows(self, X: np.ndarray) -> np.ndarray:
        """Per-member predictions, shape (members, n)."""
        return np.stack([t.apply(X) for t in self.members])

    def predict_rows(self, X: np.ndarray) -> np.ndarray:
        return self.member_rows(X).mean(axis=0)

    def predict_batch(self, space, configs, fidelities) -> np.ndarray:
        return self.predict_rows(feature_matrix(space, configs, fidelities))


def _fit_ensemble(X, y, seed, trees, max_depth, min_leaf) -> TreeEnsembleRegressor:
    rng = np.random.default_rng(seed)
    n = X.shape[0]
    members = []
    for _ in range(trees):
        rows = rng.integers(0, n, size=n)
        tree = _Tree()
        _grow(X, y, np.asarray(rows), 0, max_depth, min_leaf, tree)
        members.append(tree.seal())
    return TreeEnsembleRegressor(members=tuple(members))


# ---------------------------------------------------------------------------
# nearest neighbors


@dataclass(frozen=True)
class NearestNeighborRegressor:
    """Weighted k-NN table under the search-space distance.

    Duplicate training configurations are collapsed to one entry whose
    weight is the duplicate count and whose value is the mean target, so a
    duplicated training set and its deduplicated weighted form fit to the
    same model. Fidelities do not enter the distance.
    """

    codes: np.ndarray
    values: np.ndarray
    weights: np.ndarray
    k: int

    def predict_batch(self, space, configs, fidelities=None) -> np.ndarray:
        q = space.integer_codes(configs)
        d = space.cross_distances(q, self.codes)
        total_w = float(self.weights.sum())
        kk = min(float(self.k), total_w)
        out = np.empty(len(configs))
        for i in range(len(configs)):
            order = np.argsort(d[i], kind="stable")
            need = kk
            acc = 0.0
            for j in order:
                take = min(float(self.weights[j]), need)
                acc += take * self.values[j]
                need -= take
                if need <= 0.0:
                    break
            out[i] = acc / kk
        return out


def _fit_knn(space, configs, y, k) -> NearestNeighborRegressor:
    by_key: dict[tuple, list[int]] = {}
    keyed = []
    for i, cfg in enumerate(configs):
        c = space.canonical(cfg)
        key = tuple(c[p.name] for p in space.parameters)
        if key not in by_key:
            by_key[key] = []
            keyed.append((key, c))
        by_key[key].append(i)
    uniq_configs = [c for _, c in keyed]
    values = np.array([np.mean(y[by_key[key]]) for key, _ in keyed])
    weights = np.array([len(by_key[key]) for key, _ in keyed], dtype=np.float64)
    return NearestNeighborRegressor(
        codes=space.integer_codes(uniq_configs), values=values, weights=weights, k=k
    )


# ---------------------------------------------------------------------------
# the model facade


@dataclass(frozen=True)
class SurrogateModel:
    """Per-objective regressors over one search space."""

    space: SearchSpace
    regressors: dict[str, Any]
    mode: str
    seed: int
    n_records: int

    @property
    def objectives(self) -> tuple[str, ...]:
        return tuple(self.regressors)

    def predict_values(self, configs, fidelities) -> dict[str, np.ndarray]:
        if self.mode == "ensemble":
            X = feature_matrix(self.space, configs, fidelities)
            return {n: r.predict_rows(X) for n, r in self.regressors.items()}
        return {
            n: r.predict_batch(self.space, configs, fidelities)
            for n, r in self.regressors.items()
        }


def fit(
    space: SearchSpace,
    records: Iterable[EvaluationRecord],
    objective: str | Sequence[str],
    seed: int,
    *,
    mode: str = "ensemble",
    trees: int = 24,
    max_depth: int = 12,
    min_leaf: int = 2,
    k: int = 5,
) -> SurrogateModel:
    """Fit one regressor per requested objective on the feasible records.

    Fidelity values are appended to the encoded features (ensemble mode).
    Deterministic for a fixed seed.
    """
    names = (objective,) if isinstance(objective, str) else tuple(objective)
    if mode not in ("ensemble", "knn"):
        raise ValueError(f"unknown surrogate mode {mode!r}")
    usable = _feasible_with(records, names)
    if len(usable) < MIN_FIT_RECORDS:
        raise InsufficientDataError(
            f"need at least {MIN_FIT_RECORDS} feasible records, got {len(usable)}"
        )
    configs = [r.configuration for r in usable]
    regressors: dict[str, Any] = {}
    for i, name in enumerate(names):
        y = np.array([r.result.objectives[name] for r in usable])
        if mode == "ensemble":
            X = feature_matrix(space, configs, [r.fidelities for r in usable])
            regressors[name] = _fit_ensemble(X, y, (seed, i), trees, max_depth, min_leaf)
        else:
            regressors[name] = _fit_knn(space, configs, y, k)
    return SurrogateModel(
        space=space, regressors=regressors, mode=mode, seed=seed, n_records=len(usable)
    )


def predict(
    model: SurrogateModel,
    config: Mapping[str, Any],
    fidelities: FidelitySettings | Mapping[str, Any] | None = None,
) -> QueryResult:
    """Predict all of the model's objectives for one configuration.

    Known and hidden constraints are intentionally not consulted: the result
    is always feasible and the call never waits, whatever the fidelities say.
    """
    if fidelities is None:
        fidelities = FidelitySettings()
    elif not isinstance(fidelities, FidelitySettings):
        fidelities = FidelitySettings.from_dict(fidelities)
    cfg = model.space.canonical(config)
    per = model.predict_values([cfg], fidelities)
    return QueryResult(
        objectives={n: float(v[0]) for n, v in per.items()},
        feasible=True,
    )


def r2_score(
    model: SurrogateModel,
    holdout: Iterable[EvaluationRecord],
    objective: str,
) -> float:
    """1 - SS_res/SS_tot over the feasible holdout records."""
    usable = _feasible_with(holdout, (objective,))
    if len(usable) < 2:
        raise UndefinedScoreError(f"need >= 2 feasible holdout records, got {len(usable)}")
    y = np.array([r.result.objectives[objective] for r in usable])
    ss_tot = float(((y - y.mean()) ** 2).sum())
    if ss_tot == 0.0:
        raise UndefinedScoreError("holdout target has zero variance")
    pred = model.predict_values(
        [r.configuration for r in usable], [r.fidelities for r in usable]
    )[objective]
    ss_res = float(((y - pred) ** 2).sum())
    return 1.0 - ss_res / ss_tot


class SurrogateBackend:
    """Serves a study from a fitted model instead of kernel execution."""

    backend_kind = "surrogate"

    def __init__(
        self,
        study: StudyDefinition,
        records: Iterable[EvaluationRecord],
        *,
        seed: int = 0,
        mode: str = "ensemble",
        trees: int = 24,
        max_depth: int = 12,
        k: int = 5,
    ):
        self.study = study
        self._records = list(records)
        self._options = dict(mode=mode, trees=trees, max_depth=max_depth, k=k)
        self._seed = seed
        self.model: SurrogateModel | None = None
        self.init_count = 0

    def initialize(self):
        self.init_count += 1
        self.model = fit(
            self.study.space,
            self._records,
            self.study.objective_names,
            self._seed,
            **self._options,
        )

    def evaluate(
        self,
        config: Mapping[str, Any],
        fidelities: FidelitySettings,
        evaluation_id: str = "",
    ) -> QueryResult:
        if self.model is None:
            raise RuntimeError("backend not initialized")
        result = predict(self.model, config, fidelities)
        return dataclasses.replace(result, evaluation_id=evaluation_id)
