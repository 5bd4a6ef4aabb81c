"""Log analysis: dominance, hypervolume, trajectories, speedups, importance."""

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from tunebench.metrics import (
    AnalysisError,
    SpeedupDistribution,
    clip_to_reference,
    default_reference,
    dominates,
    hypervolume_2d,
    hypervolume_trajectory,
    incumbent_trajectory,
    objective_points,
    pareto_front,
    pareto_indices,
    permutation_importance,
    speedup_distribution,
    trajectory_aggregate,
)
from tunebench.surrogate import fit

from conftest import feasible_run, make_space, ordinal, rec
from oracles import HAND_HV_VALUE, oracle_hypervolume_mc, oracle_pareto

point_lists = st.lists(
    st.tuples(st.integers(0, 12), st.integers(0, 12)).map(
        lambda t: (float(t[0]), float(t[1]))
    ),
    min_size=1,
    max_size=40,
)


# --- dominance ------------------------------------------------------------


def test_dominates_base_cases():
    assert dominates((1.0, 2.0), (2.0, 2.0))
    assert not dominates((1.0, 2.0), (1.0, 2.0))
    assert not dominates((1.0, 3.0), (2.0, 2.0))


def test_pareto_hand_case():
    pts = [(1.0, 2.0), (2.0, 1.0), (2.0, 2.0)]
    assert pareto_front(pts) == [(1.0, 2.0), (2.0, 1.0)]
    assert pareto_indices(pts) == [0, 1]


def test_pareto_single_point_and_duplicates():
    assert pareto_front([(3.0, 3.0)]) == [(3.0, 3.0)]
    assert pareto_indices([(1.0, 1.0), (1.0, 1.0)]) == [0]


@settings(max_examples=150, deadline=None)
@given(point_lists)
def test_pareto_matches_oracle(points):
    assert pareto_indices(points) == sorted(oracle_pareto(points))


@settings(max_examples=80, deadline=None)
@given(point_lists)
def test_pareto_front_is_dominance_free_and_covers(points):
    front = pareto_front(points)
    for i, p in enumerate(front):
        assert not any(dominates(q, p) for q in front)
    for p in points:
        assert tuple(p) in front or any(dominates(f, p) for f in front)


# --- hypervolume ----------------------------------------------------------


def test_hypervolume_hand_case():
    assert hypervolume_2d([(1.0, 2.0), (2.0, 1.0)], (3.0, 3.0)) == HAND_HV_VALUE


def test_hypervolume_point_on_reference_contributes_nothing():
    assert hypervolume_2d([(3.0, 3.0)], (3.0, 3.0)) == 0.0
    assert hypervolume_2d([], (3.0, 3.0)) == 0.0


def test_hypervolume_requires_two_objectives():
    with pytest.raises(AnalysisError):
        hypervolume_2d([(1.0, 1.0, 1.0)], (2.0, 2.0, 2.0))


def test_clip_to_reference_counts_and_never_inflates():
    pts, touched = clip_to_reference([(1.0, 5.0), (2.0, 2.0)], (3.0, 3.0))
    assert pts == [(1.0, 3.0), (2.0, 2.0)] and touched == 1
    assert hypervolume_2d([(1.0, 5.0)], (3.0, 3.0)) == hypervolume_2d([(1.0, 3.0)], (3.0, 3.0))


@settings(max_examples=100, deadline=None)
@given(point_lists, st.tuples(st.integers(0, 12), st.integers(0, 12)))
def test_hypervolume_monotone_under_added_points(points, extra):
    ref = (13.0, 13.0)
    before = hypervolume_2d(points, ref)
    after = hypervolume_2d(points + [(float(extra[0]), float(extra[1]))], ref)
    assert after >= before - 1e-12


def test_hypervolume_against_monte_carlo_spot_check():
    rng = np.random.default_rng(11)
    pts = [tuple(map(float, rng.uniform(0, 1, size=2))) for _ in range(20)]
    ref = (1.2, 1.2)
    exact = hypervolume_2d(pts, ref)
    approx = oracle_hypervolume_mc(pts, ref, samples=200_000, seed=7)
    assert abs(exact - approx) / exact < 0.02


def test_default_reference_scales_maxima():
    assert default_reference([(1.0, 4.0), (2.0, 3.0)]) == (2.2, 4.4)
    with pytest.raises(AnalysisError):
        default_reference([])


# --- trajectories ---------------------------------------------------------


def test_incumbent_hand_case():
    run = feasible_run([3.0, 2.0, 5.0])
    assert incumbent_trajectory(run, "runtime_seconds") == [3.0, 2.0, 2.0]


def test_incumbent_skips_leading_infeasible():
    run = [
        rec({"a": 1}, {}, feasible=False, reason="scratch overflow", iteration=0),
        rec({"a": 1}, {"runtime_seconds": 4.0}, iteration=1),
        rec({"a": 1}, {}, feasible=False, reason="scratch overflow", iteration=2),
    ]
    assert incumbent_trajectory(run, "runtime_seconds") == [None, 4.0, 4.0]


def test_incumbent_requires_a_feasible_record():
    run = [rec({"a": 1}, {}, feasible=False, reason="nope", iteration=0)]
    with pytest.raises(AnalysisError):
        incumbent_trajectory(run, "runtime_seconds")


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(0.1, 100.0, allow_nan=False), min_size=1, max_size=30))
def test_incumbent_nonincreasing_once_started(values):
    run = feasible_run(values)
    traj = incumbent_trajectory(run, "runtime_seconds")
    started = [v for v in traj if v is not None]
    assert all(b <= a for a, b in zip(started, started[1:]))


def test_hypervolume_trajectory_nondecreasing():
    run = []
    rng = np.random.default_rng(2)
    for i in range(15):
        x, y = rng.uniform(0, 1, size=2)
        run.append(
            rec(
                {"a": 1},
                {"runtime_seconds": float(x), "memory_traffic_bytes": float(y)},
                iteration=i,
            )
        )
    traj = hypervolume_trajectory(run, ("runtime_seconds", "memory_traffic_bytes"), (1.0, 1.0))
    assert len(traj) == 15
    assert all(b >= a - 1e-12 for a, b in zip(traj, traj[1:]))


def test_aggregate_identical_runs_zero_band():
    t = [3.0, 2.0, 1.0]
    mean, lo, hi = trajectory_aggregate([t, t, t])
    assert mean == t and lo == t and hi == t


def test_aggregate_hand_case():
    mean, lo, hi = trajectory_aggregate([[1.0], [3.0]])
    # stddev sqrt(2), standard error 1, band 2 +- 2
    assert mean == [2.0]
    assert lo == [pytest.approx(0.0)] and hi == [pytest.approx(4.0)]


def test_aggregate_propagates_none():
    mean, lo, hi = trajectory_aggregate([[None, 2.0], [1.0, 4.0]])
    assert mean[0] is None and lo[0] is None and hi[0] is None
    assert mean[1] == 3.0


def test_aggregate_needs_two_equal_length_runs():
    with pytest.raises(AnalysisError):
        trajectory_aggregate([[1.0, 2.0]])
    with pytest.raises(AnalysisError):
        trajectory_aggregate([[1.0, 2.0], [1.0]])


def test_aggregate_band_shrinks_with_seed_count():
    rng = np.random.default_rng(8)
    runs16 = [[float(v)] for v in rng.normal(10.0, 1.0, size=16)]
    w4 = trajectory_aggregate(runs16[:4])
    w16 = trajectory_aggregate(runs16)
    width4 = w4[2][0] - w4[1][0]
    width16 = w16[2][0] - w16[1][0]
    # quadrupling the seeds roughly halves the band
    assert width16 < width4


# --- speedups -------------------------------------------------------------


def test_speedup_point_mass_at_one():
    run = feasible_run([2.0, 2.0, 2.0])
    dist = speedup_distribution(run, baseline=2.0)
    assert dist.median == 1.0 and dist.maximum == 1.0 and dist.count == 3
    assert dist.log10_edges[0] == pytest.approx(-0.025)
    assert dist.log10_edges[-1] == pytest.approx(0.025)


def test_speedup_mass_at_two():
    run = feasible_run([1.0, 1.0])
    dist = speedup_distribution(run, baseline=2.0)
    assert dist.median == 2.0 and dist.maximum == 2.0


def test_speedup_density_integrates_to_one():
    run = feasible_run([0.5, 1.0, 2.0, 4.0, 8.0])
    dist = speedup_distribution(run, baseline=2.0, bins=12)
    widths = np.diff(dist.log10_edges)
    assert float(np.sum(widths * np.array(dist.densities))) == pytest.approx(1.0)
    assert isinstance(dist, SpeedupDistribution)


def test_speedup_rejects_bad_inputs():
    with pytest.raises(AnalysisError):
        speedup_distribution(feasible_run([1.0]), baseline=0.0)
    only_bad = [rec({"a": 1}, {}, feasible=False, reason="nope")]
    with pytest.raises(AnalysisError):
        speedup_distribution(only_bad, baseline=1.0)


# --- objective extraction -------------------------------------------------


def test_objective_points_filters_infeasible():
    records = [
        rec({"a": 1}, {"runtime_seconds": 1.0, "memory_traffic_bytes": 2.0}, iteration=0),
        rec({"a": 1}, {}, feasible=False, reason="nope", iteration=1),
        rec({"a": 1}, {"runtime_seconds": 3.0, "memory_traffic_bytes": 4.0}, iteration=2),
    ]
    pts, idx = objective_points(records, ("runtime_seconds", "memory_traffic_bytes"))
    assert pts == [(1.0, 2.0), (3.0, 4.0)]
    assert idx == [0, 2]


# --- permutation importance -----------------------------------------------


def importance_setup(fn, n_train=250, n_hold=60, seed=0):
    space = make_space(
        ordinal("p1", *range(8)),
        ordinal("p2", *range(8)),
        ordinal("p3", *range(8)),
    )
    def records(n, s):
        return [
            rec(c, {"runtime_seconds": fn(c)}, seed=s, iteration=i)
            for i, c in enumerate(space.sample_valid(n, s))
        ]
    model = fit(space, records(n_train, seed * 2 + 1), "runtime_seconds", seed)
    return space, model, records(n_hold, seed * 2 + 2)


def test_importance_single_active_parameter():
    _, model, holdout = importance_setup(lambda c: float(c["p1"]))
    scores = permutation_importance(model, holdout, "runtime_seconds", seed=0)
    assert scores["p1"] == pytest.approx(1.0, abs=0.05)
    assert scores["p2"] <= 0.05 and scores["p3"] <= 0.05


def test_importance_constant_target_all_zero():
    _, model, holdout = importance_setup(lambda c: 5.0)
    scores = permutation_importance(model, holdout, "runtime_seconds", seed=0)
    assert all(v == 0.0 for v in scores.values())


def test_importance_absent_parameter_vanishes_with_rounds():
    _, model, holdout = importance_setup(lambda c: 4.0 * c["p1"] + 2.0 * c["p2"])
    scores = permutation_importance(model, holdout, "runtime_seconds", seed=3, rounds=50)
    assert scores["p3"] <= 0.02


def test_importance_requires_ensemble_and_enough_holdout():
    space, model, holdout = importance_setup(lambda c: float(c["p1"]))
    with pytest.raises(AnalysisError):
        permutation_importance(model, holdout[:10], "runtime_seconds", seed=0)
    knn = fit(
        space,
        [rec(c, {"runtime_seconds": 1.0}, iteration=i) for i, c in enumerate(space.sample_valid(30, 5))],
        "runtime_seconds",
        0,
        mode="knn",
    )
    with pytest.raises(AnalysisError):
        permutation_importance(knn, holdout, "runtime_seconds", seed=0)


def test_importance_deterministic_for_fixed_seed():
    _, model, holdout = importance_setup(lambda c: 3.0 * c["p1"] + c["p2"])
    a = permutation_importance(model, holdout, "runtime_seconds", seed=4)
    b = permutation_importance(model, holdout, "runtime_seconds", seed=4)
    assert a == b
