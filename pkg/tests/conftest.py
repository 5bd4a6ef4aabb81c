"""Shared builders and fixtures.

Synthetic studies here use the surrogate backend id so no kernel problem
block is needed; metadata is computed by enumeration, which keeps every
helper space small by construction.
"""

from __future__ import annotations

import time

import pytest

from tunebench.records import EvaluationRecord, FidelitySettings, QueryResult
from tunebench.space import ParameterDef, SearchSpace
from tunebench.studies import (
    FidelitySpec,
    ObjectiveSpec,
    StudyDefinition,
    StudyMetadata,
    load_bundled,
)
from tunebench.records import load_bundled_log
from tunebench.constraints import parse_constraint


def ordinal(name, *values):
    return ParameterDef(name=name, kind="ordinal", values=tuple(values))


def categorical(name, *labels):
    return ParameterDef(name=name, kind="categorical", values=tuple(labels))


def permutation(name, size):
    return ParameterDef(name=name, kind="permutation", size=size)


def make_space(*params, constraints=()):
    return SearchSpace(
        parameters=tuple(params),
        known_constraints=tuple(parse_constraint(c) for c in constraints),
    )


FULL_FIDELITIES = (
    FidelitySpec("iterations", 1, 100, 10),
    FidelitySpec("repeats", 1, 10, 3),
    FidelitySpec("wait_between_repeats", 0, 1000, 0),
    FidelitySpec("wait_after_evaluation", 0, 1000, 0),
)


def make_study(
    space,
    objectives=("runtime_seconds",),
    study_id="synth",
    backend="surrogate",
    fidelities=FULL_FIDELITIES,
):
    """A StudyDefinition around `space`, metadata filled by enumeration."""
    valid, ratio = space.enumerate_valid()
    return StudyDefinition(
        study_id=study_id,
        benchmark=study_id.split("-")[0],
        hardware_label="test",
        backend=backend,
        space=space,
        objectives=tuple(ObjectiveSpec(name=n, unit="") for n in objectives),
        fidelities=tuple(fidelities),
        metadata=StudyMetadata(
            num_objectives=len(objectives),
            dimensions=len(space.parameters),
            num_fidelities=len(fidelities),
            space_size=space.cardinality,
            known_valid=len(valid),
            valid_ratio=ratio,
            parameter_kinds="".join(sorted(p.kind[0].upper() for p in space.parameters)),
            constraint_kinds="known" if space.known_constraints else "",
        ),
    )


def rec(
    config,
    objectives,
    *,
    feasible=True,
    reason=None,
    optimizer="random_search",
    seed=0,
    iteration=0,
    study_id="synth",
    fidelities=None,
    timestamp=None,
):
    return EvaluationRecord(
        study_id=study_id,
        server="local",
        optimizer=optimizer,
        seed=seed,
        iteration=iteration,
        timestamp=time.time() if timestamp is None else timestamp,
        configuration=dict(config),
        fidelities=fidelities or FidelitySettings(),
        result=QueryResult(
            objectives=dict(objectives),
            feasible=feasible,
            infeasibility_reason=reason,
        ),
    )


def feasible_run(values, *, optimizer="random_search", seed=0, config=None):
    """A run of single-objective records with the given runtime values."""
    out = []
    for i, v in enumerate(values):
        out.append(
            rec(
                config or {"a": 1, "b": 1},
                {"runtime_seconds": v},
                optimizer=optimizer,
                seed=seed,
                iteration=i,
            )
        )
    return out


# the hand-counted two-ordinal space: a, b in 1..8 with a*b <= 8
def small_product_space():
    return make_space(
        ordinal("a", *range(1, 9)),
        ordinal("b", *range(1, 9)),
        constraints=("a * b <= 8",),
    )


@pytest.fixture(scope="session")
def gemm_study():
    return load_bundled("gemm-cpu")


@pytest.fixture(scope="session")
def asum_study():
    return load_bundled("asum-cpu")


@pytest.fixture(scope="session")
def gemm_log():
    return load_bundled_log("gemm-cpu")


@pytest.fixture(scope="session")
def asum_log():
    return load_bundled_log("asum-cpu")
