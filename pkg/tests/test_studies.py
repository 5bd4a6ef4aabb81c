"""Study documents: schema enforcement and the bundled catalog.

Native *-cpu studies are runnable here and their metadata must agree with
fresh enumeration. Reference studies describe campaigns measured on other
hardware; their metadata is carried as recorded, so only document-level
consistency is checked for them.
"""

import pytest

from tunebench.kernels import hidden_infeasibility, list_default_config
from tunebench.records import InvalidFidelityError
from tunebench.studies import (
    StudyFormatError,
    bundled_study_ids,
    from_document,
    load_bundled,
    resolve_fidelities,
    to_document,
)

NATIVE = [
    "gemm-cpu",
    "stencil-cpu",
    "asum-cpu",
    "scal-cpu",
    "spmv-cpu",
    "spmm-cpu",
    "sddmm-cpu",
    "kmeans-cpu",
]

REFERENCE = [
    "gemm-rtxtitan",
    "stencil-rtxtitan",
    "asum-rtxtitan",
    "scal-rtxtitan",
    "kmeans-rtxtitan",
    "spmv-xeone5",
    "spmm-xeone5",
    "sddmm-xeone5",
    "ttv-xeone5",
    "mttkrp-xeone5",
]


def minimal_doc():
    return {
        "study_id": "t",
        "benchmark": "t",
        "backend": "surrogate",
        "search_space": {
            "parameters": [{"name": "a", "kind": "ordinal", "values": [1, 2]}],
            "known_constraints": [],
        },
        "objectives": [{"name": "runtime_seconds", "unit": "s"}],
        "fidelities": [],
        "metadata": {
            "num_objectives": 1,
            "dimensions": 1,
            "num_fidelities": 0,
            "space_size": 2,
            "known_valid": 2,
            "valid_ratio": 1.0,
        },
    }


# --- schema enforcement ----------------------------------------------------


def test_minimal_document_parses():
    study = from_document(minimal_doc())
    assert study.study_id == "t"
    assert study.objective_names == ("runtime_seconds",)


@pytest.mark.parametrize("missing", ["study_id", "search_space", "benchmark", "objectives", "metadata"])
def test_required_fields(missing):
    doc = minimal_doc()
    del doc[missing]
    with pytest.raises(StudyFormatError):
        from_document(doc)


def test_unknown_objective_name_rejected():
    doc = minimal_doc()
    doc["objectives"] = [{"name": "carbon_emitted"}]
    with pytest.raises(StudyFormatError):
        from_document(doc)


def test_maximize_direction_rejected():
    doc = minimal_doc()
    doc["objectives"][0]["direction"] = "maximize"
    with pytest.raises(StudyFormatError):
        from_document(doc)


def test_kernel_backend_needs_problem_block():
    doc = minimal_doc()
    doc["backend"] = "kernel"
    with pytest.raises(StudyFormatError):
        from_document(doc)


def test_unknown_schema_version_rejected():
    doc = minimal_doc()
    doc["schema_version"] = 99
    with pytest.raises(StudyFormatError):
        from_document(doc)


def test_fidelity_default_must_sit_in_range():
    doc = minimal_doc()
    doc["fidelities"] = [{"name": "iterations", "maximum": 100, "default": 200}]
    with pytest.raises(StudyFormatError):
        from_document(doc)


def test_bad_constraint_text_reported_with_study_id():
    doc = minimal_doc()
    doc["search_space"]["known_constraints"] = ["a +"]
    with pytest.raises(StudyFormatError) as err:
        from_document(doc)
    assert "'t'" in str(err.value)


# --- fidelity resolution ---------------------------------------------------


def full_fidelity_study():
    doc = minimal_doc()
    doc["fidelities"] = [
        {"name": "iterations", "minimum": 1, "maximum": 100, "default": 10},
        {"name": "repeats", "minimum": 1, "maximum": 10, "default": 3},
        {"name": "wait_between_repeats", "minimum": 0, "maximum": 1000, "default": 0},
        {"name": "wait_after_evaluation", "minimum": 0, "maximum": 1000, "default": 0},
    ]
    return from_document(doc)


def test_resolve_fidelities_defaults():
    study = full_fidelity_study()
    f = resolve_fidelities(study, None)
    assert (f.iterations, f.repeats) == (10, 3)


def test_resolve_fidelities_partial_override():
    study = full_fidelity_study()
    f = resolve_fidelities(study, {"iterations": 50})
    assert f.iterations == 50 and f.repeats == 3


def test_resolve_fidelities_out_of_range():
    study = full_fidelity_study()
    with pytest.raises(InvalidFidelityError):
        resolve_fidelities(study, {"iterations": 101})


def test_resolve_fidelities_undeclared_name():
    study = from_document(minimal_doc())  # declares none at all
    with pytest.raises(InvalidFidelityError):
        resolve_fidelities(study, {"iterations": 5})


# --- bundled catalog -------------------------------------------------------


def test_bundled_catalog_contents():
    ids = bundled_study_ids()
    assert ids == sorted(NATIVE + REFERENCE)


@pytest.mark.parametrize("study_id", NATIVE + REFERENCE)
def test_bundled_documents_round_trip(study_id):
    study = load_bundled(study_id)
    again = from_document(to_document(study))
    assert to_document(again) == to_document(study)
    assert again.study_id == study_id


@pytest.mark.parametrize("study_id", NATIVE)
def test_native_metadata_agrees_with_enumeration(study_id):
    study = load_bundled(study_id)
    valid, ratio = study.space.enumerate_valid()
    meta = study.metadata
    assert meta.space_size == study.space.cardinality
    assert meta.known_valid == len(valid)
    assert meta.valid_ratio == pytest.approx(ratio)
    assert meta.dimensions == len(study.space.parameters)
    assert meta.num_objectives == len(study.objectives)
    assert meta.num_fidelities == len(study.fidelities)


@pytest.mark.parametrize("study_id", NATIVE)
def test_native_default_config_is_valid(study_id):
    study = load_bundled(study_id)
    default = list_default_config(study.problem.kernel)
    assert study.space.is_valid(default)
    assert hidden_infeasibility(study, default) is None


@pytest.mark.parametrize("study_id", NATIVE)
def test_native_hidden_tag_matches_reachable_infeasibility(study_id):
    study = load_bundled(study_id)
    valid, _ = study.space.enumerate_valid()
    hit = any(hidden_infeasibility(study, c) is not None for c in valid)
    tagged = "hidden" in study.metadata.constraint_kinds
    assert hit == tagged


@pytest.mark.parametrize("study_id", NATIVE)
def test_native_studies_declare_kernel_backend(study_id):
    study = load_bundled(study_id)
    assert study.backend == "kernel"
    assert study.problem is not None
    assert study.problem.default_preset in study.problem.presets
    assert "small" in study.problem.presets and "large" in study.problem.presets


@pytest.mark.parametrize("study_id", REFERENCE)
def test_reference_studies_enumerable_but_foreign(study_id):
    study = load_bundled(study_id)
    assert study.backend == "surrogate"
    assert study.problem is None
    # spaces are small enough to enumerate locally even though the recorded
    # campaign metadata describes a much larger original space
    assert study.space.cardinality <= 100_000
    assert study.metadata.dimensions == len(study.space.parameters)
    assert study.notes  # provenance of the recorded figures is spelled out


def test_reference_metadata_kept_verbatim():
    meta = load_bundled("gemm-rtxtitan").metadata
    assert meta.num_objectives == 3
    assert meta.space_size == 156_000_000
    assert meta.valid_ratio == pytest.approx(0.0134)
    assert meta.space_size != load_bundled("gemm-rtxtitan").space.cardinality


@pytest.mark.parametrize("study_id", NATIVE + REFERENCE)
def test_every_bundled_study_is_minimization_with_known_objectives(study_id):
    study = load_bundled(study_id)
    for o in study.objectives:
        assert o.direction == "minimize"
        assert o.name in ("runtime_seconds", "memory_traffic_bytes")


def test_load_bundled_unknown_id():
    with pytest.raises(StudyFormatError) as err:
        load_bundled("no-such-study")
    assert "gemm-cpu" in str(err.value)
