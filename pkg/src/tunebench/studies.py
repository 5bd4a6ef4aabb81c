"""Study definitions: the document format tying a benchmark to a search
space, objectives, fidelities, and an execution backend.

A study document is a JSON object; `from_document` validates it into a
StudyDefinition and keeps the normalized document around so servers can hand
it to clients verbatim.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from importlib import resources
from typing import Any, Mapping

from .constraints import Constraint, ConstraintError
from .records import FIDELITY_NAMES, FidelitySettings, InvalidFidelityError
from .space import MalformedSpaceError, ParameterDef, SearchSpace

__all__ = [
    "ObjectiveSpec",
    "FidelitySpec",
    "ProblemSpec",
    "StudyMetadata",
    "StudyDefinition",
    "StudyFormatError",
    "from_document",
    "to_document",
    "load_study",
    "bundled_study_ids",
    "load_bundled",
    "resolve_fidelities",
]

SCHEMA_VERSION = 1

OBJECTIVE_NAMES = ("runtime_seconds", "memory_traffic_bytes")

BACKENDS = ("kernel", "surrogate")


class StudyFormatError(ValueError):
    """A study document is malformed or breaks an invariant."""


@dataclass(frozen=True)
class ObjectiveSpec:
    name: str
    unit: str
    direction: str = "minimize"


@dataclass(frozen=True)
class FidelitySpec:
    name: str
    minimum: float
    maximum: float
    default: float


@dataclass(frozen=True)
class ProblemSpec:
    """Native-kernel execution context: input sizes and machine model.

    model_cache_bytes feeds the traffic model, llc_bytes sizes the
    cache-clearing sweep, scratch_budget_bytes and declared_cores /
    oversub_factor drive the hidden feasibility rules.
    """

    kernel: str
    presets: dict[str, dict[str, int]]
    default_preset: str
    seed: int
    density: float | None = None
    scratch_budget_bytes: int = 262144
    model_cache_bytes: int = 1048576
    llc_bytes: int = 4194304
    declared_cores: int = 4
    oversub_factor: int = 2


@dataclass(frozen=True)
class StudyMetadata:
    num_objectives: int
    dimensions: int
    num_fidelities: int
    space_size: int
    known_valid: int
    valid_ratio: float
    parameter_kinds: str = ""
    constraint_kinds: str = ""


@dataclass(frozen=True)
class StudyDefinition:
    study_id: str
    benchmark: str
    hardware_label: str
    backend: str
    space: SearchSpace
    objectives: tuple[ObjectiveSpec, ...]
    fidelities: tuple[FidelitySpec, ...]
    metadata: StudyMetadata
    problem: ProblemSpec | None = None
    notes: str = ""
    document: dict = field(default_factory=dict, compare=False, repr=False)

    @property
    def objective_names(self) -> tuple[str, ...]:
        return tuple(o.name for o in self.objectives)

    def fidelity_spec(self, name: str) -> FidelitySpec | None:
        for f in self.fidelities:
            if f.name == name:
                return f
        return None


def resolve_fidelities(
    study: StudyDefinition, requested: Mapping[str, Any] | None
) -> FidelitySettings:
    """Merge a partial fidelity request against the study's declarations.

    Requests may only name declared fidelities and must stay inside the
    declared ranges; anything undeclared is pinned at its default.
    """
    requested = dict(requested or {})
    declared = {f.name for f in study.fidelities}
    unknown = set(requested) - declared
    if unknown:
        raise InvalidFidelityError(
            f"fidelities not declared by study {study.study_id!r}: {sorted(unknown)}"
        )
    values: dict[str, Any] = {}
    for spec in study.fidelities:
        v = requested.get(spec.name, spec.default)
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise InvalidFidelityError(f"{spec.name} must be a number, got {v!r}")
        if not (spec.minimum <= v <= spec.maximum):
            raise InvalidFidelityError(
                f"{spec.name}={v} outside [{spec.minimum}, {spec.maximum}]"
            )
        if spec.name in ("iterations", "repeats"):
            v = int(v)
        values[spec.name] = v
    return FidelitySettings.from_dict(values)


def _parse_parameter(doc: Mapping[str, Any]) -> ParameterDef:
    kind = doc.get("kind")
    try:
        if kind == "permutation":
            return ParameterDef(name=doc["name"], kind=kind, size=int(doc["size"]))
        return ParameterDef(name=doc["name"], kind=kind, values=tuple(doc["values"]))
    except KeyError as exc:
        raise StudyFormatError(f"parameter {doc!r} is missing {exc}") from exc


def _require(doc: Mapping[str, Any], key: str, where: str):
    if key not in doc:
        raise StudyFormatError(f"{where} is missing required field {key!r}")
    return doc[key]


def from_document(doc: Mapping[str, Any]) -> StudyDefinition:
    if not isinstance(doc, Mapping):
        raise StudyFormatError(f"study document must be an object, got {type(doc).__name__}")
    version = doc.get("schema_version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise StudyFormatError(f"unsupported schema_version {version!r}")
    study_id = _require(doc, "study_id", "study document")
    space_doc = _require(doc, "search_space", f"study {study_id!r}")

    try:
        params = tuple(_parse_parameter(p) for p in _require(space_doc, "parameters", "search_space"))
        constraints = tuple(
            Constraint(text) for text in space_doc.get("known_constraints", [])
        )
        space = SearchSpace(parameters=params, known_constraints=constraints)
    except (MalformedSpaceError, ConstraintError) as exc:
        raise StudyFormatError(f"study {study_id!r}: {exc}") from exc

    objectives = tuple(
        ObjectiveSpec(
            name=_require(o, "name", "objective"),
            unit=o.get("unit", ""),
            direction=o.get("direction", "minimize"),
        )
        for o in _require(doc, "objectives", f"study {study_id!r}")
    )
    if not objectives:
        raise StudyFormatError(f"study {study_id!r} declares no objectives")
    names = [o.name for o in objectives]
    if len(set(names)) != len(names):
        raise StudyFormatError(f"study {study_id!r} has duplicate objective names")
    for o in objectives:
        if o.direction != "minimize":
            raise StudyFormatError(
                f"study {study_id!r}: objective {o.name!r} must be minimized"
            )
        if o.name not in OBJECTIVE_NAMES:
            raise StudyFormatError(
                f"study {study_id!r}: unknown objective {o.name!r}"
            )

    fidelities = tuple(
        FidelitySpec(
            name=_require(f, "name", "fidelity"),
            minimum=f.get("minimum", 1),
            maximum=_require(f, "maximum", "fidelity"),
            default=_require(f, "default", "fidelity"),
        )
        for f in doc.get("fidelities", [])
    )
    for f in fidelities:
        if f.name not in FIDELITY_NAMES:
            raise StudyFormatError(f"study {study_id!r}: unknown fidelity {f.name!r}")
        if not (f.minimum <= f.default <= f.maximum):
            raise StudyFormatError(
                f"study {study_id!r}: fidelity {f.name!r} default outside its range"
            )
    fnames = [f.name for f in fidelities]
    if len(set(fnames)) != len(fnames):
        raise StudyFormatError(f"study {study_id!r} has duplicate fidelity names")

    backend = doc.get("backend", "kernel")
    if backend not in BACKENDS:
        raise StudyFormatError(f"study {study_id!r}: unknown backend {backend!r}")

    # Metadata is descriptive: reference studies carry figures published for
    # the original hardware verbatim, which need not equal what the document
    # itself declares (the locally buildable study generator does keep them
    # equal for native studies).
    meta_doc = _require(doc, "metadata", f"study {study_id!r}")
    metadata = StudyMetadata(
        num_objectives=int(meta_doc["num_objectives"]),
        dimensions=int(meta_doc["dimensions"]),
        num_fidelities=int(meta_doc["num_fidelities"]),
        space_size=int(meta_doc["space_size"]),
        known_valid=int(meta_doc["known_valid"]),
        valid_ratio=float(meta_doc["valid_ratio"]),
        parameter_kinds=meta_doc.get("parameter_kinds", ""),
        constraint_kinds=meta_doc.get("constraint_kinds", ""),
    )
    if metadata.num_objectives < 1:
        raise StudyFormatError(f"study {study_id!r}: num_objectives must be >= 1")
    if metadata.num_fidelities < 0:
        raise StudyFormatError(f"study {study_id!r}: num_fidelities must be >= 0")

    problem = None
    if "problem" in doc and doc["problem"] is not None:
        p = doc["problem"]
        problem = ProblemSpec(
            kernel=_require(p, "kernel", "problem"),
            presets={k: dict(v) for k, v in _require(p, "presets", "problem").items()},
            default_preset=_require(p, "default_preset", "problem"),
            seed=int(p.get("seed", 0)),
            density=p.get("density"),
            scratch_budget_bytes=int(p.get("scratch_budget_bytes", 262144)),
            model_cache_bytes=int(p.get("model_cache_bytes", 1048576)),
            llc_bytes=int(p.get("llc_bytes", 4194304)),
            declared_cores=int(p.get("declared_cores", 4)),
            oversub_factor=int(p.get("oversub_factor", 2)),
        )
        if problem.default_preset not in problem.presets:
            raise StudyFormatError(
                f"study {study_id!r}: default_preset {problem.default_preset!r} not in presets"
            )
    if backend == "kernel" and problem is None:
        raise StudyFormatError(f"study {study_id!r}: kernel backend needs a problem block")

    return StudyDefinition(
        study_id=study_id,
        benchmark=_require(doc, "benchmark", f"study {study_id!r}"),
        hardware_label=doc.get("hardware_label", ""),
        backend=backend,
        space=space,
        objectives=objectives,
        fidelities=fidelities,
        metadata=metadata,
        problem=problem,
        notes=doc.get("notes", ""),
        document=_normalize_document(doc),
    )


def _normalize_document(doc: Mapping[str, Any]) -> dict:
    return json.loads(json.dumps(doc))


def to_document(study: StudyDefinition) -> dict:
    """The study's document form. Round-trips through from_document."""
    if study.document:
        return study.document
    params = []
    for p in study.space.parameters:
        if p.kind == "permutation":
            params.append({"name": p.name, "kind": p.kind, "size": p.size})
        else:
            params.append({"name": p.name, "kind": p.kind, "values": list(p.values)})
    doc: dict[str, Any] = {
        "schema_version": SCHEMA_VERSION,
        "study_id": study.study_id,
        "benchmark": study.benchmark,
        "hardware_label": study.hardware_label,
        "backend": study.backend,
        "search_space": {
            "parameters": params,
            "known_constraints": [c.text for c in study.space.known_constraints],
        },
        "objectives": [
            {"name": o.name, "unit": o.unit, "direction": o.direction}
            for o in study.objectives
        ],
        "fidelities": [
            {"name": f.name, "minimum": f.minimum, "maximum": f.maximum, "default": f.default}
            for f in study.fidelities
        ],
        "metadata": {
            "num_objectives": study.metadata.num_objectives,
            "dimensions": study.metadata.dimensions,
            "num_fidelities": study.metadata.num_fidelities,
            "space_size": study.metadata.space_size,
            "known_valid": study.metadata.known_valid,
            "valid_ratio": study.metadata.valid_ratio,
            "parameter_kinds": study.metadata.parameter_kinds,
            "constraint_kinds": study.metadata.constraint_kinds,
        },
        "notes": study.notes,
    }
    if study.problem is not None:
        p = study.problem
        doc["problem"] = {
            "kernel": p.kernel,
            "presets": p.presets,
            "default_preset": p.default_preset,
            "seed": p.seed,
            "density": p.density,
            "scratch_budget_bytes": p.scratch_budget_bytes,
            "model_cache_bytes": p.model_cache_bytes,
            "llc_bytes": p.llc_bytes,
            "declared_cores": p.declared_cores,
            "oversub_factor": p.oversub_factor,
        }
    return doc


def load_study(path: str | os.PathLike) -> StudyDefinition:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise StudyFormatError(f"{path}: not JSON: {exc}") from exc
    return from_document(doc)


def _data_dir():
    return resources.files("tunebench") / "data" / "studies"


def bundled_study_ids() -> list[str]:
    out = []
    for entry in _data_dir().iterdir():
        if entry.name.endswith(".json"):
            out.append(entry.name[: -len(".json")])
    return sorted(out)


def load_bundled(study_id: str) -> StudyDefinition:
    path = _data_dir() / f"{study_id}.json"
    try:
        text = path.read_text(encoding="utf-8")
    except FileNotFoundError:
        raise StudyFormatError(
            f"no bundled study {study_id!r}; available: {bundled_study_ids()}"
        ) from None
    return from_document(json.loads(text))
