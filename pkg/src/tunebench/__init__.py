"""tunebench: a self-contained autotuning benchmark suite.

Mixed ordinal / categorical / permutation search spaces over real compiled
kernels, evaluated behind a small framed-JSON client-server protocol, with
surrogate replay, baseline optimizers, and an analysis toolkit.
"""

import os as _os

# The portable threading layer; keeps one less moving part across machines.
# Set before numba is first imported; an explicit user choice wins.
_os.environ.setdefault("NUMBA_THREADING_LAYER", "workqueue")

from .constraints import Constraint, ConstraintError, parse_constraint
from .records import (
    EvaluationRecord,
    FidelitySettings,
    InvalidConfigError,
    InvalidFidelityError,
    LogFormatError,
    QueryResult,
    append_records,
    group_runs,
    read_records,
)
from .space import (
    ConfigDomainError,
    MalformedSpaceError,
    ParameterDef,
    SamplingBudgetError,
    SearchSpace,
    SpaceTooLargeError,
    ValidationResult,
)
from .studies import (
    FidelitySpec,
    ObjectiveSpec,
    ProblemSpec,
    StudyDefinition,
    StudyFormatError,
    StudyMetadata,
    bundled_study_ids,
    from_document,
    load_bundled,
    load_study,
    resolve_fidelities,
    to_document,
)

__version__ = "0.1.0"

__all__ = [
    "Constraint",
    "ConstraintError",
    "parse_constraint",
    "ParameterDef",
    "SearchSpace",
    "ValidationResult",
    "ConfigDomainError",
    "MalformedSpaceError",
    "SamplingBudgetError",
    "SpaceTooLargeError",
    "FidelitySettings",
    "QueryResult",
    "EvaluationRecord",
    "InvalidConfigError",
    "InvalidFidelityError",
    "LogFormatError",
    "append_records",
    "read_records",
    "group_runs",
    "ObjectiveSpec",
    "FidelitySpec",
    "ProblemSpec",
    "StudyMetadata",
    "StudyDefinition",
    "StudyFormatError",
    "from_document",
    "to_document",
    "load_study",
    "load_bundled",
    "bundled_study_ids",
    "resolve_fidelities",
    "__version__",
]
