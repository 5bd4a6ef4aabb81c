from .problems import (
    KERNELS,
    KernelProblem,
    MalformedProblemError,
    compute_reference,
    generate_problem,
    problem_for_study,
)
from .traffic import traffic_model
from .tuned import (
    HiddenInfeasible,
    execute,
    hidden_infeasibility,
    list_default_config,
    scratch_bytes,
)

__all__ = [
    "KERNELS",
    "KernelProblem",
    "MalformedProblemError",
    "HiddenInfeasible",
    "compute_reference",
    "generate_problem",
    "problem_for_study",
    "traffic_model",
    "execute",
    "hidden_infeasibility",
    "list_default_config",
    "scratch_bytes",
]
