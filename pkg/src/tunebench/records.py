"""Evaluation records: fidelity settings, query results, JSONL logs."""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field, replace
from importlib import resources
from typing import Any, Iterable, Mapping

__all__ = [
    "FIDELITY_NAMES",
    "FidelitySettings",
    "QueryResult",
    "EvaluationRecord",
    "InvalidFidelityError",
    "InvalidConfigError",
    "LogFormatError",
    "canonical_json",
    "append_records",
    "records_from_lines",
    "read_records",
    "bundled_log_ids",
    "load_bundled_log",
    "group_runs",
]

# The recognized fidelity controls and their baseline defaults. A study may
# declare a subset; undeclared ones are pinned at these values.
FIDELITY_NAMES = ("iterations", "repeats", "wait_between_repeats", "wait_after_evaluation")
_BASE_DEFAULTS = {
    "iterations": 10,
    "repeats": 3,
    "wait_between_repeats": 0.0,
    "wait_after_evaluation": 0.0,
}


class InvalidFidelityError(ValueError):
    """A fidelity request is undeclared or outside its declared range."""


class InvalidConfigError(ValueError):
    """A query was rejected before execution: domain or known-constraint
    failure, or a bad fidelity request. Distinct from hidden infeasibility,
    which is a well-formed result."""


class LogFormatError(ValueError):
    """A log line is not a well-formed evaluation record."""


def canonical_json(obj: Any) -> str:
    """Deterministic JSON text: sorted keys, no whitespace."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


@dataclass(frozen=True)
class FidelitySettings:
    """Concrete evaluation effort knobs.

    iterations: kernel runs timed together per repeat.
    repeats: cache-clearing re-runs; the reported time is their median.
    waits are milliseconds of idle time between repeats / after the
    evaluation.
    """

    iterations: int = 10
    repeats: int = 3
    wait_between_repeats: float = 0.0
    wait_after_evaluation: float = 0.0

    def __post_init__(self):
        for name in ("iterations", "repeats"):
            v = getattr(self, name)
            if isinstance(v, bool) or not isinstance(v, int) or v < 1:
                raise InvalidFidelityError(f"{name} must be a positive int, got {v!r}")
        for name in ("wait_between_repeats", "wait_after_evaluation"):
            v = getattr(self, name)
            if isinstance(v, bool) or not isinstance(v, (int, float)) or v < 0:
                raise InvalidFidelityError(f"{name} must be a non-negative number, got {v!r}")

    def to_dict(self) -> dict[str, Any]:
        return {
            "iterations": self.iterations,
            "repeats": self.repeats,
            "wait_between_repeats": float(self.wait_between_repeats),
            "wait_after_evaluation": float(self.wait_after_evaluation),
        }

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "FidelitySettings":
        unknown = set(d) - set(FIDELITY_NAMES)
        if unknown:
            raise InvalidFidelityError(f"unknown fidelity names: {sorted(unknown)}")
        merged = dict(_BASE_DEFAULTS)
        merged.update(d)
        return cls(**merged)


@dataclass(frozen=True)
class QueryResult:
    """What one evaluation reports back."""

    objectives: dict[str, float]
    feasible: bool
    infeasibility_reason: str | None = None
    evaluation_id: str = ""
    raw_timings: tuple[float, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "raw_timings", tuple(self.raw_timings))
        if self.feasible and self.infeasibility_reason is not None:
            raise ValueError("feasible results must not carry an infeasibility reason")
        if not self.feasible and not self.infeasibility_reason:
            raise ValueError("infeasible results must carry a reason")

    def to_dict(self) -> dict[str, Any]:
        return {
            "objectives": {k: float(v) for k, v in sorted(self.objectives.items())},
            "feasible": self.feasible,
            "infeasibility_reason": self.infeasibility_reason,
            "evaluation_id": self.evaluation_id,
            "raw_timings": [float(t) for t in self.raw_timings],
        }

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "QueryResult":
        return cls(
            objectives={k: float(v) for k, v in d["objectives"].items()},
            feasible=bool(d["feasible"]),
            infeasibility_reason=d.get("infeasibility_reason"),
            evaluation_id=d.get("evaluation_id", ""),
            raw_timings=tuple(d.get("raw_timings", ())),
        )


def _canonical_config(config: Mapping[str, Any]) -> dict[str, Any]:
    out = {}
    for k, v in config.items():
        out[k] = tuple(v) if isinstance(v, list) else v
    return out


@dataclass(frozen=True)
class EvaluationRecord:
    """One log line: who asked what, and what came back."""

    study_id: str
    server: str
    optimizer: str
    seed: int
    iteration: int
    timestamp: float
    configuration: dict[str, Any]
    fidelities: FidelitySettings
    result: QueryResult

    def __post_init__(self):
        object.__setattr__(self, "configuration", _canonical_config(self.configuration))
        if self.iteration < 0:
            raise ValueError(f"iteration must be >= 0, got {self.iteration}")

    def to_dict(self) -> dict[str, Any]:
        config = {
            k: (list(v) if isinstance(v, tuple) else v)
            for k, v in self.configuration.items()
        }
        return {
            "study_id": self.study_id,
            "server": self.server,
            "optimizer": self.optimizer,
            "seed": self.seed,
            "iteration": self.iteration,
            "timestamp": self.timestamp,
            "configuration": config,
            "fidelities": self.fidelities.to_dict(),
            "result": self.result.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "EvaluationRecord":
        try:
            return cls(
                study_id=d["study_id"],
                server=d["server"],
                optimizer=d["optimizer"],
                seed=int(d["seed"]),
                iteration=int(d["iteration"]),
                timestamp=float(d["timestamp"]),
                configuration=d["configuration"],
                fidelities=FidelitySettings.from_dict(d["fidelities"]),
                result=QueryResult.from_dict(d["result"]),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise LogFormatError(f"bad evaluation record: {exc}") from exc


def append_records(path: str | os.PathLike, records: Iterable[EvaluationRecord]) -> int:
    """Append records as JSONL. Returns how many were written."""
    n = 0
    with open(path, "a", encoding="utf-8") as fh:
        for rec in records:
            fh.write(canonical_json(rec.to_dict()))
            fh.write("\n")
            n += 1
    return n


def records_from_lines(
    lines: Iterable[str], *, dedupe: bool = True, where: str = "<lines>"
) -> list[EvaluationRecord]:
    """Parse JSONL log lines.

    With dedupe (the default), when several records share an
    (optimizer, seed, iteration) key the last one wins, so a re-run of a
    partial run replaces it on read.
    """
    records: list[EvaluationRecord] = []
    for lineno, line in enumerate(lines, start=1):
        line = line.strip()
        if not line:
            continue
        try:
            doc = json.loads(line)
        except json.JSONDecodeError as exc:
            raise LogFormatError(f"{where}:{lineno}: not JSON: {exc}") from exc
        records.append(EvaluationRecord.from_dict(doc))
    if not dedupe:
        return records
    seen: dict[tuple, int] = {}
    out: list[EvaluationRecord | None] = []
    for rec in records:
        key = (rec.optimizer, rec.seed, rec.iteration)
        if key in seen:
            out[seen[key]] = None
        seen[key] = len(out)
        out.append(rec)
    return [r for r in out if r is not None]


def read_records(path: str | os.PathLike, *, dedupe: bool = True) -> list[EvaluationRecord]:
    """Read a JSONL log file; see records_from_lines for dedupe semantics."""
    with open(path, "r", encoding="utf-8") as fh:
        return records_from_lines(fh, dedupe=dedupe, where=str(path))


def bundled_log_ids() -> list[str]:
    """Study ids with a packaged evaluation log."""
    root = resources.files("tunebench") / "data" / "logs"
    if not root.is_dir():
        return []
    return sorted(
        entry.name[: -len(".jsonl")]
        for entry in root.iterdir()
        if entry.name.endswith(".jsonl")
    )


def load_bundled_log(study_id: str) -> list[EvaluationRecord]:
    """Records of the packaged log for one study."""
    entry = resources.files("tunebench") / "data" / "logs" / f"{study_id}.jsonl"
    if not entry.is_file():
        raise FileNotFoundError(
            f"no bundled log for {study_id!r}; available: {bundled_log_ids()}"
        )
    return records_from_lines(
        entry.read_text(encoding="utf-8").splitlines(), where=f"bundled:{study_id}"
    )


def group_runs(
    records: Iterable[EvaluationRecord], *, check_contiguous: bool = True
) -> dict[tuple[str, int], list[EvaluationRecord]]:
    """Group by (optimizer, seed) and sort each run by iteration."""
    runs: dict[tuple[str, int], list[EvaluationRecord]] = {}
    for rec in records:
        runs.setdefault((rec.optimizer, rec.seed), []).append(rec)
    for key, run in runs.items():
        run.sort(key=lambda r: r.iteration)
        if check_contiguous:
            got = [r.iteration for r in run]
            if got != list(range(len(run))):
                raise LogFormatError(
                    f"run {key} has non-contiguous iterations: {got[:8]}..."
                )
    return runs
