"""Command line interface.

Subcommands: serve a benchmark over the wire protocol, run an optimizer
campaign into a JSONL log, analyze a log into tabular reports plus
figures, and fit or score surrogates from logged data.
"""

from __future__ import annotations

import argparse
import os
import statistics
import sys
import time
from dataclasses import dataclass
from typing import Any, Mapping, Sequence

from . import figures
from .metrics import (
    AnalysisError,
    default_reference,
    hypervolume_trajectory,
    incumbent_trajectory,
    objective_points,
    pareto_indices,
    permutation_importance,
    speedup_distribution,
    trajectory_aggregate,
)
from .optimize import OPTIMIZERS, model_based, nsga2, random_search
from .records import (
    EvaluationRecord,
    InvalidConfigError,
    InvalidFidelityError,
    LogFormatError,
    append_records,
    group_runs,
    load_bundled_log,
    bundled_log_ids,
    read_records,
)
from .service import (
    BenchServer,
    KernelBackend,
    RoundRobinDispatcher,
    ServiceError,
    TransportError,
    parse_address,
)
from .space import ConfigDomainError
from .studies import (
    StudyDefinition,
    StudyFormatError,
    bundled_study_ids,
    load_bundled,
    load_study,
    resolve_fidelities,
)
from .surrogate import (
    InsufficientDataError,
    SurrogateBackend,
    UndefinedScoreError,
    fit,
    r2_score,
)

__all__ = ["main", "RunManifest", "SERVER_ENV"]

# Comma-separated default server addresses for `run` when --servers is absent.
SERVER_ENV = "TUNEBENCH_SERVERS"


class CommandError(Exception):
    """Fatal condition with a user-facing diagnostic; exit code 1."""


class UsageError(Exception):
    """Bad flag combination; exit code 2, like an argparse rejection."""


# ---------------------------------------------------------------------------
# study resolution


def _study_from_args(args) -> StudyDefinition:
    if getattr(args, "study", None):
        if not os.path.exists(args.study):
            raise CommandError(f"study file not found: {args.study}")
        return load_study(args.study)
    name = getattr(args, "benchmark", None)
    if not name:
        raise UsageError("one of --study or --benchmark is required")
    return _resolve_benchmark(
        name, getattr(args, "backend", None), getattr(args, "surrogate_log", None)
    )


def _resolve_benchmark(
    name: str, backend: str | None, surrogate_log: str | None
) -> StudyDefinition:
    """Map a benchmark name to one bundled study.

    An exact study-id match wins. Otherwise candidates share the benchmark
    field and are narrowed to those a requested backend can actually serve:
    kernel needs a native problem block, surrogate without an explicit log
    file needs a bundled log. Anything still ambiguous is an error; the
    study id always disambiguates.
    """
    ids = bundled_study_ids()
    if name in ids:
        return load_bundled(name)
    logs = set(bundled_log_ids())
    cands = [load_bundled(sid) for sid in ids]
    cands = [s for s in cands if s.benchmark == name]
    if not cands:
        raise CommandError(f"no bundled study for {name!r}; available ids: {ids}")
    if backend == "kernel":
        cands = [s for s in cands if s.problem is not None]
    elif backend == "surrogate" and surrogate_log in (None, "bundled"):
        cands = [s for s in cands if s.study_id in logs]
    elif backend is None:
        with_problem = [s for s in cands if s.problem is not None]
        with_log = [s for s in cands if s.study_id in logs]
        cands = with_problem or with_log or cands
    if not cands:
        raise CommandError(
            f"no bundled study for {name!r} usable with backend {backend!r}"
        )
    if len(cands) > 1:
        raise CommandError(
            f"benchmark {name!r} is ambiguous: {[s.study_id for s in cands]}; "
            "pass a study id instead"
        )
    return cands[0]


def _build_backend(study: StudyDefinition, backend: str | None,
                   surrogate_log: str | None, seed: int, preset: str | None):
    if backend is None:
        backend = "kernel" if study.problem is not None else "surrogate"
    if backend == "kernel":
        if study.problem is None:
            raise CommandError(
                f"{study.study_id} has no native problem block; use --backend surrogate"
            )
        return KernelBackend(study, preset)
    if not surrogate_log:
        raise UsageError(
            "--backend surrogate requires --surrogate-log (a log file, or 'bundled')"
        )
    if surrogate_log == "bundled":
        try:
            records = load_bundled_log(study.study_id)
        except FileNotFoundError as exc:
            raise CommandError(str(exc)) from None
    else:
        if not os.path.exists(surrogate_log):
            raise CommandError(f"surrogate log not found: {surrogate_log}")
        records = read_records(surrogate_log)
    return SurrogateBackend(study, records, seed=seed)


# ---------------------------------------------------------------------------
# serve


def cmd_serve(args) -> int:
    if args.backend == "surrogate" and not args.surrogate_log:
        raise UsageError(
            "--backend surrogate requires --surrogate-log (a log file, or 'bundled')"
        )
    study = _study_from_args(args)
    backend = _build_backend(study, args.backend, args.surrogate_log,
                             args.seed, args.preset)
    host, port = parse_address(args.bind)
    server = BenchServer(backend, host, port)
    try:
        server.start()
    except OSError as exc:
        raise CommandError(f"cannot bind {args.bind}: {exc}") from None
    # announce the bound address first thing so spawners can parse it
    print(f"serving {study.study_id} on {server.label}", flush=True)
    server.serve_forever()
    return 0


# ---------------------------------------------------------------------------
# run


@dataclass(frozen=True)
class RunManifest:
    """Everything one optimizer campaign needs, checked before any query."""

    optimizer: str
    budget: int
    seeds: tuple[int, ...]
    log_path: str
    fidelities: dict
    servers: tuple[str, ...] = ()
    study_path: str | None = None
    benchmark: str | None = None
    backend: str | None = None
    surrogate_log: str | None = None
    hyperparameters: dict | None = None

    def validate(self) -> None:
        if self.optimizer not in OPTIMIZERS:
            raise UsageError(
                f"unknown optimizer {self.optimizer!r}; choose from {sorted(OPTIMIZERS)}"
            )
        if self.budget < 1:
            raise UsageError(f"budget must be >= 1, got {self.budget}")
        if not self.seeds:
            raise UsageError("at least one seed is required")
        if len(set(self.seeds)) != len(self.seeds):
            raise UsageError(f"seeds must be distinct, got {list(self.seeds)}")
        if not self.servers and not (self.study_path or self.benchmark):
            raise UsageError("give --servers (or set TUNEBENCH_SERVERS), or a study")
        if self.study_path and not os.path.exists(self.study_path):
            raise CommandError(f"study file not found: {self.study_path}")
        if (
            self.surrogate_log
            and self.surrogate_log != "bundled"
            and not os.path.exists(self.surrogate_log)
        ):
            raise CommandError(f"surrogate log not found: {self.surrogate_log}")


def _parse_seeds(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(s) for s in text.split(",") if s.strip() != "")
    except ValueError:
        raise UsageError(f"--seeds wants a comma-separated integer list, got {text!r}")


def _fidelity_overrides(args) -> dict:
    out = {}
    for flag, name in (
        ("iterations", "iterations"),
        ("repeats", "repeats"),
        ("wait_between_repeats", "wait_between_repeats"),
        ("wait_after_evaluation", "wait_after_evaluation"),
    ):
        v = getattr(args, flag)
        if v is not None:
            out[name] = v
    return out


def _completed_counts(log_path: str) -> dict[tuple[str, int], int]:
    if not os.path.exists(log_path):
        return {}
    counts: dict[tuple[str, int], int] = {}
    for rec in read_records(log_path):
        key = (rec.optimizer, rec.seed)
        counts[key] = counts.get(key, 0) + 1
    return counts


def _drive(optimizer: str, study, evaluate, budget: int, seed: int, hyper: Mapping):
    if optimizer == "random_search":
        random_search(study, evaluate, budget, seed)
    elif optimizer == "nsga2":
        nsga2(study, evaluate, budget, population=hyper["population"], seed=seed)
    else:
        model_based(study, evaluate, budget, seed,
                    initial=hyper["initial"], pool_size=hyper["pool_size"])


def cmd_run(args) -> int:
    servers = tuple(
        s for s in (args.servers or os.environ.get(SERVER_ENV, "")).split(",") if s
    )
    manifest = RunManifest(
        optimizer=args.optimizer,
        budget=args.budget,
        seeds=_parse_seeds(args.seeds),
        log_path=args.log,
        fidelities=_fidelity_overrides(args),
        servers=servers,
        study_path=args.study,
        benchmark=args.benchmark,
        backend=args.backend,
        surrogate_log=args.surrogate_log,
        hyperparameters={
            "population": args.population,
            "initial": args.initial,
            "pool_size": args.pool_size,
        },
    )
    manifest.validate()

    counts = _completed_counts(manifest.log_path)
    todo = []
    for s in manifest.seeds:
        have = counts.get((manifest.optimizer, s), 0)
        if have >= manifest.budget:
            print(f"skip ({manifest.optimizer}, {s}): {have} records already logged")
        else:
            todo.append(s)
    if not todo:
        print("nothing to do: every (optimizer, seed) pair is complete")
        return 0

    dispatcher = None
    try:
        if manifest.servers:
            dispatcher = RoundRobinDispatcher(manifest.servers, args.timeout).connect()
            study = dispatcher.study
            if manifest.study_path or manifest.benchmark:
                local = _study_from_args(args)
                if local.study_id != study.study_id:
                    raise CommandError(
                        f"servers serve {study.study_id!r} but the manifest names "
                        f"{local.study_id!r}"
                    )
        else:
            study = _study_from_args(args)
            backend = _build_backend(study, manifest.backend, manifest.surrogate_log,
                                     args.seed, args.preset)
            backend.initialize()

        # range-checks the requested fidelities against the study up front
        resolved = resolve_fidelities(study, manifest.fidelities or None)
        overrides = manifest.fidelities or None
        eval_no = 0

        def query(cfg) -> tuple[str, Any]:
            nonlocal eval_no
            eval_no += 1
            if dispatcher is not None:
                return dispatcher.query(cfg, overrides)
            return "local", backend.evaluate(cfg, resolved, evaluation_id=f"q{eval_no}")

        for s in todo:
            iteration = 0

            def evaluate(cfg):
                nonlocal iteration
                label, result = query(cfg)
                rec = EvaluationRecord(
                    study_id=study.study_id,
                    server=label,
                    optimizer=manifest.optimizer,
                    seed=s,
                    iteration=iteration,
                    timestamp=time.time(),
                    configuration=dict(cfg),
                    fidelities=resolved,
                    result=result,
                )
                append_records(manifest.log_path, [rec])
                iteration += 1
                return result

            _drive(manifest.optimizer, study, evaluate, manifest.budget, s,
                   manifest.hyperparameters)
            print(f"({manifest.optimizer}, {s}): {iteration} evaluations "
                  f"-> {manifest.log_path}")
    finally:
        if dispatcher is not None:
            dispatcher.close()
    return 0


# ---------------------------------------------------------------------------
# analyze


def _read_log(path: str) -> list[EvaluationRecord]:
    if not os.path.exists(path):
        raise CommandError(f"log file not found: {path}")
    records = read_records(path)
    if not records:
        raise CommandError(f"no records in {path}")
    return records


def _optional_study(args) -> StudyDefinition | None:
    if getattr(args, "study", None) or getattr(args, "benchmark", None):
        return _study_from_args(args)
    return None


def _objective_names(
    study: StudyDefinition | None, records: Sequence[EvaluationRecord]
) -> tuple[str, ...]:
    if study is not None:
        return study.objective_names
    for r in records:
        if r.result.feasible:
            return tuple(sorted(r.result.objectives))
    raise CommandError("no feasible records to take objective names from")


def _cell(v) -> str:
    if v is None:
        return "nan"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _write_table(path: str, header: Sequence[str], rows, comments: Sequence[str] = ()):
    """One header line, '#' metadata lines, then tab-separated rows."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\t".join(header) + "\n")
        for c in comments:
            fh.write(f"# {c}\n")
        for row in rows:
            fh.write("\t".join(_cell(v) for v in row) + "\n")
    print(f"wrote {path}")


def _aggregate_runs(trajectories: list[list]) -> tuple[list, list, list]:
    n = min(len(t) for t in trajectories)
    cut = [t[:n] for t in trajectories]
    if len(cut) == 1:
        only = cut[0]
        return only, list(only), list(only)
    return trajectory_aggregate(cut)


def _per_optimizer_runs(records) -> dict[str, list[list[EvaluationRecord]]]:
    runs = group_runs(records, check_contiguous=False)
    per_opt: dict[str, list[list[EvaluationRecord]]] = {}
    for (opt, seed) in sorted(runs):
        per_opt.setdefault(opt, []).append(runs[(opt, seed)])
    return per_opt


def _an_trajectory(args, records, out_dir: str) -> None:
    objective = args.objective
    series: dict[str, tuple[list, list, list]] = {}
    for opt, runs in _per_optimizer_runs(records).items():
        trajs = []
        for run in runs:
            try:
                trajs.append(incumbent_trajectory(run, objective))
            except AnalysisError as exc:
                print(f"warning: ({opt}, seed {run[0].seed}): {exc}", file=sys.stderr)
        if trajs:
            series[opt] = _aggregate_runs(trajs)
    if not series:
        raise CommandError(f"no run has a feasible {objective!r} value")
    rows = []
    for opt, (mean, lo, hi) in series.items():
        for i in range(len(mean)):
            rows.append((opt, i + 1, mean[i], lo[i], hi[i]))
    table = os.path.join(out_dir, "trajectory.tsv")
    _write_table(table, ("optimizer", "iteration", "mean", "lo", "hi"), rows,
                 [f"objective = {objective}"])
    png = os.path.join(out_dir, "trajectory.png")
    figures.render_trajectory(png, series, ylabel=f"best {objective}")
    print(f"wrote {png}")


def _an_hypervolume(args, records, out_dir: str) -> None:
    study = _optional_study(args)
    names = _objective_names(study, records)
    if len(names) != 2:
        raise CommandError(
            f"hypervolume reports need exactly 2 objectives, got {list(names)}"
        )
    points, _ = objective_points(records, names)
    if not points:
        raise CommandError("no feasible records carry both objectives")
    if args.ref:
        try:
            ref = tuple(float(x) for x in args.ref.split(","))
        except ValueError:
            raise UsageError(f"--ref wants two comma-separated numbers, got {args.ref!r}")
        if len(ref) != 2:
            raise UsageError(f"--ref wants two comma-separated numbers, got {args.ref!r}")
        ref_note = "given"
    else:
        ref = default_reference(points)
        ref_note = "max per objective x 1.1"
    series: dict[str, tuple[list, list, list]] = {}
    for opt, runs in _per_optimizer_runs(records).items():
        trajs = [hypervolume_trajectory(run, names, ref) for run in runs]
        series[opt] = _aggregate_runs(trajs)
    rows = []
    for opt, (mean, lo, hi) in series.items():
        for i in range(len(mean)):
            rows.append((opt, i + 1, mean[i], lo[i], hi[i]))
    table = os.path.join(out_dir, "hypervolume.tsv")
    _write_table(
        table,
        ("optimizer", "iteration", "mean", "lo", "hi"),
        rows,
        [
            f"objectives = {' '.join(names)}",
            f"reference = {ref[0]!r} {ref[1]!r} ({ref_note})",
        ],
    )
    png = os.path.join(out_dir, "hypervolume.png")
    figures.render_trajectory(png, series, ylabel="dominated hypervolume")
    print(f"wrote {png}")


def _default_baseline(
    study: StudyDefinition | None, records, objective: str
) -> tuple[float, str]:
    """Median objective of the logged default-configuration evaluations."""
    if study is None or study.problem is None:
        raise CommandError(
            "cannot derive a baseline without a native study; pass --baseline"
        )
    from .kernels import list_default_config

    default = study.space.canonical(list_default_config(study.problem.kernel))
    values = [
        r.result.objectives[objective]
        for r in records
        if r.result.feasible
        and objective in r.result.objectives
        and r.configuration == default
    ]
    if not values:
        raise CommandError(
            "the log never evaluates the default configuration; pass --baseline"
        )
    return statistics.median(values), f"median of {len(values)} default-config records"


def _an_speedup(args, records, out_dir: str) -> None:
    objective = args.objective
    if args.baseline is not None:
        baseline, note = args.baseline, "given"
    else:
        baseline, note = _default_baseline(_optional_study(args), records, objective)
    dist = speedup_distribution(records, baseline, objective, bins=args.bins)
    rows = [
        (dist.log10_edges[i], dist.log10_edges[i + 1], dist.densities[i])
        for i in range(len(dist.densities))
    ]
    table = os.path.join(out_dir, "speedup.tsv")
    _write_table(
        table,
        ("log10_left", "log10_right", "density"),
        rows,
        [
            f"objective = {objective}",
            f"baseline = {baseline!r} ({note})",
            f"median = {dist.median!r}",
            f"maximum = {dist.maximum!r}",
            f"count = {dist.count}",
        ],
    )
    png = os.path.join(out_dir, "speedup.png")
    figures.render_speedup(png, dist)
    print(f"wrote {png}")


def _split_for_fit(records: Sequence[EvaluationRecord]) -> tuple[list, list]:
    """Train/holdout split: the last quarter of the seeds, or of the
    records when only one seed is present."""
    seeds = sorted({r.seed for r in records})
    if len(seeds) >= 2:
        n_hold = max(1, len(seeds) // 4)
        hold = set(seeds[-n_hold:])
        train = [r for r in records if r.seed not in hold]
        holdout = [r for r in records if r.seed in hold]
    else:
        cut = max(1, (len(records) * 3) // 4)
        train, holdout = list(records[:cut]), list(records[cut:])
    return train, holdout


def _an_importance(args, records, out_dir: str) -> None:
    study = _optional_study(args)
    if study is None:
        raise UsageError("importance needs --study or --benchmark for the search space")
    objective = args.objective
    train, holdout = _split_for_fit(records)
    model = fit(study.space, train, objective, args.seed)
    scores = permutation_importance(model, holdout, objective, args.seed,
                                    rounds=args.rounds)
    ranked = sorted(scores.items(), key=lambda kv: (-kv[1], kv[0]))
    table = os.path.join(out_dir, "importance.tsv")
    _write_table(
        table,
        ("parameter", "importance"),
        ranked,
        [
            f"objective = {objective}",
            f"training records = {len(train)}, holdout records = {len(holdout)}",
            f"rounds = {args.rounds}, seed = {args.seed}",
        ],
    )
    png = os.path.join(out_dir, "importance.png")
    figures.render_importance(png, scores)
    print(f"wrote {png}")


def _an_pareto(args, records, out_dir: str) -> None:
    study = _optional_study(args)
    names = _objective_names(study, records)
    points, idx = objective_points(records, names)
    if not points:
        raise CommandError("no feasible records carry every objective")
    front = set(pareto_indices(points))
    rows = []
    for j in front:
        r = records[idx[j]]
        rows.append(
            tuple(r.result.objectives[n] for n in names)
            + (r.optimizer, r.seed, r.iteration)
        )
    rows.sort()
    table = os.path.join(out_dir, "pareto.tsv")
    _write_table(
        table,
        names + ("optimizer", "seed", "iteration"),
        rows,
        [f"evaluated points = {len(points)}", f"front size = {len(front)}"],
    )
    if len(names) == 2:
        png = os.path.join(out_dir, "pareto.png")
        figures.render_pareto(
            png, points, [points[j] for j in front], names
        )
        print(f"wrote {png}")


_ANALYZERS = {
    "trajectory": _an_trajectory,
    "hypervolume": _an_hypervolume,
    "speedup": _an_speedup,
    "importance": _an_importance,
    "pareto": _an_pareto,
}


def cmd_analyze(args) -> int:
    records = _read_log(args.log)
    os.makedirs(args.out, exist_ok=True)
    _ANALYZERS[args.report](args, records, args.out)
    return 0


# ---------------------------------------------------------------------------
# surrogate


def cmd_surrogate(args) -> int:
    study = _study_from_args(args)
    records = _read_log(args.log)
    if args.action == "fit":
        model = fit(study.space, records, study.objective_names, args.seed,
                    mode=args.mode, trees=args.trees, max_depth=args.max_depth,
                    k=args.k)
        print("objective\tn_train\tr2_train")
        for name in study.objective_names:
            score = r2_score(model, records, name)
            print(f"{name}\t{model.n_records}\t{score!r}")
        return 0
    # r2: score on a held-out log, or on a split of the training one
    if args.holdout:
        if not os.path.exists(args.holdout):
            raise CommandError(f"holdout log not found: {args.holdout}")
        train, holdout = records, read_records(args.holdout)
        if not holdout:
            raise CommandError(f"no records in {args.holdout}")
    else:
        train, holdout = _split_for_fit(records)
    names = (args.objective,) if args.objective else study.objective_names
    model = fit(study.space, train, names, args.seed, mode=args.mode,
                trees=args.trees, max_depth=args.max_depth, k=args.k)
    print("objective\tn_train\tn_holdout\tr2")
    for name in names:
        score = r2_score(model, holdout, name)
        print(f"{name}\t{model.n_records}\t{len(holdout)}\t{score!r}")
    return 0


# ---------------------------------------------------------------------------
# parser


def _add_study_flags(p: argparse.ArgumentParser, *, with_backend: bool = True):
    p.add_argument("--study", help="study definition file")
    p.add_argument("--benchmark", help="bundled study id or benchmark name")
    if with_backend:
        p.add_argument("--backend", choices=("kernel", "surrogate"),
                       help="evaluation backend (default: kernel when the study "
                            "has a native problem block)")
        p.add_argument("--surrogate-log",
                       help="evaluation log to fit the surrogate from, or "
                            "'bundled' for the packaged one")
        p.add_argument("--preset", help="problem size preset for native kernels")
        p.add_argument("--seed", type=int, default=0,
                       help="surrogate fitting seed (default 0)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tunebench",
        description="Autotuning benchmark service, optimizers, and log analysis.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("serve", help="serve one benchmark over TCP")
    _add_study_flags(p)
    p.add_argument("--bind", default="127.0.0.1:0", help="host:port (default any port)")
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("run", help="run an optimizer campaign into a JSONL log")
    _add_study_flags(p)
    p.add_argument("--optimizer", required=True, choices=sorted(OPTIMIZERS))
    p.add_argument("--budget", type=int, required=True,
                   help="evaluations per seed, issued queries counted")
    p.add_argument("--seeds", required=True, help="comma-separated seed list")
    p.add_argument("--log", required=True, help="output log, appended to")
    p.add_argument("--servers",
                   help=f"comma-separated host:port list (default ${SERVER_ENV})")
    p.add_argument("--timeout", type=float, default=600.0,
                   help="per-query timeout in seconds (default 600)")
    p.add_argument("--population", type=int, default=20, help="nsga2 population")
    p.add_argument("--initial", type=int, default=10,
                   help="model_based random warmup queries")
    p.add_argument("--pool-size", type=int, default=1000,
                   help="model_based candidate pool size")
    p.add_argument("--iterations", type=int, help="fidelity override")
    p.add_argument("--repeats", type=int, help="fidelity override")
    p.add_argument("--wait-between-repeats", type=float, help="fidelity override, ms")
    p.add_argument("--wait-after-evaluation", type=float, help="fidelity override, ms")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("analyze", help="turn a log into tables and figures")
    rep = p.add_subparsers(dest="report", required=True)
    common = dict(required=True, help="evaluation log (JSONL)")

    q = rep.add_parser("trajectory", help="incumbent objective over evaluations")
    q.add_argument("--log", **common)
    q.add_argument("--out", default=".", help="output directory")
    q.add_argument("--objective", default="runtime_seconds")
    q.set_defaults(func=cmd_analyze)

    q = rep.add_parser("hypervolume", help="dominated hypervolume over evaluations")
    q.add_argument("--log", **common)
    q.add_argument("--out", default=".")
    q.add_argument("--study")
    q.add_argument("--benchmark")
    q.add_argument("--ref", help="reference point, 'x,y' (default max x 1.1)")
    q.set_defaults(func=cmd_analyze)

    q = rep.add_parser("speedup", help="speedup distribution against the default")
    q.add_argument("--log", **common)
    q.add_argument("--out", default=".")
    q.add_argument("--study")
    q.add_argument("--benchmark")
    q.add_argument("--objective", default="runtime_seconds")
    q.add_argument("--baseline", type=float,
                   help="baseline objective value (default: logged default config)")
    q.add_argument("--bins", type=int, default=24)
    q.set_defaults(func=cmd_analyze)

    q = rep.add_parser("importance", help="per-parameter surrogate importance")
    q.add_argument("--log", **common)
    q.add_argument("--out", default=".")
    q.add_argument("--study")
    q.add_argument("--benchmark")
    q.add_argument("--objective", default="runtime_seconds")
    q.add_argument("--seed", type=int, default=0)
    q.add_argument("--rounds", type=int, default=20)
    q.set_defaults(func=cmd_analyze)

    q = rep.add_parser("pareto", help="non-dominated evaluations")
    q.add_argument("--log", **common)
    q.add_argument("--out", default=".")
    q.add_argument("--study")
    q.add_argument("--benchmark")
    q.set_defaults(func=cmd_analyze)

    p = sub.add_parser("surrogate", help="fit or score a surrogate from a log")
    act = p.add_subparsers(dest="action", required=True)
    for name, blurb in (("fit", "fit on a whole log, report training fit"),
                        ("r2", "fit and score on held-out records")):
        q = act.add_parser(name, help=blurb)
        q.add_argument("--study", help="study definition file")
        q.add_argument("--benchmark", help="bundled study id or benchmark name")
        q.add_argument("--log", **common)
        q.add_argument("--mode", choices=("ensemble", "knn"), default="ensemble")
        q.add_argument("--seed", type=int, default=0)
        q.add_argument("--trees", type=int, default=24)
        q.add_argument("--max-depth", type=int, default=12)
        q.add_argument("--k", type=int, default=5)
        if name == "r2":
            q.add_argument("--holdout", help="separate holdout log (default: split)")
            q.add_argument("--objective", help="score one objective only")
        q.set_defaults(func=cmd_surrogate)

    return parser


_EXPECTED = (
    CommandError,
    AnalysisError,
    LogFormatError,
    StudyFormatError,
    ConfigDomainError,
    InvalidFidelityError,
    InvalidConfigError,
    InsufficientDataError,
    UndefinedScoreError,
    ServiceError,
    TransportError,
)


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse already printed the diagnostic
        return int(exc.code or 0)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 2
    except _EXPECTED as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except KeyboardInterrupt:
        return 0


if __name__ == "__main__":
    raise SystemExit(main())
