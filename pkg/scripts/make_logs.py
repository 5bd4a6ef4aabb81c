"""Generate the bundled evaluation logs by running the CLI end to end.

Two native studies get a packaged log: gemm-cpu (two objectives, 4 seeds x
500 random evaluations) and asum-cpu (one objective, 3 seeds x 500). Both
run at reduced fidelity (iterations=4, repeats=7) to keep generation quick
while leaving enough signal for the surrogate checks below.

Run from the repository root:

    python3 scripts/make_logs.py
"""

from __future__ import annotations

import os
import sys
import time

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from tunebench.cli import main as cli_main
from tunebench.records import read_records
from tunebench.studies import load_bundled
from tunebench.surrogate import fit, r2_score

LOG_DIR = os.path.join(os.path.dirname(__file__), "..", "src", "tunebench", "data", "logs")

RUNS = [
    ("gemm-cpu", "0,1,2,3", 500),
    ("asum-cpu", "0,1,2", 500),
]


def main() -> int:
    only = set(sys.argv[1:])
    os.makedirs(LOG_DIR, exist_ok=True)
    for study_id, seeds, budget in RUNS:
        if only and study_id not in only:
            continue
        path = os.path.join(LOG_DIR, f"{study_id}.jsonl")
        if os.path.exists(path):
            os.remove(path)
        t0 = time.time()
        rc = cli_main([
            "run",
            "--benchmark", study_id,
            "--optimizer", "random_search",
            "--budget", str(budget),
            "--seeds", seeds,
            "--log", path,
            "--iterations", "4",
            "--repeats", "7",
        ])
        if rc != 0:
            print(f"run failed for {study_id} (exit {rc})", file=sys.stderr)
            return rc
        records = read_records(path)
        feasible = sum(1 for r in records if r.result.feasible)
        print(f"{study_id}: {len(records)} records ({feasible} feasible) "
              f"in {time.time() - t0:.1f}s")

    # The packaged gemm log also backs the surrogate quality checks, so make
    # sure a model fitted on three seeds explains the held-out fourth.
    study = load_bundled("gemm-cpu")
    records = read_records(os.path.join(LOG_DIR, "gemm-cpu.jsonl"))
    train = [r for r in records if r.seed < 3]
    holdout = [r for r in records if r.seed == 3]
    model = fit(study.space, train, study.objective_names, seed=0)
    ok = True
    for name in study.objective_names:
        score = r2_score(model, holdout, name)
        print(f"gemm-cpu holdout r2 [{name}] = {score:.4f}")
        if score < 0.8:
            ok = False
    if not ok:
        print("holdout r2 below 0.8; the packaged log is too noisy", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
