"""Generate the bundled study definitions.

Native studies (``*-cpu``) run real kernels on this machine; their metadata
is computed here by full enumeration so the shipped numbers are true by
construction. Reference studies (``*-rtxtitan``, ``*-xeone5``) carry
characteristics published for hardware we do not have; their metadata is
recorded verbatim and their search spaces are reconstructions that match
the published dimensionality and parameter kinds, not the original spaces.

Run from the repository root:

    python3 scripts/make_studies.py
"""

from __future__ import annotations

import json
import os
import sys

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from tunebench.kernels import hidden_infeasibility, list_default_config
from tunebench.studies import from_document, to_document

OUT_DIR = os.path.join(os.path.dirname(__file__), "..", "src", "tunebench", "data", "studies")

FULL_FIDELITIES = [
    {"name": "iterations", "minimum": 1, "maximum": 100, "default": 10},
    {"name": "repeats", "minimum": 1, "maximum": 10, "default": 3},
    {"name": "wait_between_repeats", "minimum": 0, "maximum": 1000, "default": 0},
    {"name": "wait_after_evaluation", "minimum": 0, "maximum": 1000, "default": 0},
]
SHORT_FIDELITIES = FULL_FIDELITIES[:2]

RUNTIME = {"name": "runtime_seconds", "unit": "seconds", "direction": "minimize"}
TRAFFIC = {"name": "memory_traffic_bytes", "unit": "bytes", "direction": "minimize"}


def ordinal(name, *values):
    return {"name": name, "kind": "ordinal", "values": list(values)}


def categorical(name, *values):
    return {"name": name, "kind": "categorical", "values": list(values)}


def permutation(name, size):
    return {"name": name, "kind": "permutation", "size": size}


POW2_TILE = (0, 4, 8, 16, 32, 64)
THREADS = (1, 2, 4, 8)
UNROLL = ("false", "true")
SCHEDULES = ("static", "dynamic", "guided")


# ---------------------------------------------------------------------------
# native studies


def native_studies() -> list[dict]:
    out = []

    out.append({
        "study_id": "gemm-cpu",
        "benchmark": "gemm",
        "hardware_label": "generic-cpu",
        "backend": "kernel",
        "search_space": {
            "parameters": [
                ordinal("tile_i", *POW2_TILE),
                ordinal("tile_j", *POW2_TILE),
                ordinal("tile_k", *POW2_TILE),
                permutation("loop_order", 3),
                ordinal("threads", *THREADS),
                categorical("unroll", *UNROLL),
            ],
            "known_constraints": [
                "tile_i == 0 or tile_k == 0 or tile_i * tile_k <= 2048",
                "unroll == 'false' or tile_k == 0 or tile_k >= 8",
            ],
        },
        "objectives": [RUNTIME, TRAFFIC],
        "fidelities": FULL_FIDELITIES,
        "problem": {
            "kernel": "gemm",
            "presets": {
                "small": {"m": 48, "k": 40, "n": 56},
                "default": {"m": 192, "k": 192, "n": 192},
                "large": {"m": 512, "k": 512, "n": 512},
            },
            "default_preset": "default",
            "seed": 2101,
            "scratch_budget_bytes": 262144,
            "model_cache_bytes": 65536,
            "declared_cores": 4,
        },
        "notes": "Dense matrix multiply with register/cache blocking, loop "
                 "reordering, threading, and inner-loop unrolling.",
    })

    out.append({
        "study_id": "stencil-cpu",
        "benchmark": "stencil",
        "hardware_label": "generic-cpu",
        "backend": "kernel",
        "search_space": {
            "parameters": [
                ordinal("row_tile", 0, 4, 8, 16, 32),
                ordinal("col_tile", 0, 8, 16, 32, 64),
                ordinal("threads", *THREADS),
                categorical("unroll", *UNROLL),
            ],
            "known_constraints": [
                "col_tile == 0 or row_tile <= col_tile",
                "unroll == 'false' or col_tile == 0 or col_tile >= 16",
            ],
        },
        "objectives": [RUNTIME, TRAFFIC],
        "fidelities": FULL_FIDELITIES,
        "problem": {
            "kernel": "stencil",
            "presets": {
                "small": {"rows": 64, "cols": 80},
                "default": {"rows": 1024, "cols": 1024},
                "large": {"rows": 2048, "cols": 2048},
            },
            "default_preset": "default",
            "seed": 2102,
            "scratch_budget_bytes": 8192,
            "declared_cores": 4,
        },
        "notes": "Five-point stencil with two-dimensional tiling.",
    })

    for kernel, sid, seed in (("asum", "asum-cpu", 2103), ("scal", "scal-cpu", 2104)):
        out.append({
            "study_id": sid,
            "benchmark": kernel,
            "hardware_label": "generic-cpu",
            "backend": "kernel",
            "search_space": {
                "parameters": [
                    ordinal("chunk", 0, 1024, 4096, 16384, 65536),
                    ordinal("threads", *THREADS),
                    categorical("unroll", *UNROLL),
                ],
                "known_constraints": [
                    "chunk == 0 or chunk >= 1024 * threads"
                    if kernel == "asum"
                    else "chunk == 0 or chunk // threads >= 512",
                ],
            },
            "objectives": [RUNTIME],
            "fidelities": FULL_FIDELITIES,
            "problem": {
                "kernel": kernel,
                "presets": {
                    "small": {"n": 16384},
                    "default": {"n": 1048576},
                    "large": {"n": 8388608},
                },
                "default_preset": "default",
                "seed": seed,
                "declared_cores": 4,
            },
            "notes": "Vector reduction (absolute sum)." if kernel == "asum"
                     else "Vector scaling by a constant.",
        })

    out.append({
        "study_id": "spmv-cpu",
        "benchmark": "spmv",
        "hardware_label": "generic-cpu",
        "backend": "kernel",
        "search_space": {
            "parameters": [
                ordinal("row_chunk", 0, 16, 64, 256, 1024),
                categorical("schedule", *SCHEDULES),
                ordinal("threads", *THREADS),
                permutation("split", 2),
                categorical("unroll", *UNROLL),
            ],
            "known_constraints": [
                "row_chunk == 0 or schedule != 'static' or row_chunk >= 64",
            ],
        },
        "objectives": [RUNTIME, TRAFFIC],
        "fidelities": FULL_FIDELITIES,
        "problem": {
            "kernel": "spmv",
            "presets": {
                "small": {"rows": 200, "cols": 200},
                "default": {"rows": 20000, "cols": 20000},
                "large": {"rows": 100000, "cols": 100000},
            },
            "default_preset": "default",
            "seed": 2105,
            "density": 0.002,
            "declared_cores": 2,
        },
        "notes": "CSR sparse matrix-vector product with row chunking and a "
                 "work-item schedule.",
    })

    out.append({
        "study_id": "spmm-cpu",
        "benchmark": "spmm",
        "hardware_label": "generic-cpu",
        "backend": "kernel",
        "search_space": {
            "parameters": [
                ordinal("row_chunk", 0, 16, 64, 256),
                ordinal("col_tile", 0, 8, 16, 32),
                permutation("order", 2),
                categorical("schedule", *SCHEDULES),
                ordinal("threads", *THREADS),
                categorical("unroll", *UNROLL),
            ],
            "known_constraints": [
                "col_tile == 0 or unroll == 'false' or col_tile >= 16",
            ],
        },
        "objectives": [RUNTIME, TRAFFIC],
        "fidelities": FULL_FIDELITIES,
        "problem": {
            "kernel": "spmm",
            "presets": {
                "small": {"rows": 100, "cols": 100, "n": 16},
                "default": {"rows": 2000, "cols": 2000, "n": 64},
                "large": {"rows": 8000, "cols": 8000, "n": 128},
            },
            "default_preset": "default",
            "seed": 2106,
            "density": 0.01,
            "scratch_budget_bytes": 32768,
            "declared_cores": 4,
        },
        "notes": "CSR sparse times dense matrix with row chunking and dense "
                 "column tiling.",
    })

    out.append({
        "study_id": "sddmm-cpu",
        "benchmark": "sddmm",
        "hardware_label": "generic-cpu",
        "backend": "kernel",
        "search_space": {
            "parameters": [
                ordinal("row_chunk", 0, 16, 64, 256),
                ordinal("k_tile", 0, 8, 16, 32, 64),
                categorical("schedule", *SCHEDULES),
                ordinal("threads", *THREADS),
                categorical("unroll", *UNROLL),
            ],
            "known_constraints": [
                "k_tile == 0 or k_tile >= 16 or row_chunk <= 64",
            ],
        },
        "objectives": [RUNTIME, TRAFFIC],
        "fidelities": FULL_FIDELITIES,
        "problem": {
            "kernel": "sddmm",
            "presets": {
                "small": {"rows": 100, "cols": 100, "k": 16},
                "default": {"rows": 2000, "cols": 2000, "k": 32},
                "large": {"rows": 8000, "cols": 8000, "k": 64},
            },
            "default_preset": "default",
            "seed": 2107,
            "density": 0.01,
            "declared_cores": 2,
        },
        "notes": "Sampled dense-dense matrix product over a CSR pattern.",
    })

    out.append({
        "study_id": "kmeans-cpu",
        "benchmark": "kmeans",
        "hardware_label": "generic-cpu",
        "backend": "kernel",
        "search_space": {
            "parameters": [
                ordinal("point_block", 0, 64, 256, 1024),
                categorical("schedule", *SCHEDULES),
                ordinal("threads", *THREADS),
                categorical("unroll", *UNROLL),
            ],
            "known_constraints": [
                "point_block == 0 or point_block >= 64 * threads",
            ],
        },
        "objectives": [RUNTIME, TRAFFIC],
        "fidelities": FULL_FIDELITIES,
        "problem": {
            "kernel": "kmeans",
            "presets": {
                "small": {"points": 300, "dims": 4, "clusters": 5},
                "default": {"points": 4000, "dims": 8, "clusters": 10},
                "large": {"points": 20000, "dims": 16, "clusters": 16},
            },
            "default_preset": "default",
            "seed": 2108,
            "declared_cores": 2,
        },
        "notes": "One assignment-plus-update round of Lloyd's algorithm.",
    })

    return out


# ---------------------------------------------------------------------------
# reference studies

# (study_id, benchmark, hardware, objectives M, dims D, fidelities F,
#  space size, valid ratio, constraint tag) as published for the original
# hardware; spaces below are reconstructions matching D and the kinds mix.
REFERENCE_ROWS = [
    ("gemm-rtxtitan", "gemm", "rtx-titan", 3, 10, 4, 156_000_000, 0.0134, "known+hidden"),
    ("asum-rtxtitan", "asum", "rtx-titan", 3, 3, 4, 61_700, 0.0480, "known"),
    ("kmeans-rtxtitan", "kmeans", "rtx-titan", 3, 3, 4, 3_620, 0.2470, "known+hidden"),
    ("scal-rtxtitan", "scal", "rtx-titan", 3, 3, 4, 4_240_000, 0.1070, "known+hidden"),
    ("stencil-rtxtitan", "stencil", "rtx-titan", 3, 3, 4, 3_640, 0.2490, "known"),
    ("spmm-xeone5", "spmm", "xeon-e5", 2, 8, 2, 310_000, 0.0540, "known"),
    ("spmv-xeone5", "spmv", "xeon-e5", 2, 9, 2, 14_200_000, 0.1069, "known"),
    ("sddmm-xeone5", "sddmm", "xeon-e5", 2, 8, 2, 576_000_000, 0.0371, "known"),
    ("ttv-xeone5", "ttv", "xeon-e5", 2, 9, 2, 17_800_000, 0.2120, "known+hidden"),
    ("mttkrp-xeone5", "mttkrp", "xeon-e5", 2, 8, 2, 5_870_000, 0.1970, "known"),
]

REFERENCE_SPACES = {
    "gemm-rtxtitan": {
        "parameters": [
            ordinal("tile_m", 1, 4, 16, 32),
            ordinal("tile_n", 1, 4, 16, 32),
            ordinal("tile_k", 1, 2, 4),
            ordinal("vec_m", 1, 2, 4),
            ordinal("vec_n", 1, 2, 4),
            ordinal("warp_m", 1, 2, 4),
            ordinal("warp_n", 1, 2, 4),
            ordinal("threads_x", 32, 64, 128, 256),
            ordinal("threads_y", 1, 2),
            ordinal("swizzle", 1, 2, 4),
        ],
        "known_constraints": [
            "tile_m * vec_m <= 64",
            "tile_n * vec_n <= 64",
            "threads_x * threads_y <= 256",
        ],
    },
    "asum-rtxtitan": {
        "parameters": [
            ordinal("block_size", 32, 64, 128, 256, 512, 1024),
            ordinal("grid_factor", 1, 2, 4, 8, 16, 32, 64, 128),
            ordinal("vec_width", 1, 2, 4, 8),
        ],
        "known_constraints": ["block_size * vec_width <= 2048"],
    },
    "kmeans-rtxtitan": {
        "parameters": [
            ordinal("block_size", 32, 64, 128, 256, 512, 1024),
            ordinal("points_per_thread", 1, 2, 4, 8, 16),
            ordinal("unroll_factor", 1, 2, 4, 8),
        ],
        "known_constraints": ["block_size * points_per_thread <= 4096"],
    },
    "scal-rtxtitan": {
        "parameters": [
            ordinal("block_size", 32, 64, 128, 256, 512, 1024),
            ordinal("grid_factor", 1, 2, 4, 8, 16, 32, 64, 128),
            ordinal("vec_width", 1, 2, 4, 8),
        ],
        "known_constraints": ["block_size * vec_width <= 4096"],
    },
    "stencil-rtxtitan": {
        "parameters": [
            ordinal("block_x", 4, 8, 16, 32, 64),
            ordinal("block_y", 1, 2, 4, 8, 16),
            ordinal("halo_unroll", 1, 2, 4),
        ],
        "known_constraints": ["block_x * block_y <= 256"],
    },
    "spmm-xeone5": {
        "parameters": [
            ordinal("chunk_i", 8, 16, 32, 64, 128),
            ordinal("chunk_k", 4, 8, 16, 32),
            ordinal("split_j", 2, 4, 8, 16),
            ordinal("unroll_j", 1, 2, 4, 8),
            permutation("reorder", 3),
            categorical("parallel_var", "i", "k", "none"),
            categorical("schedule", "static", "dynamic"),
            ordinal("num_threads", 1, 2, 4, 8, 16),
        ],
        "known_constraints": [
            "parallel_var != 'none' or num_threads == 1",
            "split_j <= chunk_i",
        ],
    },
    "spmv-xeone5": {
        "parameters": [
            ordinal("chunk_i", 16, 32, 64, 128, 256),
            ordinal("split_i", 2, 4, 8),
            ordinal("vec_width", 1, 2, 4, 8),
            permutation("reorder", 3),
            categorical("parallel_var", "i", "none"),
            categorical("schedule", "static", "dynamic", "guided"),
            ordinal("chunk_size", 1, 4, 16, 64),
            ordinal("num_threads", 1, 2, 4, 8, 16),
            categorical("prefetch", "on", "off"),
        ],
        "known_constraints": [
            "parallel_var == 'i' or num_threads == 1",
            "schedule == 'static' or chunk_size >= 4",
        ],
    },
    "sddmm-xeone5": {
        "parameters": [
            ordinal("chunk_i", 8, 16, 32, 64),
            ordinal("chunk_j", 4, 8, 16, 32),
            ordinal("unroll_k", 1, 2, 4, 8),
            permutation("reorder", 3),
            categorical("parallel_var", "i", "j", "none"),
            categorical("schedule", "static", "dynamic"),
            ordinal("num_threads", 1, 2, 4, 8, 16),
            categorical("vectorize", "on", "off"),
        ],
        "known_constraints": [
            "parallel_var != 'none' or num_threads == 1",
            "unroll_k == 1 or vectorize == 'on'",
        ],
    },
    "ttv-xeone5": {
        "parameters": [
            ordinal("chunk_i", 8, 16, 32, 64),
            ordinal("chunk_j", 4, 8, 16, 32),
            ordinal("chunk_k", 2, 4, 8),
            permutation("reorder", 3),
            categorical("parallel_var", "i", "j", "none"),
            categorical("schedule", "static", "dynamic", "guided"),
            ordinal("chunk_size", 1, 4, 16),
            ordinal("num_threads", 1, 2, 4, 8, 16),
            categorical("fuse", "yes", "no"),
        ],
        "known_constraints": [
            "parallel_var != 'none' or num_threads == 1",
            "fuse == 'no' or chunk_k <= chunk_j",
        ],
    },
    "mttkrp-xeone5": {
        "parameters": [
            ordinal("chunk_i", 8, 16, 32, 64, 128),
            ordinal("chunk_j", 4, 8, 16, 32),
            ordinal("split_k", 2, 4, 8),
            permutation("reorder", 3),
            categorical("parallel_var", "i", "none"),
            categorical("schedule", "static", "dynamic"),
            ordinal("num_threads", 1, 2, 4, 8, 16),
            categorical("precompute", "yes", "no"),
        ],
        "known_constraints": [
            "parallel_var == 'i' or num_threads == 1",
            "precompute == 'no' or chunk_j >= 8",
        ],
    },
}

REFERENCE_NOTE = (
    "Characteristics in metadata were published for the original hardware "
    "and are recorded verbatim; this search space is a reconstruction with "
    "the same dimensionality and parameter kinds, so document-level counts "
    "can differ from the metadata block."
)


def reference_studies() -> list[dict]:
    out = []
    for sid, bench, hw, m, d, f, size, ratio, tag in REFERENCE_ROWS:
        space = REFERENCE_SPACES[sid]
        if len(space["parameters"]) != d:
            raise AssertionError(f"{sid}: reconstruction has {len(space['parameters'])} "
                                 f"parameters, published dimensionality is {d}")
        kinds = {p["kind"] for p in space["parameters"]}
        expect = {"ordinal"} if hw == "rtx-titan" else {"ordinal", "categorical", "permutation"}
        if kinds != expect:
            raise AssertionError(f"{sid}: parameter kinds {kinds} != {expect}")
        out.append({
            "study_id": sid,
            "benchmark": bench,
            "hardware_label": hw,
            "backend": "surrogate",
            "search_space": space,
            "objectives": [RUNTIME, TRAFFIC],
            "fidelities": FULL_FIDELITIES if f == 4 else SHORT_FIDELITIES,
            "metadata": {
                "num_objectives": m,
                "dimensions": d,
                "num_fidelities": f,
                "space_size": size,
                "known_valid": round(size * ratio),
                "valid_ratio": ratio,
                "parameter_kinds": "ordinal" if hw == "rtx-titan"
                                   else "ordinal+categorical+permutation",
                "constraint_kinds": tag,
            },
            "notes": REFERENCE_NOTE,
        })
    return out


# ---------------------------------------------------------------------------


def finish_native(doc: dict) -> dict:
    """Enumerate the space, fill true metadata, check the well-formedness
    every native study promises."""
    probe = dict(doc)
    probe["metadata"] = {
        "num_objectives": len(doc["objectives"]),
        "dimensions": len(doc["search_space"]["parameters"]),
        "num_fidelities": len(doc["fidelities"]),
        "space_size": 1,
        "known_valid": 1,
        "valid_ratio": 1.0,
    }
    study = from_document(probe)
    valid, ratio = study.space.enumerate_valid()
    kinds = sorted({p.kind for p in study.space.parameters})
    has_hidden = any(hidden_infeasibility(study, cfg) for cfg in valid)
    doc = dict(doc)
    doc["metadata"] = {
        "num_objectives": len(doc["objectives"]),
        "dimensions": len(doc["search_space"]["parameters"]),
        "num_fidelities": len(doc["fidelities"]),
        "space_size": study.space.cardinality,
        "known_valid": len(valid),
        "valid_ratio": ratio,
        "parameter_kinds": "+".join(kinds),
        "constraint_kinds": "known+hidden" if has_hidden else "known",
    }

    default = study.space.canonical(list_default_config(study.problem.kernel))
    if not study.space.is_valid(default):
        raise AssertionError(f"{doc['study_id']}: default config violates a known constraint")
    if hidden_infeasibility(study, default):
        raise AssertionError(f"{doc['study_id']}: default config is hidden-infeasible")
    if not valid:
        raise AssertionError(f"{doc['study_id']}: no valid configuration")
    return doc


def main() -> int:
    os.makedirs(OUT_DIR, exist_ok=True)
    docs = [finish_native(d) for d in native_studies()] + reference_studies()
    ids = [d["study_id"] for d in docs]
    if len(set(ids)) != len(ids):
        raise AssertionError(f"duplicate study ids: {ids}")
    for doc in docs:
        doc.setdefault("schema_version", 1)
        study = from_document(doc)  # must parse
        if to_document(study) != json.loads(json.dumps(doc)):
            raise AssertionError(f"{study.study_id}: document does not round-trip")
        path = os.path.join(OUT_DIR, f"{study.study_id}.json")
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(doc, fh, indent=2, sort_keys=True)
            fh.write("\n")
        meta = doc["metadata"]
        print(f"{study.study_id}: |S|={meta['space_size']} valid={meta['known_valid']} "
              f"ratio={meta['valid_ratio']:.4f} [{meta['constraint_kinds']}]")
    print(f"wrote {len(docs)} studies to {OUT_DIR}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
