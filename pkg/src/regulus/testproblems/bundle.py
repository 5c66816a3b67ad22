"""Directory bundles: ``problem.json`` plus CSV vectors (and small operators)."""
from __future__ import annotations

import json
import os

import numpy as np

from ..linop import load_matrix_csv, save_matrix_csv

__all__ = ["problem_metadata", "export_bundle", "load_bundle", "OPERATOR_CSV_LIMIT"]

# Largest operator (in entries) written densely to A.csv.
OPERATOR_CSV_LIMIT = 2**20


def problem_metadata(problem):
    """JSON-ready metadata with the keys type, dims, angles, psf, noise, commit_crime."""
    meta = {
        "type": problem.kind,
        "dims": list(problem.dims),
        "angles": problem.meta.get("angles"),
        "psf": problem.meta.get("psf"),
        "noise": dict(problem.meta.get("noise", {})),
        "commit_crime": bool(problem.commit_crime),
        "shape": list(problem.A.shape),
    }
    for key in ("signal", "image", "phantom", "motion", "data_angles", "n_detectors"):
        if key in problem.meta:
            meta[key] = problem.meta[key]
    return meta


def export_bundle(problem, out_dir, operator_limit=OPERATOR_CSV_LIMIT):
    """Write ``problem.json``, ``b.csv``, ``b_true.csv``, ``x_true.csv`` and, if small, ``A.csv``."""
    os.makedirs(out_dir, exist_ok=True)
    meta = problem_metadata(problem)
    m, n = problem.A.shape
    meta["operator_csv"] = m * n <= operator_limit
    save_matrix_csv(os.path.join(out_dir, "b.csv"), problem.b)
    save_matrix_csv(os.path.join(out_dir, "b_true.csv"), problem.b_true)
    if problem.x_true is not None:
        save_matrix_csv(os.path.join(out_dir, "x_true.csv"), problem.x_true)
    if meta["operator_csv"]:
        save_matrix_csv(os.path.join(out_dir, "A.csv"), problem.A.to_dense())
    with open(os.path.join(out_dir, "problem.json"), "w") as fh:
        json.dump(meta, fh, indent=2)
        fh.write("\n")
    return meta


def load_bundle(out_dir):
    """Read a bundle back as a dict of metadata and arrays."""
    with open(os.path.join(out_dir, "problem.json")) as fh:
        meta = json.load(fh)
    out = {"meta": meta}
    for name in ("b", "b_true", "x_true", "A"):
        path = os.path.join(out_dir, f"{name}.csv")
        if os.path.exists(path):
            M = load_matrix_csv(path)
            out[name] = M[:, 0] if name != "A" else M
    return out
