"""Command-line experiment runner.

Usage::

    regulus run experiment.json [--seed N] [--out DIR] [--quiet]
    regulus list-solvers
    regulus export-problem experiment.json OUTDIR

Exit codes: 0 success, 1 solver failure, 2 invalid configuration.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from .config import ConfigError, build_problem, load_config, locate_line
from .errors import RegulusError
from .registry import _ENTRIES, get_solver
from .results import SolveResult
from .testproblems import export_bundle, problem_metadata

__all__ = ["main", "run", "list_solvers", "export_problem", "METRICS_HEADER", "write_pgm",
           "read_pgm", "write_metrics", "worker_count"]

METRICS_HEADER = "solver,iteration,residual_norm,regparam,relative_error,wall_ms"
PGM_MAXVAL = 65535


def _fmt(v):
    return "" if v is None else "%.17g" % v


def _atomic_write(path, data, mode="w"):
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, mode) as fh:
        fh.write(data)
        fh.flush()
        os.fsync(fh.fileno())
    os.replace(tmp, path)


def write_metrics(path, label, result):
    """Write one CSV row per recorded iteration."""
    lines = [METRICS_HEADER]
    for r in result.history:
        lines.append(",".join([label, str(r.iteration), _fmt(r.residual_norm), _fmt(r.regparam),
                               _fmt(r.relative_error), "%.3f" % (1e3 * r.wall_time)]))
    _atomic_write(path, "\n".join(lines) + "\n")


def _write_vector(path, x):
    _atomic_write(path, "".join("%.17g\n" % v for v in np.asarray(x, dtype=np.float64)))


def _tile_frames(frames):
    nt, nx, ny = frames.shape
    cols = int(np.ceil(np.sqrt(nt)))
    rows = int(np.ceil(nt / cols))
    canvas = np.full((rows * nx, cols * ny), np.nan)
    for t in range(nt):
        r, c = divmod(t, cols)
        canvas[r * nx:(r + 1) * nx, c * ny:(c + 1) * ny] = frames[t]
    return canvas


def write_pgm(path, image):
    """Write a 16-bit binary PGM; returns the ``(min, max)`` of the linear map.

    Values map linearly from ``[min, max]`` of the finite entries onto
    ``[0, 65535]``; NaN padding is written as 0.
    """
    img = np.asarray(image, dtype=np.float64)
    finite = np.isfinite(img)
    lo = float(img[finite].min()) if finite.any() else 0.0
    hi = float(img[finite].max()) if finite.any() else 0.0
    scale = PGM_MAXVAL / (hi - lo) if hi > lo else 0.0
    q = np.where(finite, np.rint((np.where(finite, img, lo) - lo) * scale), 0).astype(">u2")
    header = b"P5\n%d %d\n%d\n" % (img.shape[1], img.shape[0], PGM_MAXVAL)
    _atomic_write(path, header + q.tobytes(), mode="wb")
    return lo, hi


def read_pgm(path):
    """Read a binary PGM written by :func:`write_pgm` as an integer array."""
    data = Path(path).read_bytes()
    parts, pos = [], 0
    while len(parts) < 4:
        while data[pos:pos + 1].isspace():
            pos += 1
        end = pos
        while not data[end:end + 1].isspace():
            end += 1
        parts.append(data[pos:end])
        pos = end
    pos += 1
    w, h, maxval = int(parts[1]), int(parts[2]), int(parts[3])
    dt = ">u2" if maxval > 255 else "u1"
    return np.frombuffer(data, dtype=dt, count=w * h, offset=pos).reshape(h, w)


def worker_count(n_jobs):
    """Worker threads: ``REGULUS_THREADS`` caps the count, 0 or unset means automatic."""
    try:
        cap = int(os.environ.get("REGULUS_THREADS", "0"))
    except ValueError:
        cap = 0
    auto = os.cpu_count() or 1
    cap = auto if cap <= 0 else cap
    return max(1, min(cap, n_jobs))


def _log(quiet, msg):
    if not quiet:
        print(msg, file=sys.stderr)


def _plan(cfg, text, source):
    """Resolve solver entries and labels, reporting problems with line numbers."""
    plan, seen = [], set()
    for i, s in enumerate(cfg["solvers"]):
        try:
            entry = get_solver(s["name"])
        except RegulusError as err:
            p = ["solvers", i, "name"]
            raise ConfigError(str(err), p, locate_line(text, p), source) from None
        params = dict(s.get("params", {}))
        bad = sorted(set(params) - set(entry.params))
        if bad:
            p = ["solvers", i, "params", bad[0]]
            raise ConfigError(f"unknown parameter {bad[0]!r} for solver {entry.name}; "
                              f"allowed: {', '.join(entry.params) or 'none'}",
                              p, locate_line(text, p), source)
        label = s.get("label", entry.name)
        if label in seen:
            p = ["solvers", i]
            raise ConfigError(f"duplicate output label {label!r}; set 'label' to disambiguate",
                              p, locate_line(text, p), source)
        seen.add(label)
        plan.append((i, entry, params, s.get("selector"), label))
    return plan


def _selectors(plan, problem, text, source):
    out = []
    for i, entry, params, spec, label in plan:
        try:
            sel = entry.make_selector(spec, problem.delta)
        except RegulusError as err:
            p = ["solvers", i, "selector"]
            raise ConfigError(str(err), p, locate_line(text, p), source) from None
        out.append((entry, params, sel, label))
    return out


class _Progress:
    """Keeps the rows and latest iterate of a running solver for partial output."""

    def __init__(self):
        self.rows = []
        self.x = None

    def __call__(self, record, x):
        self.rows.append(record)
        self.x = np.array(x, copy=True)


def _solve_one(problem, entry, params, sel, label, quiet):
    t0 = time.perf_counter()
    progress = _Progress()
    try:
        res = entry.run(problem, params, sel, progress)
    except Exception as err:  # reported per solver, never fatal to sibling runs
        return _partial_result(progress), err
    _log(quiet, f"{label}: {res.stop_reason} after {res.iterations} iterations "
                f"({time.perf_counter() - t0:.2f} s)")
    return res, None


def _partial_result(progress):
    if progress.x is None:
        return None
    return SolveResult(progress.x, progress.rows, "failed")


def _write_outputs(problem, label, res, out_dir, image_format, emit_history, suffix=""):
    mapping = None
    write_metrics(out_dir / f"metrics_{label}.csv{suffix}", label,
                  res if emit_history else _last_only(res))
    _write_vector(out_dir / f"solution_{label}.csv{suffix}", res.x)
    if image_format == "pgm" and len(problem.dims) >= 2:
        img = _tile_frames(problem.frames(res.x)) if len(problem.dims) == 3 else \
            res.x.reshape(problem.dims, order="F")
        lo, hi = write_pgm(out_dir / f"solution_{label}.pgm{suffix}", img)
        mapping = {"min": lo, "max": hi, "maxval": PGM_MAXVAL}
    return mapping


def _last_only(res):
    return SolveResult(res.x, res.history[-1:], res.stop_reason, None, res.info)


def run(config_path, seed=None, out=None, quiet=False):
    """Run an experiment; returns the process exit code."""
    try:
        cfg, text = load_config(config_path)
        plan = _plan(cfg, text, str(config_path))
    except ConfigError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    ocfg = cfg.get("output", {})
    out_dir = Path(out if out is not None else ocfg.get("directory", "."))
    image_format = ocfg.get("image_format", "pgm")
    emit_history = ocfg.get("emit_history", True)
    try:
        problem = build_problem(cfg["problem"], seed)
        jobs = _selectors(plan, problem, text, str(config_path))
    except ConfigError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    except (RegulusError, TypeError) as err:
        p = ["problem"]
        print(f"error: {config_path}:{locate_line(text, p)}: problem: {err}", file=sys.stderr)
        return 2
    out_dir.mkdir(parents=True, exist_ok=True)
    _log(quiet, f"problem {problem.kind} {problem.shape[0]}x{problem.shape[1]}, delta={problem.delta:.4g}")

    with ThreadPoolExecutor(max_workers=worker_count(len(jobs))) as pool:
        futures = [pool.submit(_solve_one, problem, *job, quiet) for job in jobs]
        outcomes = [f.result() for f in futures]

    meta = problem_metadata(problem)
    meta["seed"] = problem.meta.get("noise", {}).get("seed")
    meta["solvers"] = {}
    status = 0
    for (entry, params, sel, label), (res, err) in zip(jobs, outcomes):
        info = {"name": entry.name, "params": params,
                "selector": None if sel is None else {"kind": sel.kind, "value": sel.value,
                                                      "delta": sel.delta, "eta": sel.eta}}
        if err is not None:
            status = 1
            info["error"] = f"{type(err).__name__}: {err}"
            if res is None:
                _atomic_write(out_dir / f"metrics_{label}.csv.partial", METRICS_HEADER + "\n")
            else:
                _write_outputs(problem, label, res, out_dir, "none", True, suffix=".partial")
            print(f"error: solver {label} failed: {info['error']}", file=sys.stderr)
        else:
            info["stop_reason"] = res.stop_reason
            info["iterations"] = res.iterations
            mapping = _write_outputs(problem, label, res, out_dir, image_format, emit_history)
            if mapping is not None:
                info["pgm"] = mapping
        meta["solvers"][label] = info
    _atomic_write(out_dir / "problem.json", json.dumps(meta, indent=2, sort_keys=True) + "\n")
    return status


def list_solvers(file=None):
    """Print the solver catalogue as a text table."""
    file = sys.stdout if file is None else file
    w = max(len(e.name) for e in _ENTRIES)
    print(f"{'name':<{w}}  {'selectors':<14}  description", file=file)
    for e in _ENTRIES:
        print(f"{e.name:<{w}}  {','.join(e.selectors):<14}  {e.description}", file=file)
    return 0


def export_problem(config_path, out_dir, seed=None, quiet=False):
    """Write the test-problem bundle described by a config without solving."""
    try:
        cfg, text = load_config(config_path)
    except ConfigError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    try:
        problem = build_problem(cfg["problem"], seed)
    except (RegulusError, TypeError) as err:
        print(f"error: {config_path}:{locate_line(text, ['problem'])}: problem: {err}", file=sys.stderr)
        return 2
    export_bundle(problem, out_dir)
    _log(quiet, f"wrote bundle to {out_dir}")
    return 0


def _parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="override the problem noise seed")
    common.add_argument("--out", default=argparse.SUPPRESS, help="override the output directory")
    common.add_argument("--quiet", action="store_true", default=argparse.SUPPRESS,
                        help="suppress progress messages")
    ap = argparse.ArgumentParser(prog="regulus", description="Regularized inverse-problem experiments.",
                                 parents=[common])
    sub = ap.add_subparsers(dest="command", required=True)
    p = sub.add_parser("run", parents=[common], help="run an experiment config")
    p.add_argument("config")
    sub.add_parser("list-solvers", parents=[common], help="list available solvers")
    p = sub.add_parser("export-problem", parents=[common], help="write a test-problem bundle")
    p.add_argument("config")
    p.add_argument("dir")
    return ap


def main(argv=None):
    args = _parser().parse_args(argv)
    for name, default in (("seed", None), ("out", None), ("quiet", False)):
        if not hasattr(args, name):
            setattr(args, name, default)
    if args.command == "list-solvers":
        return list_solvers()
    if args.command == "run":
        return run(args.config, args.seed, args.out, args.quiet)
    return export_problem(args.config, args.out or args.dir, args.seed, args.quiet)


if __name__ == "__main__":
    sys.exit(main())
