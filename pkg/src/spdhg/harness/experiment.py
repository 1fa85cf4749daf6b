"""Multi-seed experiment runs: per-trajectory CSV logs, aggregates, metadata and plot."""

from __future__ import annotations

import csv
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from .. import __version__, sampling
from ..problems import GeneratorSpec, gen_basis_pursuit, generate, load_libsvm, problem_from_data
from ..solver import (RunConfig, default_step_sizes, fb_vc_cd_run, fb_vc_cd_step_sizes, pdhg_run,
                      pdhg_step_sizes, run, sdca_run, spdhg_mu_run, svrg_run)
from ..solver.types import DivergenceError
from .config import ExperimentConfig
from .plot import convergence_svg
from .reference import certify_reference

__all__ = ["build_problem", "run_trajectory", "run_experiment", "write_log_csv", "read_log_csv",
           "aggregate_logs", "write_aggregate_csv", "read_aggregate_csv", "THREADS_ENV"]

THREADS_ENV = "SPDHG_THREADS"
_FMT = ".17g"
_NEEDS_REF = {"objective_residual", "dist_to_ref", "bregman", "gap_at_ref", "lyapunov_V"}


def _fmt(v):
    return format(float(v), _FMT)


# ----------------------------------------------------------------------
# problem and trajectories


def build_problem(config):
    """Assemble the configured problem (generated or loaded)."""
    prob = config.problem
    if isinstance(prob, GeneratorSpec):
        if prob.kind == "basis_pursuit":
            return gen_basis_pursuit(prob)[0]
        return generate(prob)
    X, labels = load_libsvm(prob.file, prob.p_override, prob.normalize)
    return problem_from_data(X, labels, prob.kind, prob.lam, prob.block_size, prob.lam_relative)


def _svrg_inner(problem, entry):
    return int(entry.overrides.get("inner", 2 * problem.n))


def _iters_per_epoch(problem, entry):
    if entry.method == "pdhg":
        return 1.0
    if entry.method == "svrg":
        m = _svrg_inner(problem, entry)
        n = problem.n
        return n * m / (n + m)
    return float(problem.n)


def run_config_for(problem, config, entry):
    """Iteration budget and log cadence for ``entry`` from the epoch settings."""
    per = _iters_per_epoch(problem, entry)
    max_iters = int(round(config.max_epochs * per))
    log_every = max(1, int(round(config.log_every_epochs * per))) if config.log_every_epochs else 0
    return RunConfig(max_iters=max_iters, log_every=log_every, stop_metric=config.stop_metric,
                     stop_tol=config.stop_tol, metrics=config.metrics,
                     track_ergodic=config.track_ergodic)


def steps_for(problem, entry):
    """Step sizes a method will use, for the metadata echo (``None`` if not applicable)."""
    A = problem.A
    if entry.method == "spdhg":
        return default_step_sizes(A, entry.gamma).to_dict()
    if entry.method == "fb_vc_cd":
        return fb_vc_cd_step_sizes(A, entry.gamma).to_dict()
    if entry.method == "pdhg":
        return pdhg_step_sizes(A.as_single_block(), entry.gamma).to_dict()
    if entry.method == "svrg":
        L_max = problem.n * float(np.max(A.block_norms() ** 2))
        return {"step": float(entry.overrides.get("step", 0.1 / L_max)),
                "inner": _svrg_inner(problem, entry)}
    return None


def run_trajectory(problem, entry, seed, run_cfg):
    """Run one (method, seed) trajectory and return its ``RunResult``."""
    method = entry.method
    sampler = sampling.uniform(problem.n, seed)
    if method == "spdhg":
        return run(problem, default_step_sizes(problem.A, entry.gamma), sampler, run_cfg)
    if method == "pdhg":
        return pdhg_run(problem, None, run_cfg, entry.gamma)
    if method == "spdhg_mu":
        return spdhg_mu_run(problem, config=run_cfg, sampler=sampler, gamma=entry.gamma)
    if method == "fb_vc_cd":
        return fb_vc_cd_run(problem, run_cfg, sampler, gamma=entry.gamma)
    if method == "svrg":
        step = entry.overrides.get("step")
        return svrg_run(problem, run_cfg, seed, None if step is None else float(step),
                        _svrg_inner(problem, entry))
    if method == "sdca":
        return sdca_run(problem, run_cfg, seed)
    raise ValueError(f"unknown method {method!r}")


# ----------------------------------------------------------------------
# CSV logs


def write_log_csv(path, log, seed, method, metrics):
    """Header ``iter,epoch,seed,method,<metrics>``; floats with 17 significant digits."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["iter", "epoch", "seed", "method", *metrics])
        for rec in log:
            w.writerow([rec.iter, _fmt(rec.epoch), seed, method,
                        *(_fmt(rec.metrics.get(m, math.nan)) for m in metrics)])


def read_log_csv(path):
    """Parse a trajectory CSV into ``{column: ndarray}`` (``method`` as strings)."""
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    out = {}
    for j, name in enumerate(header):
        col = [r[j] for r in body]
        if name in ("iter", "seed"):
            out[name] = np.array([int(v) for v in col], dtype=np.int64)
        elif name == "method":
            out[name] = np.array(col, dtype=object)
        else:
            out[name] = np.array([float(v) for v in col], dtype=np.float64)
    return out


def aggregate_logs(logs, metrics):
    """Per-iteration mean, std (population), min and max across seeds.

    ``logs`` is a list of record lists of one method.  Rows are aligned by
    iteration; each row uses the seeds that logged that iteration.
    """
    by_iter = {}
    for log in logs:
        for rec in log:
            by_iter.setdefault(rec.iter, []).append(rec)
    rows = []
    for it in sorted(by_iter):
        recs = by_iter[it]
        row = {"iter": it, "epoch": recs[0].epoch, "n_seeds": len(recs)}
        for m in metrics:
            vals = np.array([r.metrics.get(m, math.nan) for r in recs], dtype=np.float64)
            row[f"{m}_mean"] = float(np.mean(vals))
            row[f"{m}_std"] = float(np.std(vals))
            row[f"{m}_min"] = float(np.min(vals))
            row[f"{m}_max"] = float(np.max(vals))
        rows.append(row)
    return rows


def _agg_columns(metrics):
    cols = []
    for m in metrics:
        cols += [f"{m}_mean", f"{m}_std", f"{m}_min", f"{m}_max"]
    return cols


def write_aggregate_csv(path, per_method, metrics):
    cols = _agg_columns(metrics)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["method", "iter", "epoch", "n_seeds", *cols])
        for method, rows in per_method.items():
            for row in rows:
                w.writerow([method, row["iter"], _fmt(row["epoch"]), row["n_seeds"],
                            *(_fmt(row[c]) for c in cols)])


def read_aggregate_csv(path):
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    out = {}
    for r in rows:
        rec = {k: (v if k == "method" else int(v) if k in ("iter", "n_seeds") else float(v))
               for k, v in r.items()}
        out.setdefault(r["method"], []).append(rec)
    return out


# ----------------------------------------------------------------------
# orchestration


def _needs_reference(config):
    return any((m[:-4] if m.endswith("_avg") else m) in _NEEDS_REF for m in config.metrics)


def _threads():
    try:
        return max(1, int(os.environ.get(THREADS_ENV, "1")))
    except ValueError:
        return 1


def run_experiment(config: ExperimentConfig, out_dir=None):
    """Run every (solver, seed) pair and write the artifact directory.

    Writes ``<method>_seed<k>.csv``, ``aggregate.csv``, ``run.json``,
    ``plot.svg`` and (when certified) ``reference.npz``.  A diverging
    trajectory keeps its partial log and is listed under ``failures`` in
    ``run.json``; the other trajectories are unaffected.
    """
    out = Path(config.output_dir if out_dir is None else out_dir)
    out.mkdir(parents=True, exist_ok=True)
    problem = build_problem(config)

    ref_meta = None
    if config.reference_mode != "none" and (_needs_reference(config) or config.reference_path):
        ref_path = out / "reference.npz"
        if config.reference_mode == "file":
            ref = certify_reference(problem, "file", config.reference_tol, config.reference_path)
            ref.save(ref_path)
        else:
            ref = certify_reference(problem, config.reference_mode, config.reference_tol, ref_path)
        ref_meta = {"provenance": ref.provenance, "kkt": ref.kkt,
                    "objective_star": ref.objective_star, "file": ref_path.name}

    jobs = [(entry, seed) for entry in config.solvers for seed in config.seeds]

    def work(job):
        entry, seed = job
        cfg = run_config_for(problem, config, entry)
        try:
            res = run_trajectory(problem, entry, seed, cfg)
            return entry, seed, res.log, None
        except DivergenceError as exc:
            return entry, seed, exc.log, {"method": entry.method, "seed": seed,
                                          "iteration": exc.iteration, "error": str(exc)}

    threads = _threads()
    if threads > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(work, jobs))
    else:
        results = [work(j) for j in jobs]

    failures = []
    per_method_logs = {}
    for entry, seed, log, failure in results:
        write_log_csv(out / f"{entry.method}_seed{seed}.csv", log, seed, entry.method,
                      config.metrics)
        per_method_logs.setdefault(entry.method, []).append(log)
        if failure is not None:
            failures.append(failure)

    per_method = {m: aggregate_logs(logs, config.metrics) for m, logs in per_method_logs.items()}
    write_aggregate_csv(out / "aggregate.csv", per_method, config.metrics)

    plot_metric = config.plot_metric or config.metrics[0]
    curves = {}
    for method, rows in per_method.items():
        curves[method] = (np.array([r["epoch"] for r in rows]),
                          np.array([r[f"{plot_metric}_mean"] for r in rows]),
                          np.array([r[f"{plot_metric}_min"] for r in rows]),
                          np.array([r[f"{plot_metric}_max"] for r in rows]))
    (out / "plot.svg").write_text(
        convergence_svg(curves, plot_metric, f"{problem.name}: {plot_metric}"), encoding="utf-8")

    steps = {}
    for entry in config.solvers:
        try:
            steps[entry.method] = steps_for(problem, entry)
        except Exception as exc:  # noqa: BLE001 - metadata only
            steps[entry.method] = {"error": str(exc)}
    meta = {
        "version": __version__,
        "config": config.to_dict(),
        "seeds": list(config.seeds),
        "problem": {"name": problem.name, "n": problem.n, "p": problem.p, "m": problem.m,
                    "nnz": problem.A.nnz()},
        "block_norms": problem.A.block_norms().tolist(),
        "step_sizes": steps,
        "reference": ref_meta,
        "failures": failures,
        "bands": "min-max across seeds",
        "aggregate_std": "population standard deviation across seeds",
    }
    (out / "run.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n",
                                  encoding="utf-8")
    return out
