"""Command-line front end: ``spdhg {generate,certify,run,check,fit}``.

The worker thread count of ``run`` is read from ``SPDHG_THREADS``.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np
from scipy import sparse

from ..diagnostics import rate_fit
from ..problems import GeneratorSpec, write_libsvm
from .checks import check_properties
from .config import ConfigError, load_config
from .experiment import build_problem, read_aggregate_csv, read_log_csv, run_experiment
from .reference import DEFAULT_TOL, CertificationError, certify_reference

__all__ = ["main", "build_parser"]


def _config(args):
    if args.config is None:
        raise ConfigError("--config is required")
    cfg = load_config(args.config)
    if getattr(args, "seed", None) is not None:
        cfg = cfg.with_seeds([args.seed])
    if getattr(args, "out", None) is not None:
        cfg = cfg.with_output(args.out)
    return cfg


def cmd_generate(args):
    """Write the configured problem as ``problem.libsvm`` plus ``problem.json``."""
    cfg = _config(args)
    if args.seed is not None and isinstance(cfg.problem, GeneratorSpec):
        d = cfg.to_dict()
        d["problem"]["seed"] = args.seed
        cfg = type(cfg).from_dict(d)
    problem = build_problem(cfg)
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows = problem.A.csr
    if problem.name == "svm_hinge":
        labels = problem.meta["labels"]
        features = sparse.diags(labels) @ rows
    else:
        labels = problem.b if problem.constrained else problem.meta["b"]
        features = rows
    write_libsvm(out / "problem.libsvm", features, labels)
    info = {"name": problem.name, "n_blocks": problem.n, "p": problem.p, "m": problem.m,
            "problem": cfg.to_dict()["problem"], "lam": problem.meta.get("lam")}
    if "x_planted" in problem.meta:
        np.save(out / "x_planted.npy", problem.meta["x_planted"])
        info["x_planted"] = "x_planted.npy"
    (out / "problem.json").write_text(json.dumps(info, indent=2, sort_keys=True) + "\n",
                                      encoding="utf-8")
    print(f"wrote {out / 'problem.libsvm'} ({problem.m} rows, {problem.p} columns)")
    return 0


def cmd_certify(args):
    cfg = _config(args)
    problem = build_problem(cfg)
    tol = cfg.reference_tol if args.tol is None else args.tol
    mode = cfg.reference_mode if cfg.reference_mode != "none" else "pdhg_oracle"
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    path = cfg.reference_path if mode == "file" else out / "reference.npz"
    try:
        ref = certify_reference(problem, mode, tol, path)
    except CertificationError as exc:
        print(f"certification failed: {exc} (best residual {exc.best:.3e})", file=sys.stderr)
        return 1
    if mode == "file":
        ref.save(out / "reference.npz")
    print(f"certified ({ref.provenance}): kkt residual {ref.kkt:.3e}, "
          f"objective {ref.objective_star:.17g} -> {out / 'reference.npz'}")
    return 0


def cmd_run(args):
    cfg = _config(args)
    out = run_experiment(cfg)
    meta = json.loads((out / "run.json").read_text(encoding="utf-8"))
    print(f"wrote {out} ({len(cfg.solvers)} solver(s) x {len(cfg.seeds)} seed(s))")
    for fail in meta["failures"]:
        print(f"  diverged: {fail['method']} seed {fail['seed']} at iteration {fail['iteration']}")
    return 0


def cmd_check(args):
    cfg = _config(args)
    problem = build_problem(cfg)
    if cfg.reference_mode != "none":
        try:
            certify_reference(problem, cfg.reference_mode, cfg.reference_tol, cfg.reference_path
                              if cfg.reference_mode == "file" else None)
        except CertificationError as exc:
            print(f"warning: no reference ({exc}); checking random anchors only", file=sys.stderr)
    tol = 1e-9 if args.tol is None else args.tol
    seed = cfg.seeds[0] if args.seed is None else args.seed
    report = check_properties(problem, iters=args.iters, seed=seed, tol=tol,
                              monte_carlo=args.monte_carlo)
    print(report.summary())
    if report.first_failure is not None:
        print(json.dumps(report.first_failure, indent=2))
    return 0 if report.passed else 1


def cmd_fit(args):
    """Fit a linear rate to a metric column of a trajectory or aggregate CSV."""
    path = Path(args.csv)
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
    series = {}
    if header[:2] == ["method", "iter"]:
        col = f"{args.metric}_mean"
        for method, rows in read_aggregate_csv(path).items():
            if col not in rows[0]:
                raise ConfigError(f"column {col!r} not in {path}")
            series[method] = ([r["iter"] for r in rows], [r[col] for r in rows])
    else:
        data = read_log_csv(path)
        if args.metric not in data:
            raise ConfigError(f"column {args.metric!r} not in {path}")
        mask = np.ones(data["iter"].size, dtype=bool)
        if args.seed is not None:
            mask = data["seed"] == args.seed
        series[str(data["method"][0]) if data["method"].size else "?"] = (
            data["iter"][mask], data[args.metric][mask])
    for method, (it, vals) in series.items():
        fit = rate_fit(it, vals)
        print(f"{method}: slope {fit.slope:.6e} per iteration, factor {fit.factor:.8f}, "
              f"R^2 {fit.r_squared:.4f}, window {fit.window}")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(prog="spdhg", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, out=True, seed=True, tol=False):
        p.add_argument("--config", help="INI config or run.json")
        if seed:
            p.add_argument("--seed", type=int, default=None)
        if out:
            p.add_argument("--out", default=None, help="output directory")
        if tol:
            p.add_argument("--tol", type=float, default=None)

    p = sub.add_parser("generate", help="write a generated problem to disk")
    common(p)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("certify", help="compute and verify a reference solution")
    common(p, seed=False, tol=True)
    p.set_defaults(func=cmd_certify)

    p = sub.add_parser("run", help="run an experiment")
    common(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("check", help="per-iteration property suite (n <= 8 blocks)")
    common(p, out=False, tol=True)
    p.add_argument("--iters", type=int, default=200)
    p.add_argument("--monte-carlo", action="store_true", help="also sample the identities")
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("fit", help="linear-rate fit of a CSV metric column")
    p.add_argument("csv")
    p.add_argument("--metric", default="dist_to_ref")
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_fit)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
