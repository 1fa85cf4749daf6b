"""Acceptance criteria 1-10, one test each; every test prints a PASS/FAIL line."""

import json
import time

import numpy as np
import pytest
from scipy import sparse, stats

from conftest import random_problem
from spdhg import sampling
from spdhg.diagnostics import rate_fit, theory_constant_ce
from spdhg.diagnostics.measures import smoothed_gap
from spdhg.funcs import (L1, Hinge, IndicatorPoint, LeastSquares, SeparableSum, SquaredL2,
                         Zero)
from spdhg.harness import checks
from spdhg.harness.cli import main
from spdhg.harness.config import parse_config
from spdhg.harness.experiment import run_experiment
from spdhg.harness.reference import certify_reference
from spdhg.linops import BlockLinearOperator
from spdhg.problems import GeneratorSpec, gen_basis_pursuit, generate
from spdhg.solver import (RunConfig, SaddleProblem, SolverState, check_sampler_identities,
                          default_step_sizes, fb_vc_cd_run, pdhg_run, pdhg_step_sizes, run,
                          spdhg_step, validate_step_sizes)

DESK = dict(n=100, p=200, rho=0.5, sparsity=20)
SEEDS = range(10)


def verdict(capsys, number, ok, detail):
    with capsys.disabled():
        print(f"\nACCEPTANCE C{number}: {'PASS' if ok else 'FAIL'} - {detail}")
    assert ok, detail


# ----------------------------------------------------------------------
# shared desk instances


@pytest.fixture(scope="module")
def desk_problems():
    bp = gen_basis_pursuit(GeneratorSpec(kind="basis_pursuit", **DESK))[0]
    certify_reference(bp, "planted", 1e-12)
    lasso = generate(GeneratorSpec(kind="lasso", lam=0.1, lam_relative=True, **DESK))
    certify_reference(lasso, "pdhg_oracle", 1e-12)
    ridge = generate(GeneratorSpec(kind="ridge", lam=1.0, **DESK))
    certify_reference(ridge, "pdhg_oracle", 1e-12)
    return {"basis_pursuit": bp, "lasso": lasso, "ridge": ridge}


@pytest.fixture(scope="module")
def linear_runs(desk_problems):
    """Ten seeds per desk instance, logged once per epoch, up to 2000 epochs."""
    out = {}
    t0 = time.perf_counter()
    for name, prob in desk_problems.items():
        steps = default_step_sizes(prob.A)
        runs = []
        for seed in SEEDS:
            cfg = RunConfig(max_iters=2000 * prob.n, log_every=prob.n, metrics=("dist_to_ref",),
                            stop_metric="dist_to_ref", stop_tol=1e-9)
            res = run(prob, steps, sampling.uniform(prob.n, seed), cfg)
            runs.append((np.array([r.iter for r in res.log]), res.series("dist_to_ref")))
        out[name] = runs
    out["elapsed"] = time.perf_counter() - t0
    return out


def small_instances():
    """Twenty instances with n <= 8 and p <= 16, five per family."""
    rng = np.random.default_rng(2024)
    out = []
    for j in range(20):
        family = ("lasso", "ridge", "constrained", "svm")[j % 4]
        n = int(rng.integers(1, 9))
        m = int(rng.integers(max(n, 2), 17))
        p = int(rng.integers(2, 17))
        prob = random_problem(family, rng, m=m, p=p, n_blocks=n)
        certify_reference(prob, "pdhg_oracle", 1e-11)
        out.append(prob)
    return out


@pytest.fixture(scope="module")
def property_reports():
    t0 = time.perf_counter()
    reports = [checks.check_properties(prob, iters=200, seed=j, monte_carlo=True,
                                       mc_draws=100_000)
               for j, prob in enumerate(small_instances())]
    return reports, time.perf_counter() - t0


# ----------------------------------------------------------------------
# criteria


def test_c1_step_size_contract(capsys):
    rng = np.random.default_rng(1)
    t0 = time.perf_counter()
    worst_ratio, worst_eq = 0.0, 0.0
    for _ in range(50):
        m, p = int(rng.integers(2, 60)), int(rng.integers(1, 40))
        M = sparse.random(m, p, density=float(rng.uniform(0.2, 1.0)), random_state=rng,
                          format="csr")
        M.data = rng.standard_normal(M.data.size)
        M = (M + sparse.csr_matrix((rng.standard_normal(m), (np.arange(m), rng.integers(0, p, m))),
                                   shape=(m, p))).tocsr()  # no empty row, hence no empty block
        n = int(rng.integers(1, m + 1))
        cuts = np.sort(rng.choice(np.arange(1, m), size=n - 1, replace=False)) if n > 1 else []
        A = BlockLinearOperator(M, np.r_[0, cuts, m])
        sampler = sampling.uniform(n)
        rep = validate_step_sizes(default_step_sizes(A, 0.99, sampler), A, sampler)
        worst_ratio = max(worst_ratio, float(rep.ratios.max()) - 1.0)
        worst_eq = max(worst_eq, abs(float(rep.ratios[np.argmax(A.block_norms())]) - 1.0))
    elapsed = time.perf_counter() - t0
    ok = worst_ratio <= 1e-12 and worst_eq <= 1e-12 and elapsed < 1.0
    verdict(capsys, 1, ok, f"max ratio - 1 = {worst_ratio:.1e}, argmax-block |ratio - 1| = "
                           f"{worst_eq:.1e} on 50 operators in {elapsed:.2f} s")


def test_c2_descent_inequality(capsys, property_reports):
    reports, elapsed = property_reports
    descent = [r.worst[k] for r in reports for k in r.worst if k.startswith("descent")]
    bounds = [r.worst[k] for r in reports for k in ("lower_bound_V", "lower_bound_Vk")]
    counts_ok = all(r.counts["descent[z*]"] == 200 and r.counts["lower_bound_V"] == 1000
                    and r.counts["lower_bound_Vk"] == 1000 for r in reports)
    failing = [(j, r.first_failure) for j, r in enumerate(reports)
               if r.first_failure and not r.first_failure["check"].startswith("sampler")]
    ok = (not failing and counts_ok and min(descent) >= -1e-9 and min(bounds) >= 0.0
          and elapsed < 30.0)
    verdict(capsys, 2, ok, f"20 instances x 200 iterations, worst descent slack "
                           f"{min(descent):.2e}, worst bound margin {min(bounds):.2e}, "
                           f"{elapsed:.1f} s (includes C3 checks)")


def test_c3_sampler_identities(capsys, property_reports):
    reports, _ = property_reports
    exact_ok = all(r.counts.get("sampler_identities_exact", 0) == 200 for r in reports)
    exact_ok &= not any(r.first_failure and r.first_failure["check"] == "sampler_identities_exact"
                        for r in reports)
    worst = max(-r.worst["sampler_identities_exact"] for r in reports)
    # Monte Carlo: one mid-run state per instance, 1e5 draws, every observable
    z, err = [], []
    for j, prob in enumerate(small_instances()):
        steps = default_step_sizes(prob.A)
        smp = sampling.uniform(prob.n, j)
        state = SolverState.initial(prob)
        for _ in range(100):
            spdhg_step(state, prob, steps, smp)
        rep = check_sampler_identities(state, prob, steps, smp, exact=False, n_draws=100_000,
                                       seed=j)
        # deviation in units of the checker's band (3 standard errors plus a rounding floor)
        err += list(rep.errors.values())
        z += [(d["mc_mean"] - d["target"]) / d["stderr"] for d in rep.details.values()
              if d["stderr"] > 1e-12 * max(1.0, abs(d["target"]))]
    z, err = np.array(z), 3.0 * np.array(err)
    # 3 sigma per check; the family of checks is held to the same false-alarm rate
    z_family = float(stats.norm.isf(stats.norm.sf(3.0) / err.size))
    beyond3 = int(np.sum(err > 3.0))
    calibrated = abs(z.mean()) < 4.0 / np.sqrt(z.size) and 0.7 < z.std() < 1.3
    ok = exact_ok and worst <= 1e-10 and calibrated and err.max() <= z_family
    verdict(capsys, 3, ok, f"exact worst relative error {worst:.1e} (tol 1e-10); Monte Carlo "
                           f"1e5 draws: {err.size} checks, {beyond3} beyond 3 sigma (expected "
                           f"{2 * stats.norm.sf(3.0) * err.size:.2f}), max |z| "
                           f"{err.max():.2f} <= family-wise 3-sigma band "
                           f"{z_family:.2f}, z mean {z.mean():.2f} std {z.std():.2f}")


def test_c4_function_calculus(capsys):
    rng = np.random.default_rng(4)
    t0 = time.perf_counter()
    report = checks.CheckReport()
    b = rng.standard_normal(5)
    catalog = {"zero": Zero(), "l1": L1(0.7), "sq": SquaredL2(1.3), "point": IndicatorPoint(b),
               "ls": LeastSquares(b), "hinge": Hinge(0.4), "hinge_neg": Hinge(0.4, -1.0),
               "sum": SeparableSum([L1(0.2), LeastSquares(b[:2])], [3, 2])}
    for label, fn in catalog.items():
        checks.check_function_calculus(fn, 5, rng, report, trials=200, label=label)
    grid = np.linspace(-50.0, 50.0, 100_001)
    one_d = [(lambda t: 0.8 * np.abs(t), L1(0.8)), (lambda t: 0.65 * t * t, SquaredL2(1.3)),
             (lambda t: 0.5 * (t - 0.3) ** 2, LeastSquares([0.3])),
             (lambda t: 0.6 * np.maximum(0.0, 1.0 - t), Hinge(0.6))]
    grid_err = 0.0
    for fun, fn in one_d:
        vals = fun(grid)
        for y in rng.uniform(-0.6, 0.6, 50):
            grid_err = max(grid_err, abs(fn.conj_value(y) - float(np.max(grid * y - vals)))
                           if np.isfinite(fn.conj_value(y)) else 0.0)
    elapsed = time.perf_counter() - t0
    ok = report.passed and grid_err <= 1e-3 and elapsed < 10.0
    verdict(capsys, 4, ok, f"{sum(report.counts.values())} Moreau/optimality/Fenchel-Young "
                           f"checks, conjugate grid error {grid_err:.1e}, {elapsed:.2f} s")


def test_c5_linear_convergence(capsys, linear_runs, desk_problems):
    lines, ok = [], True
    for name in desk_problems:
        good = 0
        for it, vals in linear_runs[name]:
            n = desk_problems[name].n
            fit = rate_fit(it, vals)
            reached = np.any((vals <= 1e-6) & (it <= 2000 * n))
            good += bool(fit.slope < 0 and fit.r_squared >= 0.9 and reached)
        ok &= good >= 8
        lines.append(f"{name} {good}/10")
    ok &= linear_runs["elapsed"] < 120.0
    verdict(capsys, 5, ok, ", ".join(lines) + f" seeds linear to 1e-6; "
                                              f"{linear_runs['elapsed']:.1f} s")


def test_c6_ergodic_rates(capsys):
    t0 = time.perf_counter()
    Ks = (100, 1000, 10_000)

    def ergodic(prob, metrics):
        vals = {m: {K: [] for K in Ks} for m in metrics}
        steps = default_step_sizes(prob.A)
        for seed in range(20):
            cfg = RunConfig(max_iters=Ks[-1], log_every=100, metrics=metrics, track_ergodic=True)
            for rec in run(prob, steps, sampling.uniform(prob.n, seed), cfg).log:
                if rec.iter in Ks:
                    for m in metrics:
                        vals[m][rec.iter].append(rec.metrics[m])
        return steps, {m: [K * np.mean(vals[m][K]) for K in Ks] for m in metrics}

    bp = gen_basis_pursuit(GeneratorSpec(kind="basis_pursuit", **DESK))[0]
    certify_reference(bp, "planted", 1e-12)
    steps, est = ergodic(bp, ("feasibility_avg", "objective_residual_avg"))
    ce = theory_constant_ce(bp, steps)
    ok_bp = (max(est["feasibility_avg"]) <= ce.ce3
             and max(est["objective_residual_avg"]) <= ce.ce2)

    svm = generate(GeneratorSpec(kind="svm_hinge", n=100, p=200, sparsity=0, lam=0.1))
    certify_reference(svm, "pdhg_oracle", 1e-12)
    steps, est_svm = ergodic(svm, ("objective_residual_avg",))
    ce_svm = theory_constant_ce(svm, steps)
    ok_svm = max(est_svm["objective_residual_avg"]) <= ce_svm.ce1
    elapsed = time.perf_counter() - t0
    ok = ok_bp and ok_svm and elapsed < 300.0
    verdict(capsys, 6, ok,
            f"max K*feas {max(est['feasibility_avg']):.3g} <= Ce3 {ce.ce3:.3g}; "
            f"max K*g-res {max(est['objective_residual_avg']):.3g} <= Ce2 {ce.ce2:.3g}; "
            f"SVM max K*obj {max(est_svm['objective_residual_avg']):.3g} <= Ce1 "
            f"{ce_svm.ce1:.3g}; {elapsed:.1f} s")


def test_c7_every_trajectory_converges(capsys, linear_runs, desk_problems):
    worst = {name: max(float(np.min(vals)) for _, vals in linear_runs[name])
             for name in desk_problems}
    ok = all(v <= 1e-4 for v in worst.values())
    verdict(capsys, 7, ok, "worst final distance per instance: "
            + ", ".join(f"{k} {v:.1e}" for k, v in worst.items()))


def test_c8_oracle_equivalences(capsys, desk_problems):
    ridge = desk_problems["ridge"]
    M, b = ridge.A.toarray(), ridge.meta["b"]
    x_ne = np.linalg.solve(M.T @ M + np.eye(ridge.p), M.T @ b)
    ridge_err = float(np.max(np.abs(ridge.reference.x_star - x_ne)))

    single = ridge.single_block()
    cfg = RunConfig(max_iters=300, log_every=10, metrics=("kkt_residual", "dist_to_ref"))
    a = pdhg_run(ridge, config=cfg)
    b_run = run(single, pdhg_step_sizes(single.A), sampling.uniform(1, 5), cfg)
    identical = (np.array_equal(a.state.x, b_run.state.x)
                 and np.array_equal(a.state.y, b_run.state.y)
                 and all(r.metrics == s.metrics for r, s in zip(a.log, b_run.log)))

    rng = np.random.default_rng(8)
    u = np.linspace(-10, 10, 2001)[:, None]
    v = np.linspace(-10, 10, 2001)[None, :]
    gap_err = 0.0
    for _ in range(3):
        a_, c, lam, xb, yb, xh, yh = rng.uniform(-1.5, 1.5, 7)
        prob = SaddleProblem(L1(abs(lam)), SeparableSum([LeastSquares([c])], [1]),
                             BlockLinearOperator.from_dense([[a_]]))
        g = lambda t: abs(lam) * np.abs(t)
        fs = lambda s: 0.5 * s * s + c * s
        H = g(xb) + a_ * xb * v - fs(v) - g(u) - a_ * u * yb + fs(yb)
        oracle = float(np.max(H - 0.5 * (u - xh) ** 2 - 0.5 * (v - yh) ** 2))
        closed = smoothed_gap((np.array([xb]), np.array([yb])),
                              (np.array([xh]), np.array([yh])), 1.0, 1.0, prob)
        gap_err = max(gap_err, abs(closed - oracle))
    ok = ridge_err <= 1e-8 and identical and gap_err <= 1e-3
    verdict(capsys, 8, ok, f"ridge vs normal equations {ridge_err:.1e}, PDHG == SPDHG(n=1) "
                           f"bitwise: {identical}, smoothed gap vs grid {gap_err:.1e}")


def test_c9_baseline_ordering(capsys, desk_problems):
    prob = desk_problems["basis_pursuit"]
    steps = default_step_sizes(prob.A)
    rows = []
    for seed in SEEDS:
        cfg = RunConfig(max_iters=2000 * prob.n, log_every=prob.n, metrics=("dist_to_ref",),
                        stop_metric="dist_to_ref", stop_tol=1e-4)
        sp = run(prob, steps, sampling.uniform(prob.n, seed), cfg)
        fb = fb_vc_cd_run(prob, cfg, sampling.uniform(prob.n, seed))
        ep_sp = sp.log[-1].epoch if sp.stopped else np.inf
        ep_fb = fb.log[-1].epoch if fb.stopped else np.inf
        rows.append((ep_sp, ep_fb))
    ok = all(np.isfinite(s) and f > s for s, f in rows)
    verdict(capsys, 9, ok, "epochs to 1e-4 (SPDHG vs FB-VC-CD): "
            + ", ".join(f"{s:g}/{f:g}" for s, f in rows))


REPLAY_INI = """
[problem]
kind = ridge
n = 30
p = 12
sparsity = 4
lam = 1.0
seed = 3
block_size = 3

[solver.spdhg]
[solver.pdhg]
[solver.spdhg_mu]
[solver.fb_vc_cd]
[solver.svrg]
[solver.sdca]

[run]
seeds = 0-2
max_epochs = 20
log_every_epochs = 1
metrics = dist_to_ref, kkt_residual, objective_residual_avg
track_ergodic = true

[output]
dir = {out}
"""


def test_c10_replay(capsys, tmp_path):
    first = run_experiment(parse_config(REPLAY_INI.format(out=tmp_path / "first")))
    meta = json.loads((first / "run.json").read_text())
    same = []
    for seed in meta["seeds"]:
        dest = tmp_path / f"replay{seed}"
        assert main(["run", "--config", str(first / "run.json"), "--seed", str(seed),
                     "--out", str(dest)]) == 0
        for method in ("spdhg", "pdhg", "spdhg_mu", "fb_vc_cd", "svrg", "sdca"):
            name = f"{method}_seed{seed}.csv"
            same.append((first / name).read_bytes() == (dest / name).read_bytes())
    ok = all(same) and len(same) == 18
    verdict(capsys, 10, ok, f"{sum(same)}/18 trajectories (6 methods x 3 seeds) replayed "
                            "bit-identically from run.json + seed")
