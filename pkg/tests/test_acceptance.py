"""End-to-end acceptance suite.

Each test exercises one advertised guarantee at its stated tolerance and
prints a single pass/fail line with the measured figures.  Failures here
mean the package does not meet its contract; none of the thresholds below
may be loosened to make a run green.
"""

import time

import numpy as np
import pytest

from optilik.bench_cli import (
    ExperimentConfig,
    bundled_dataset,
    run_classification_benchmark,
    run_convergence_study,
    run_estimation_error_study,
)
from optilik.classify import FlexRuleConfig, fit, predict_flex, predict_qda
from optilik.fr_geometry import (
    FrBall,
    exp_map,
    fr_distance,
    geodesic,
    log_map,
    metric_inner,
    project_fr_ball,
)
from optilik.fr_solver import (
    FrProblem,
    FrSolverOptions,
    objective,
    optimistic_loglik_fr,
    solve,
)
from optilik.kl_solver import (
    KlProblem,
    dual_derivatives_full,
    optimistic_loglik_kl,
    solve_kl,
)

from test_fr_solver import _grid_oracle_2x2


def report(num, ok, detail):
    line = "criterion %d: %s (%s)" % (num, "PASS" if ok else "FAIL", detail)
    print(line)
    assert ok, line


def random_spd(rng, n, spread=2.0):
    basis = np.linalg.eigh(rng.standard_normal((n, n)) * 2)[1]
    eigs = np.exp(rng.uniform(-spread, spread, size=n))
    return (basis * eigs) @ basis.T


def random_sym(rng, n):
    m = rng.standard_normal((n, n))
    return (m + m.T) / 2


def test_criterion_1_fr_geometry_properties():
    start = time.perf_counter()
    rng = np.random.default_rng(20260801)
    worst = {"sym": 0.0, "inv": 0.0, "cong": 0.0, "geo": 0.0, "speed": 0.0,
             "log": 0.0, "proj": 0.0}
    for n in (2, 5, 10, 30):
        for _ in range(500):
            a = random_spd(rng, n)
            b = random_spd(rng, n)
            d_ab = fr_distance(a, b)
            scale = max(d_ab, 1e-30)
            worst["sym"] = max(worst["sym"],
                               abs(d_ab - fr_distance(b, a)) / scale)
            worst["inv"] = max(
                worst["inv"],
                abs(d_ab - fr_distance(np.linalg.inv(a), np.linalg.inv(b)))
                / scale,
            )
            q = np.linalg.qr(rng.standard_normal((n, n)))[0]
            m = q * rng.uniform(0.5, 2.0, size=n)
            worst["cong"] = max(
                worst["cong"],
                abs(d_ab - fr_distance(m @ a @ m.T, m @ b @ m.T)) / scale,
            )
            g0 = geodesic(a, b, 0.0)
            g1 = geodesic(a, b, 1.0)
            denom = max(np.linalg.norm(a), np.linalg.norm(b))
            worst["geo"] = max(
                worst["geo"],
                max(np.linalg.norm(g0.entries - a),
                    np.linalg.norm(g1.entries - b)) / denom,
            )
            worst["speed"] = max(
                worst["speed"],
                abs(fr_distance(geodesic(a, b, 0.25), geodesic(a, b, 0.75))
                    - 0.5 * d_ab) / scale,
            )
            v = log_map(a, b)
            worst["log"] = max(
                worst["log"],
                abs(np.sqrt(metric_inner(a, v, v)) - d_ab) / scale,
            )
            ball = FrBall(a, 0.5 * d_ab)
            proj = project_fr_ball(ball, b)
            worst["proj"] = max(
                worst["proj"],
                abs(fr_distance(a, proj) - ball.radius) / max(ball.radius, 1e-30),
            )
    elapsed = time.perf_counter() - start
    ok = (
        worst["sym"] <= 1e-10
        and worst["inv"] <= 1e-9
        and worst["cong"] <= 1e-8
        and worst["geo"] <= 1e-8
        and worst["speed"] <= 1e-8
        and worst["log"] <= 1e-8
        and worst["proj"] <= 1e-8
        and elapsed < 30.0
    )
    report(
        1, ok,
        "500 instances per n in {2,5,10,30}; worst rel errors sym=%.1e inv=%.1e "
        "cong=%.1e geo=%.1e speed=%.1e log=%.1e proj=%.1e; %.1fs"
        % (worst["sym"], worst["inv"], worst["cong"], worst["geo"],
           worst["speed"], worst["log"], worst["proj"], elapsed),
    )


def test_criterion_2_fr_solver_oracle_equivalence():
    start = time.perf_counter()
    rng = np.random.default_rng(42)
    radii = (0.1, 0.5, 1.0)
    opts = FrSolverOptions(
        max_iterations=5000,
        step_mode="armijo_backtracking",
        relative_improvement_tol=1e-14,
    )
    worst = 0.0
    for i in range(20):
        cov_hat = random_spd(rng, 2, spread=1.0)
        if i % 2 == 0:
            x = rng.standard_normal(2)
            scatter = np.outer(x, x)
        else:
            pts = rng.standard_normal((6, 2))
            scatter = pts.T @ pts / 6.0
        rho = radii[i % 3]
        rep = solve(FrProblem(FrBall(cov_hat, rho), scatter), opts)
        w, q = np.linalg.eigh(cov_hat)
        isq = (q / np.sqrt(w)) @ q.T
        oracle = _grid_oracle_2x2(isq @ scatter @ isq, rho)
        oracle += float(np.linalg.slogdet(cov_hat)[1])
        worst = max(worst, abs(rep.best_objective - oracle))
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-3 and elapsed < 120.0
    report(2, ok, "20 2x2 instances, max |solve - oracle| = %.2e; %.1fs"
           % (worst, elapsed))


def test_criterion_3_theorem2_guarantee():
    start = time.perf_counter()
    rng = np.random.default_rng(7)
    const_opts = FrSolverOptions(
        max_iterations=2000,
        step_mode="theorem2_constant",
        relative_improvement_tol=1e-300,
    )
    ref_opts = FrSolverOptions(
        max_iterations=200000,
        step_mode="armijo_backtracking",
        relative_improvement_tol=1e-300,
    )
    worst_margin = -np.inf
    for _ in range(10):
        basis = np.linalg.eigh(rng.standard_normal((10, 10)) * 2)[1]
        cov_hat = (basis * rng.uniform(1.0, 10.0, size=10)) @ basis.T
        pts = rng.standard_normal((30, 10)) @ random_spd(rng, 10, spread=0.5)
        scatter = pts.T @ pts / 30.0
        # the step constant is calibrated for unit-scale nominals while the
        # objective gap is invariant under joint rescaling of nominal and
        # scatter, so normalizing lambda_min to 1 loses no generality
        scale = 1.0 / np.linalg.eigvalsh(cov_hat)[0]
        cov_hat = cov_hat * scale
        scatter = scatter * scale
        p = FrProblem(FrBall(cov_hat, 0.3), scatter)
        rep = solve(p, const_opts)
        ref = solve(p, ref_opts)
        gap = objective(p, rep.optimum) - ref.best_objective
        assert gap <= rep.theorem2_bound
        worst_margin = max(worst_margin, gap / rep.theorem2_bound)
    elapsed = time.perf_counter() - start
    ok = elapsed < 300.0
    report(
        3, ok,
        "10 instances n=10 rho=0.3 K=2000: averaged-iterate gap <= bound, "
        "worst gap/bound = %.2e; %.1fs" % (worst_margin, elapsed),
    )


def test_criterion_4_kl_dual_correctness():
    start = time.perf_counter()
    rng = np.random.default_rng(99)
    worst_kkt = 0.0
    worst_slack = 0.0
    worst_gap = 0.0
    worst_path = 0.0
    for i in range(200):
        n = int(rng.integers(2, 21))
        cov_hat = random_spd(rng, n, spread=1.0)
        rho = float(rng.uniform(0.05, 1.5))
        if i % 2 == 0:
            pts = rng.standard_normal((3 * n, n)) @ random_spd(rng, n, 0.5)
            scatter = pts.T @ pts / (3 * n)
            sol = solve_kl(KlProblem(cov_hat, rho, scatter=scatter))
        else:
            f = rng.standard_normal((n, 1))
            scatter = f @ f.T
            sol = solve_kl(KlProblem(cov_hat, rho, factor=f))
            full = solve_kl(KlProblem(cov_hat, rho, scatter=scatter))
            worst_path = max(
                worst_path,
                abs(sol.optimal_value - full.optimal_value),
                abs(sol.gamma_star - full.gamma_star),
            )
        worst_kkt = max(worst_kkt, sol.kkt_residual)
        if sol.gamma_star > 1e-8:
            worst_slack = max(worst_slack, abs(sol.constraint_slack))
            dual_value = n - dual_derivatives_full(
                KlProblem(cov_hat, rho, scatter=scatter), sol.gamma_star
            )[0]
            opt = sol.optimizer.entries
            primal = float(
                np.trace(np.linalg.solve(opt, scatter))
                + np.linalg.slogdet(opt)[1]
            )
            worst_gap = max(worst_gap, abs(primal - dual_value))
    elapsed = time.perf_counter() - start
    ok = (
        worst_kkt <= 1e-8
        and worst_slack <= 1e-7
        and worst_gap <= 1e-7
        and worst_path <= 1e-8
        and elapsed < 60.0
    )
    report(
        4, ok,
        "200 instances n<=20: max |g'(gamma*)|=%.1e, slack=%.1e, "
        "primal-dual gap=%.1e, full-vs-lowrank=%.1e; %.1fs"
        % (worst_kkt, worst_slack, worst_gap, worst_path, elapsed),
    )


def _tail_improvement_slope(trace):
    t = np.asarray(trace, dtype=float)
    diffs = t[:-1] - t[1:]
    k = np.arange(1, len(t))
    half = len(k) // 2
    k, diffs = k[half:], diffs[half:]
    keep = diffs > 0
    if int(keep.sum()) < 5:
        return 0.0
    x = np.log(k[keep])
    y = np.log(diffs[keep] / max(abs(t[-1]), 1.0))
    return float(np.polyfit(x, y, 1)[0])


def _tail_gap_ratio(trace):
    t = np.asarray(trace, dtype=float)
    gaps = (t - t[-1])[:-1]
    tail = gaps[len(gaps) // 2:]
    tail = tail[tail > 0]
    if len(tail) < 3:
        return 0.0
    return float(np.median(tail[1:] / tail[:-1]))


def test_criterion_5_convergence_rate_reproduction():
    start = time.perf_counter()
    cfg = ExperimentConfig(seed=0, trials=10, dims=(10, 30), figures=False)
    # the study's default stopping tolerance truncates traces long before
    # the asymptotic regime; rate measurement needs the full trajectory
    rate_opts = FrSolverOptions(
        max_iterations=1000,
        step_mode="theorem2_constant",
        relative_improvement_tol=1e-300,
    )
    rows = run_convergence_study(cfg, solver_options=rate_opts)
    assert all(row["status"] == "ok" for row in rows)
    slopes = [
        _tail_improvement_slope(row["_trace"])
        for row in rows if row["mode"] == "singular"
    ]
    ratios = [
        _tail_gap_ratio(row["_trace"])
        for row in rows if row["mode"] == "positive_definite"
    ]
    slope = float(np.median(slopes))
    ratio = float(np.median(ratios))
    elapsed = time.perf_counter() - start
    ok = slope <= -1.5 and ratio <= 0.98 and elapsed < 300.0
    report(
        5, ok,
        "n in {10,30}, 10 trials: singular tail slope median %.2f "
        "(worst %.2f), PD tail gap-ratio median %.3f (worst %.3f); %.1fs"
        % (slope, max(slopes), ratio, max(ratios), elapsed),
    )


def test_criterion_6_classification_reproduction():
    start = time.perf_counter()
    try:
        banknote = bundled_dataset("banknote")
        haberman = bundled_dataset("haberman")
    except FileNotFoundError as exc:
        report(6, False, "bundled dataset files are absent: %s" % exc)
        return
    cfg = ExperimentConfig(seed=0, trials=20, figures=False)
    rows = run_classification_benchmark(cfg, [banknote, haberman])
    means = {
        (r["dataset"], r["method"]): 100.0 * r["test_ccr"]
        for r in rows if r["trial"] == "mean"
    }
    kqda = means[("banknote", "KQDA")]
    qda = means[("banknote", "QDA")]
    hab = {m: means[("haberman", m)] for m in ("QDA", "RQDA", "FQDA", "KQDA")}
    elapsed = time.perf_counter() - start
    ok = (
        kqda >= 98.0
        and qda >= 97.0
        and kqda >= qda - 0.3
        and all(70.9 <= v <= 79.4 for v in hab.values())
        and elapsed < 600.0
    )
    report(
        6, ok,
        "banknote KQDA=%.2f QDA=%.2f; haberman %s; %.0fs"
        % (kqda, qda,
           " ".join("%s=%.1f" % kv for kv in sorted(hab.items())), elapsed),
    )


def test_criterion_7_estimation_error_ratio():
    start = time.perf_counter()
    cfg = ExperimentConfig(
        seed=0, trials=100, sample_sizes=(50,), est_dim=10, figures=False
    )
    row = run_estimation_error_study(cfg)[0]
    fr_ratio = row["fr_cov_error"] / row["fr_mean_error"]
    kl_ratio = row["kl_cov_error"] / row["kl_mean_error"]
    elapsed = time.perf_counter() - start
    ok = fr_ratio >= 3.0 and kl_ratio >= 3.0 and elapsed < 60.0
    report(
        7, ok,
        "n=10 N=50 100 trials: cov/mean error ratio FR=%.2f KL=%.2f "
        "(threshold 3.0); %.1fs" % (fr_ratio, kl_ratio, elapsed),
    )


def test_criterion_8_degenerate_limits():
    start = time.perf_counter()
    rng = np.random.default_rng(314)
    mean_a = np.array([1.2, 0.0, -0.5])
    mean_b = np.array([-0.8, 0.6, 0.4])
    cov_a = random_spd(rng, 3, spread=0.8)
    cov_b = random_spd(rng, 3, spread=0.8)
    train = np.vstack([
        rng.multivariate_normal(mean_a, cov_a, size=300),
        rng.multivariate_normal(mean_b, cov_b, size=300),
    ])
    labels = np.array([0] * 300 + [1] * 300)
    model = fit(train, labels)
    test_pts = np.vstack([
        rng.multivariate_normal(mean_a, cov_a, size=500),
        rng.multivariate_normal(mean_b, cov_b, size=500),
    ])
    agree = {}
    for divergence in ("FR", "KL"):
        cfg = FlexRuleConfig(
            divergence=divergence,
            radius_per_class={c: 1e-12 for c in model.classes},
        )
        agree[divergence] = sum(
            predict_flex(model, cfg, x) == predict_qda(model, x)
            for x in test_pts
        )
    fr_opts = FrSolverOptions(
        max_iterations=2000,
        step_mode="armijo_backtracking",
        relative_improvement_tol=1e-12,
    )
    rhos = np.logspace(-3, 0, 10)
    worst_dip = 0.0
    for _ in range(50):
        n = int(rng.integers(2, 6))
        cov_hat = random_spd(rng, n, spread=1.0)
        mu = rng.standard_normal(n)
        obs = rng.standard_normal((1, n)) + mu
        fr_vals = np.array([
            optimistic_loglik_fr(obs, mu, cov_hat, r, options=fr_opts)[0]
            for r in rhos
        ])
        kl_vals = np.array([
            optimistic_loglik_kl(obs, mu, cov_hat, r)[0] for r in rhos
        ])
        worst_dip = max(
            worst_dip,
            float(np.max(np.diff(fr_vals) * -1.0)),
            float(np.max(np.diff(kl_vals) * -1.0)),
        )
    elapsed = time.perf_counter() - start
    ok = (
        agree["FR"] == 1000
        and agree["KL"] == 1000
        and worst_dip <= 1e-8
    )
    report(
        8, ok,
        "rho->0 agreement with plain QDA: FR %d/1000, KL %d/1000; "
        "worst monotonicity dip over 50 instances = %.1e; %.1fs"
        % (agree["FR"], agree["KL"], worst_dip, elapsed),
    )
