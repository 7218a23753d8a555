"""Acceptance suite: one test per shipping criterion, run with ``pytest -v``.

Criteria 7-10 are statistical reproductions of the benchmark scenarios; they
compare meta-repetition win rates and mean bands rather than bit-exact
numbers, because the reference realizations are not published.
"""

import time

import numpy as np

from regret_ls.baselines import solve_ls, solve_reg_ls
from regret_ls.cli import main
from regret_ls.experiments import (
    convolution_matrix,
    run_scenario,
    scenario_config,
    sweep_bounds,
)
from regret_ls.formulations import (
    ProblemSpec,
    StructureSpec,
    VARIANT_FULL,
    VARIANT_MATRIX_ONLY,
    VARIANT_VECTOR_ONLY,
    coefficients_for,
    default_variant,
    solve_regret_ls,
    solve_regret_reg_ls,
    solve_regret_structured,
    taylor_regularized,
    taylor_structured,
    taylor_unstructured,
)
from regret_ls.linalg import col_unstack, pseudo_inverse
from regret_ls.perturbations import (
    PerturbationSample,
    approx_regret,
    exact_regret,
    finite_difference_gradients,
    sample_perturbation,
    worst_case_perturbation,
)
from regret_ls.sdp import LmiBlock, LmiSystem, SolveStatus, solve


def random_complex(rng, *shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


def unit_instance(rng, m, n):
    h = random_complex(rng, m, n)
    y = random_complex(rng, m)
    return h / np.linalg.norm(h), y / np.linalg.norm(y)


def toeplitz_spec(rng, n=3, taps=3, delta=0.8):
    h = convolution_matrix(random_complex(rng, taps), n)
    m = h.shape[0]
    h_basis = tuple(convolution_matrix(np.eye(taps)[i], n) for i in range(taps))
    y_basis = tuple(np.eye(m, dtype=np.complex128)[:, i] for i in range(taps))
    return ProblemSpec(
        h=h,
        y=random_complex(rng, m),
        structure=StructureSpec(h_basis, y_basis, delta, delta),
    )


def relative_error(d_an, d_fd, b_an, b_fd):
    scale = max(float(np.linalg.norm(d_fd)), float(np.linalg.norm(b_fd)), 1e-12)
    return max(float(np.linalg.norm(d_an - d_fd)), float(np.linalg.norm(b_an - b_fd))) / scale


def test_criterion_01_gradient_suite():
    # all three coefficient variants vs Wirtinger central differences on 100
    # unit-norm instances with 3 <= n < m <= 8, under 10 seconds
    start = time.perf_counter()
    rng = np.random.default_rng(1001)
    worst = 0.0
    for _ in range(100):
        m = int(rng.integers(4, 9))
        n = int(rng.integers(3, m))
        h, y = unit_instance(rng, m, n)

        c = taylor_unstructured(h, y)
        d_fd, b_fd = finite_difference_gradients(h, y, "unstructured")
        worst = max(worst, relative_error(col_unstack(c.d, m, n), d_fd, c.b, b_fd))

        mu = float(rng.uniform(0.2, 2.0))
        c = taylor_regularized(h, y, mu)
        d_fd, b_fd = finite_difference_gradients(h, y, "regularized", mu=mu)
        worst = max(worst, relative_error(col_unstack(c.d, m, n), d_fd, c.b, b_fd))

        p = int(rng.integers(1, 4))
        h_basis = [random_complex(rng, m, n) for _ in range(p)]
        y_basis = [random_complex(rng, m) for _ in range(p)]
        c = taylor_structured(h, y, h_basis, y_basis)
        d_fd, b_fd = finite_difference_gradients(
            h, y, "structured", h_basis=h_basis, y_basis=y_basis
        )
        worst = max(worst, relative_error(c.d, d_fd, c.b, b_fd))
    elapsed = time.perf_counter() - start
    assert worst < 1e-5, f"worst relative gradient error {worst:.3e}"
    assert elapsed < 10.0, f"gradient suite took {elapsed:.1f}s"


def test_criterion_02_degenerate_bound_recovery():
    # zero uncertainty bounds must reproduce plain LS and ridge exactly
    rng = np.random.default_rng(1002)
    for _ in range(50):
        m = int(rng.integers(4, 7))
        n = int(rng.integers(2, m))
        h, y = random_complex(rng, m, n), random_complex(rng, m)
        spec = ProblemSpec(h=h, y=y, delta_h=0.0, delta_y=0.0)
        est = solve_regret_ls(spec, variant=VARIANT_FULL)
        assert np.linalg.norm(est.x_hat - pseudo_inverse(h) @ y) < 1e-6
        assert abs(est.gamma_star) < 1e-6

        mu = float(rng.uniform(0.2, 2.0))
        spec = ProblemSpec(h=h, y=y, delta_h=0.0, delta_y=0.0, mu=mu)
        est = solve_regret_reg_ls(spec)
        assert np.linalg.norm(est.x_hat - solve_reg_ls(h, y, mu)) < 1e-6
        assert abs(est.gamma_star) < 1e-6


def test_criterion_03_single_bound_variant_consistency():
    # the full formulation with one bound zeroed must agree with the
    # dedicated single-bound formulation
    rng = np.random.default_rng(1003)
    for case in range(50):
        m = int(rng.integers(4, 7))
        n = int(rng.integers(2, m))
        h, y = random_complex(rng, m, n), random_complex(rng, m)
        delta = float(rng.uniform(0.1, 1.0))
        if case % 2 == 0:
            spec = ProblemSpec(h=h, y=y, delta_h=delta, delta_y=0.0)
            reduced = solve_regret_ls(spec, variant=VARIANT_MATRIX_ONLY)
        else:
            spec = ProblemSpec(h=h, y=y, delta_h=0.0, delta_y=delta)
            reduced = solve_regret_ls(spec, variant=VARIANT_VECTOR_ONLY)
        full = solve_regret_ls(spec, variant=VARIANT_FULL)
        assert np.linalg.norm(full.x_hat - reduced.x_hat) < 1e-6
        assert abs(full.gamma_star - reduced.gamma_star) < 1e-7


def test_criterion_04_certificate_tightness():
    # at each optimum the extracted worst case attains the certified value,
    # and 10^4 random perturbations never beat it
    rng = np.random.default_rng(1004)
    cases = []
    spec = ProblemSpec(
        h=random_complex(rng, 5, 3), y=random_complex(rng, 5), delta_h=0.6, delta_y=0.5
    )
    cases.append((spec, solve_regret_ls(spec)))
    spec = ProblemSpec(
        h=random_complex(rng, 4, 2), y=random_complex(rng, 4), delta_h=0.5, delta_y=0.4, mu=0.7
    )
    cases.append((spec, solve_regret_reg_ls(spec)))
    spec = toeplitz_spec(rng)
    cases.append((spec, solve_regret_structured(spec)))

    for tag, (spec, est) in enumerate(cases):
        assert est.report.status is SolveStatus.OPTIMAL
        coeffs = coefficients_for(spec, est.variant)
        worst = worst_case_perturbation(est.x_hat, spec, est, coeffs)
        achieved = approx_regret(est.x_hat, worst, spec, coeffs)
        assert est.gamma_star - 1e-4 <= achieved <= est.gamma_star + 1e-8, (
            f"case {tag}: achieved {achieved!r} vs certificate {est.gamma_star!r}"
        )
        for i in range(10_000):
            s = sample_perturbation(spec, (1004, tag, i), matrix_norm="frobenius")
            assert approx_regret(est.x_hat, s, spec, coeffs) <= est.gamma_star + 1e-6


def test_criterion_05_taylor_remainder_order():
    # |exact - approximated| regret shrinks at least quadratically in the
    # perturbation scale on 20 instances across all three variants
    delta = 0.1
    for i in range(20):
        rng = np.random.default_rng((1005, i))
        kind = i % 3
        if kind == 2:
            spec = toeplitz_spec(rng, delta=delta)
            x = solve_ls(spec.h, spec.y)
        else:
            h, y = random_complex(rng, 5, 3), random_complex(rng, 5)
            mu = 0.6 if kind == 1 else 0.0
            spec = ProblemSpec(h=h, y=y, delta_h=delta, delta_y=delta, mu=mu)
            x = solve_reg_ls(h, y, mu) if mu else solve_ls(h, y)
        coeffs = coefficients_for(spec, default_variant(spec))
        base = sample_perturbation(spec, (1005, i))
        scales = (1.0, 0.5, 0.25, 0.125)
        gaps = []
        for t in scales:
            if base.mode == "structured":
                s = PerturbationSample(mode="structured", alpha=t * base.alpha, beta=t * base.beta)
            else:
                s = PerturbationSample(mode="unstructured", dh=t * base.dh, dy=t * base.dy)
            gaps.append(abs(exact_regret(x, s, spec) - approx_regret(x, s, spec, coeffs)))
        slope = float(np.polyfit(np.log(scales), np.log(gaps), 1)[0])
        assert slope >= 1.8, f"instance {i}: log-log slope {slope:.3f}"


def test_criterion_06_solver_regression_set():
    # 25 problems: eigenvalue LMIs with known optima, single-bound problems
    # with a closed-form optimum, and every formulation at random data
    rng = np.random.default_rng(1006)
    solved = 0

    def check(status, gap, oracle_err=None):
        nonlocal solved
        assert status is SolveStatus.OPTIMAL
        assert gap < 1e-7, f"duality gap {gap:.3e}"
        if oracle_err is not None:
            assert oracle_err < 1e-6, f"objective error {oracle_err:.3e}"
        solved += 1

    # 10 eigenvalue problems: minimize gamma with gamma I - A >= 0
    for case in range(10):
        dims = (int(rng.integers(2, 7)),) if case < 8 else (3, int(rng.integers(2, 5)))
        mats = []
        for d in dims:
            a = random_complex(rng, d, d)
            mats.append(0.5 * (a + a.conj().T))
        blocks = tuple(
            LmiBlock(f0=-a, coeffs=(np.eye(a.shape[0], dtype=np.complex128),)) for a in mats
        )
        sol = solve(LmiSystem(num_vars=1, objective=np.array([1.0]), blocks=blocks))
        oracle = max(float(np.linalg.eigvalsh(a)[-1]) for a in mats)
        check(sol.status, sol.duality_gap, abs(sol.objective_value - oracle))

    # 5 vector-bound-only problems: optimal regret is exactly delta^2
    for _ in range(5):
        m = int(rng.integers(4, 7))
        n = int(rng.integers(2, m))
        delta = float(rng.uniform(0.2, 1.2))
        spec = ProblemSpec(
            h=random_complex(rng, m, n), y=random_complex(rng, m), delta_y=delta
        )
        est = solve_regret_ls(spec)
        check(
            est.report.status,
            est.report.duality_gap,
            abs(est.gamma_star - delta**2),
        )

    # 5 full problems at the benchmark size, each under one second
    for _ in range(5):
        spec = ProblemSpec(
            h=random_complex(rng, 5, 3),
            y=random_complex(rng, 5),
            delta_h=float(rng.uniform(0.2, 1.2)),
            delta_y=float(rng.uniform(0.2, 1.2)),
        )
        start = time.perf_counter()
        est = solve_regret_ls(spec, variant=VARIANT_FULL)
        elapsed = time.perf_counter() - start
        assert elapsed < 1.0, f"solve took {elapsed:.2f}s"
        check(est.report.status, est.report.duality_gap)

    # 2 matrix-bound-only, 1 regularized, 2 structured
    for _ in range(2):
        spec = ProblemSpec(
            h=random_complex(rng, 4, 2), y=random_complex(rng, 4), delta_h=0.6
        )
        est = solve_regret_ls(spec)
        check(est.report.status, est.report.duality_gap)
    spec = ProblemSpec(
        h=random_complex(rng, 4, 3), y=random_complex(rng, 4), delta_h=0.4, delta_y=0.4, mu=0.8
    )
    est = solve_regret_reg_ls(spec)
    check(est.report.status, est.report.duality_gap)
    for _ in range(2):
        est = solve_regret_structured(toeplitz_spec(rng))
        check(est.report.status, est.report.duality_gap)

    assert solved == 25


def test_criterion_07_benchmark_fig1():
    # mean residual ordering rgrt-ls < ls < rbst-ls < tls in >= 70% of 20
    # repetitions, rgrt-ls mean within 30% of 1.1928 in >= 80%, under 10 min
    start = time.perf_counter()
    ordered = 0
    in_band = 0
    for rep in range(20):
        cfg = scenario_config("fig1", master_seed=rep, trials=1000, redraw_nominal=True)
        mu = {k: s.mean for k, s in run_scenario(cfg).summaries.items()}
        ordered += mu["rgrt-ls"] < mu["ls"] < mu["rbst-ls"] < mu["tls"]
        in_band += abs(mu["rgrt-ls"] - 1.1928) <= 0.3 * 1.1928
    elapsed = time.perf_counter() - start
    assert ordered >= 14, f"ordering held in {ordered}/20 repetitions"
    assert in_band >= 16, f"mean in band in {in_band}/20 repetitions"
    assert elapsed < 600.0, f"scenario took {elapsed:.0f}s"


def test_criterion_08_benchmark_fig2_sweep():
    # rgrt-ls has the lowest mean residual at every swept bound in >= 70%
    # of 10 repetitions
    wins = 0
    for rep in range(10):
        cfg = scenario_config("fig2", master_seed=rep, trials=1000)
        result = sweep_bounds(cfg)
        best_everywhere = True
        for delta, scenario in result.scenarios.items():
            means = {k: s.mean for k, s in scenario.summaries.items()}
            if min(means, key=means.get) != "rgrt-ls":
                best_everywhere = False
        wins += best_everywhere
    assert wins >= 7, f"rgrt-ls swept every bound in {wins}/10 repetitions"


def test_criterion_09_benchmark_fig4_regularized():
    # mean(rgrt-reg-ls) < mean(rbst-reg-ls) in >= 80% of 20 repetitions and
    # rgrt-reg-ls mean within 30% of 0.9059 in >= 70%
    ordered = 0
    in_band = 0
    for rep in range(20):
        cfg = scenario_config("fig4", master_seed=rep, trials=500, redraw_nominal=True)
        mu = {k: s.mean for k, s in run_scenario(cfg).summaries.items()}
        ordered += mu["rgrt-reg-ls"] < mu["rbst-reg-ls"]
        in_band += abs(mu["rgrt-reg-ls"] - 0.9059) <= 0.3 * 0.9059
    assert ordered >= 16, f"ordering held in {ordered}/20 repetitions"
    assert in_band >= 14, f"mean in band in {in_band}/20 repetitions"


def test_criterion_10_benchmark_fig3_structured():
    # mean(str-rgrt-ls) < mean(str-rbst-ls) in >= 70% of 20 repetitions
    ordered = 0
    for rep in range(20):
        cfg = scenario_config("fig3", master_seed=rep, trials=200, redraw_nominal=True)
        mu = {k: s.mean for k, s in run_scenario(cfg).summaries.items()}
        ordered += mu["str-rgrt-ls"] < mu["str-rbst-ls"]
    assert ordered >= 14, f"ordering held in {ordered}/20 repetitions"


def test_criterion_11_reproduce_determinism(tmp_path):
    # identical seeds give byte-identical CSVs, serial or threaded
    jobs = (
        (["reproduce", "--fig", "1", "--seed", "3", "--trials", "4"], "fig1"),
        (["reproduce", "--fig", "2", "--seed", "3", "--trials", "2"], "fig2"),
        (["reproduce", "--fig", "3", "--seed", "3", "--trials", "3"], "fig3"),
        (["reproduce", "--fig", "4", "--seed", "3", "--trials", "4"], "fig4"),
    )
    for argv, prefix in jobs:
        outputs = []
        for run, threads in enumerate(("1", "4", "1")):
            outdir = tmp_path / f"{prefix}_{run}"
            code = main(argv + ["--threads", threads, "--outdir", str(outdir)])
            assert code == 0
            csvs = sorted(p.name for p in outdir.glob("*.csv"))
            assert csvs, f"{prefix}: no CSV output"
            outputs.append({name: (outdir / name).read_bytes() for name in csvs})
        assert outputs[0] == outputs[1], f"{prefix}: serial vs threaded differ"
        assert outputs[0] == outputs[2], f"{prefix}: rerun differs"
