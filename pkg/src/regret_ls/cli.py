"""Command-line front door: solve | reproduce | sweep | validate.

Exit codes: 0 success, 1 usage error, 2 solver failure, 3 validation-suite
failure.  Diagnostics go to standard error; data goes to files under
``--outdir`` or to standard output.  The default seed is 0, overridable by
the REGRET_LS_SEED environment variable and by --seed.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys

import numpy as np

from .baselines import NongenericTlsError
from .experiments import (
    ESTIMATORS,
    ExperimentConfig,
    run_scenario,
    scenario_config,
    sweep_bounds,
    write_metadata_json,
    write_sorted_csv,
    write_summary_csv,
    write_sweep_csv,
)
from .formulations import (
    ProblemSpec,
    RankDeficiencyError,
    RegretEstimate,
    SolverContractError,
)
from .linalg import SvdConvergenceError

_USAGE_EXIT = 1
_SOLVER_EXIT = 2
_VALIDATION_EXIT = 3

_SOLVE_FAILURES = (
    SolverContractError,
    NongenericTlsError,
    RankDeficiencyError,
    SvdConvergenceError,
)


class _Parser(argparse.ArgumentParser):
    """argparse that reports usage problems via exit code 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        raise _UsageError(message)


class _UsageError(Exception):
    pass


def _default_seed() -> int:
    raw = os.environ.get("REGRET_LS_SEED", "")
    try:
        return int(raw)
    except ValueError:
        return 0


def _build_parser() -> _Parser:
    parser = _Parser(prog="regret-ls", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p_solve = sub.add_parser("solve", help="solve one problem file with one estimator")
    p_solve.add_argument("--problem", required=True, help="problem JSON path")
    p_solve.add_argument("--estimator", required=True, choices=sorted(ESTIMATORS))
    p_solve.add_argument("--format", choices=("csv", "json"), default="json")

    p_rep = sub.add_parser("reproduce", help="run a benchmark scenario and write CSVs")
    p_rep.add_argument("--fig", required=True, type=int, choices=(1, 2, 3, 4))
    p_rep.add_argument("--seed", type=int, default=None)
    p_rep.add_argument("--trials", type=int, default=1000)
    p_rep.add_argument("--outdir", default=".")
    p_rep.add_argument("--threads", type=int, default=None)

    p_sweep = sub.add_parser("sweep", help="run a bound sweep from a config file")
    p_sweep.add_argument("--config", required=True, help="ExperimentConfig JSON path")
    p_sweep.add_argument("--seed", type=int, default=None)
    p_sweep.add_argument("--outdir", default=".")
    p_sweep.add_argument("--threads", type=int, default=None)

    p_val = sub.add_parser("validate", help="run a self-check suite")
    p_val.add_argument("--suite", required=True, choices=("gradients", "solver", "tightness"))
    p_val.add_argument("--seed", type=int, default=None)
    return parser


def _load_json(path: str) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as f:
            return json.load(f)
    except FileNotFoundError:
        raise _UsageError(f"no such file: {path}")
    except json.JSONDecodeError as exc:
        raise _UsageError(
            f"malformed JSON in {path}: {exc.msg} at line {exc.lineno} column {exc.colno}"
        )


def _vector_json(x: np.ndarray) -> list:
    return [[float(v.real), float(v.imag)] for v in x]


def _cmd_solve(args) -> int:
    obj = _load_json(args.problem)
    try:
        spec = ProblemSpec.from_json(obj)
    except (KeyError, ValueError, TypeError) as exc:
        raise _UsageError(f"bad problem file: {exc}")
    name = args.estimator
    from .formulations import solve_regret_ls, solve_regret_reg_ls, solve_regret_structured

    regret_solvers = {
        "rgrt-ls": solve_regret_ls,
        "rgrt-reg-ls": solve_regret_reg_ls,
        "str-rgrt-ls": solve_regret_structured,
    }
    gamma = None
    try:
        if name in regret_solvers:
            est: RegretEstimate = regret_solvers[name](spec)
            x_hat = est.x_hat
            gamma = est.gamma_star
            stats = f"sdp:{est.report.status.value}:{est.report.iterations}"
        else:
            x_hat, stats = ESTIMATORS[name](spec, None)
    except _SOLVE_FAILURES as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return _SOLVER_EXIT
    if args.format == "json":
        out = {"estimator": name, "x_hat": _vector_json(x_hat), "solver": stats}
        if gamma is not None:
            out["gamma_star"] = gamma
        json.dump(out, sys.stdout, indent=2, sort_keys=True)
        sys.stdout.write("\n")
    else:
        print("index,re,im")
        for i, v in enumerate(x_hat):
            print(f"{i},{v.real:.17g},{v.imag:.17g}")
        if gamma is not None:
            print(f"gamma_star,{gamma:.17g},0")
    return 0


def _cmd_reproduce(args) -> int:
    seed = args.seed if args.seed is not None else _default_seed()
    name = f"fig{args.fig}"
    config = scenario_config(name, master_seed=seed, trials=args.trials, threads=args.threads)
    os.makedirs(args.outdir, exist_ok=True)
    base = os.path.join(args.outdir, name)
    if config.sweep_grid:
        result = sweep_bounds(config)
        write_sweep_csv(result, base + "_sweep.csv")
        write_metadata_json(result, base + "_metadata.json")
        print(f"wrote {base}_sweep.csv", file=sys.stderr)
        return 0
    result = run_scenario(config)
    write_sorted_csv(result, base + "_sorted.csv")
    write_summary_csv(result, base + "_summary.csv")
    # single-point sweep file keeps the three-file schema uniform
    delta = config.delta_alpha if config.taps else config.delta_h
    rows = []
    for est in config.estimators:
        s = result.summaries[est]
        r = s.sorted_residuals
        stderr = float(r.std(ddof=1) / np.sqrt(r.size)) if r.size > 1 else float("nan")
        rows.append((delta, est, s.mean, stderr))
    sweep_like = dataclasses.replace(config, sweep_grid=(delta,))
    from .experiments import SweepResult

    write_sweep_csv(SweepResult(config=sweep_like, rows=tuple(rows), scenarios={}), base + "_sweep.csv")
    write_metadata_json(result, base + "_metadata.json")
    print(f"wrote {base}_{{sorted,summary,sweep}}.csv", file=sys.stderr)
    return 0


def _cmd_sweep(args) -> int:
    obj = _load_json(args.config)
    if "estimators" in obj:
        obj["estimators"] = tuple(obj["estimators"])
    if "sweep_grid" in obj:
        obj["sweep_grid"] = tuple(obj["sweep_grid"])
    if args.seed is not None:
        obj["master_seed"] = args.seed
    if args.threads is not None:
        obj["threads"] = args.threads
    try:
        config = ExperimentConfig(**obj)
    except (TypeError, ValueError) as exc:
        raise _UsageError(f"bad config file: {exc}")
    os.makedirs(args.outdir, exist_ok=True)
    base = os.path.join(args.outdir, config.scenario or "sweep")
    result = sweep_bounds(config)
    write_sweep_csv(result, base + "_sweep.csv")
    write_metadata_json(result, base + "_metadata.json")
    print(f"wrote {base}_sweep.csv", file=sys.stderr)
    return 0


def _suite_gradients(seed: int) -> list:
    """100 random instances: analytic coefficients vs finite differences."""
    from .formulations import taylor_regularized, taylor_structured, taylor_unstructured
    from .perturbations import finite_difference_gradients

    failures = []
    rng = np.random.default_rng((seed, 101))
    for case in range(100):
        m = int(rng.integers(2, 6))
        n = int(rng.integers(1, m + 1))
        h = rng.standard_normal((m, n)) + 1j * rng.standard_normal((m, n))
        y = rng.standard_normal(m) + 1j * rng.standard_normal(m)
        kind = case % 3
        if kind == 0:
            coeffs = taylor_unstructured(h, y)
            from .linalg import col_unstack

            d_fd, b_fd = finite_difference_gradients(h, y, "unstructured")
            d_an = col_unstack(coeffs.d, m, n)
        elif kind == 1:
            mu = float(rng.uniform(0.2, 2.0))
            coeffs = taylor_regularized(h, y, mu)
            from .linalg import col_unstack

            d_fd, b_fd = finite_difference_gradients(h, y, "regularized", mu=mu)
            d_an = col_unstack(coeffs.d, m, n)
        else:
            p = int(rng.integers(1, 4))
            h_basis = [rng.standard_normal((m, n)) + 1j * rng.standard_normal((m, n)) for _ in range(p)]
            y_basis = [rng.standard_normal(m) + 1j * rng.standard_normal(m) for _ in range(p)]
            coeffs = taylor_structured(h, y, h_basis, y_basis)
            d_fd, b_fd = finite_difference_gradients(
                h, y, "structured", h_basis=h_basis, y_basis=y_basis
            )
            d_an = coeffs.d
        scale = max(1.0, float(np.linalg.norm(d_fd)), float(np.linalg.norm(b_fd)))
        err = max(
            float(np.linalg.norm(d_an - d_fd)), float(np.linalg.norm(coeffs.b - b_fd))
        ) / scale
        if err > 1e-5:
            failures.append(f"case {case}: gradient mismatch {err:.2e}")
    return failures


def _suite_solver(seed: int) -> list:
    """25 random LMI problems must solve to certified optimality."""
    from .formulations import assemble_lmi
    from .sdp import SolveStatus, solve

    failures = []
    rng = np.random.default_rng((seed, 202))
    for case in range(25):
        m = int(rng.integers(2, 6))
        n = int(rng.integers(1, m + 1))
        h = rng.standard_normal((m, n)) + 1j * rng.standard_normal((m, n))
        y = rng.standard_normal(m) + 1j * rng.standard_normal(m)
        spec = ProblemSpec(
            h=h,
            y=y,
            delta_h=float(rng.uniform(0.05, 1.5)),
            delta_y=float(rng.uniform(0.05, 1.5)),
        )
        try:
            system = assemble_lmi(spec)
            solution = solve(system)
        except _SOLVE_FAILURES as exc:
            failures.append(f"case {case}: {exc}")
            continue
        if solution.status is not SolveStatus.OPTIMAL:
            failures.append(f"case {case}: status {solution.status.value}")
            continue
        slack = min(system.min_eigenvalues(solution.z_star))
        if slack < -1e-6:
            failures.append(f"case {case}: infeasible certificate ({slack:.2e})")
        rel_gap = solution.duality_gap / max(1.0, abs(solution.objective_value))
        if rel_gap > 1e-5:
            failures.append(f"case {case}: wide gap {rel_gap:.2e}")
    return failures


def _suite_tightness(seed: int) -> list:
    """Certificates must be attained by the extracted worst-case perturbation."""
    from .formulations import coefficients_for, solve_regret_ls
    from .perturbations import approx_regret, worst_case_perturbation

    failures = []
    rng = np.random.default_rng((seed, 303))
    for case in range(10):
        m = int(rng.integers(3, 6))
        n = int(rng.integers(1, m))
        h = rng.standard_normal((m, n)) + 1j * rng.standard_normal((m, n))
        y = rng.standard_normal(m) + 1j * rng.standard_normal(m)
        spec = ProblemSpec(
            h=h,
            y=y,
            delta_h=float(rng.uniform(0.1, 1.0)),
            delta_y=float(rng.uniform(0.1, 1.0)),
        )
        try:
            est = solve_regret_ls(spec)
        except _SOLVE_FAILURES as exc:
            failures.append(f"case {case}: {exc}")
            continue
        coeffs = coefficients_for(spec, est.variant)
        worst = worst_case_perturbation(est.x_hat, spec, est, coeffs)
        achieved = approx_regret(est.x_hat, worst, spec, coeffs)
        if not (est.gamma_star - 1e-4 <= achieved <= est.gamma_star + 1e-8):
            failures.append(
                f"case {case}: achieved {achieved:.6f} vs gamma* {est.gamma_star:.6f}"
            )
    return failures


_SUITES = {
    "gradients": _suite_gradients,
    "solver": _suite_solver,
    "tightness": _suite_tightness,
}


def _cmd_validate(args) -> int:
    seed = args.seed if args.seed is not None else _default_seed()
    failures = _SUITES[args.suite](seed)
    for line in failures:
        print(line, file=sys.stderr)
    if failures:
        print(f"suite {args.suite}: FAIL ({len(failures)} failures)")
        return _VALIDATION_EXIT
    print(f"suite {args.suite}: PASS")
    return 0


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command == "solve":
            return _cmd_solve(args)
        if args.command == "reproduce":
            return _cmd_reproduce(args)
        if args.command == "sweep":
            return _cmd_sweep(args)
        return _cmd_validate(args)
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return _USAGE_EXIT


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
