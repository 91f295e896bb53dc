"""Command-line driver.

Subcommands: solve, pool-compare, precision-sweep, validate, riccati-check,
wedge-export.  Structured results go to JSON, tabular/plot data to CSV with
a header row; all files are written atomically (temp file + rename).  Exit
codes: 0 success, 1 failed validation or non-converged solve (artifacts are
still written), 2 malformed input.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
import tempfile

import numpy as np

from .analysis import (effort_metrics, expected_cost, pooling_comparison,
                       precision_sweep)
from .core import GridError
from .equilibrium import (SolverConfig, kalman_bucy_cov, mean_spike_sensitivity,
                          picard_solve, riccati_single_player)
from .filtering import kernel_blocks
from .forward import StrategyProfile, forward_closure
from .model import (ScenarioParams, SpecError, build_scenario, load_scenario)
from .oracle import (exact_discrete_projection, kernel_projection_map,
                     monte_carlo_cost, simulate_closed_loop)


def _atomic_write(path: str, text: str):
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _write_json(path: str, payload: dict):
    _atomic_write(path, json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _write_csv(path: str, header, rows):
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(header)
    for row in rows:
        writer.writerow(row)
    _atomic_write(path, buf.getvalue())


def _scenario(args) -> tuple[ScenarioParams, "object"]:
    if args.scenario:
        params, spec = load_scenario(args.scenario)
    else:
        params = ScenarioParams()
        spec = build_scenario(params)
    if args.grid_n:
        from dataclasses import replace
        params = replace(params, N=args.grid_n)
        spec = build_scenario(params)
    return params, spec


def _config(args) -> SolverConfig:
    return SolverConfig(tol=args.tol, max_iter=args.max_iter,
                        damping=args.damping)


def cmd_solve(args) -> int:
    params, spec = _scenario(args)
    sol = picard_solve(spec, _config(args))
    costs = [expected_cost(spec, sol.env, sol.profile, i).total
             for i in range(spec.n)]
    _write_json(os.path.join(args.out, "solution.json"), {
        "converged": bool(sol.converged),
        "iterations": sol.iterations,
        "residual_history": [float(r) for r in sol.residual_history],
        "costs": costs,
        "params": {k: (list(v) if isinstance(v, tuple) else v)
                   for k, v in vars(params).items()},
    })
    rows = []
    for i in range(spec.n):
        for t in range(spec.N):
            rows.append([f"{spec.grid.nodes[t]:.10g}", i + 1,
                         f"{sol.profile.Dbar[i, t, 0]:.12g}",
                         f"{sol.env.Xbar[t, 0]:.12g}",
                         f"{sol.adjoints[i].Vbar[t, 0]:.12g}"])
    _write_csv(os.path.join(args.out, "means.csv"),
               ["t", "player", "Dbar", "Xbar", "Vbar"], rows)
    for i in range(spec.n):
        rows = [[f"{spec.grid.nodes[t]:.10g}", f"{spec.grid.nodes[u]:.10g}", c,
                 f"{sol.profile.D[i, t, u, 0, c]:.12g}"]
                for t in range(spec.N) for u in range(t + 1)
                for c in range(spec.m)]
        _write_csv(os.path.join(args.out, f"policy_kernel_p{i + 1}.csv"),
                   ["t", "u", "noise_coord", "value"], rows)
    if args.retain_filter_slices:
        env = forward_closure(spec, sol.profile, retain_filter_slices=True)
        for i in range(spec.n):
            F = kernel_blocks(env.filters[i].F, spec.m)
            rows = [[f"{spec.grid.nodes[u]:.10g}", f"{spec.grid.nodes[s]:.10g}",
                     a, b, f"{F[u, s, a, b]:.12g}"]
                    for u in range(spec.N) for s in range(spec.N)
                    for a in range(spec.m) for b in range(spec.m)]
            _write_csv(os.path.join(args.out, f"filter_kernel_p{i + 1}.csv"),
                       ["u", "s", "row", "col", "value"], rows)
    return 0 if sol.converged else 1


def cmd_pool_compare(args) -> int:
    params, _ = _scenario(args)
    report = pooling_comparison(params, config=_config(args))
    rows = [[r["p2"], r["player"], f"{r['private_cost']:.12g}",
             f"{r['pooled_cost']:.12g}", f"{r['gain']:.12g}", r["mode"]]
            for r in report.rows]
    _write_csv(os.path.join(args.out, "pooling.csv"),
               ["p2", "player", "private_cost", "pooled_cost", "gain",
                "mode"], rows)
    return 0 if all(r["converged"] for r in report.rows) else 1


def cmd_precision_sweep(args) -> int:
    params, _ = _scenario(args)
    report = precision_sweep(budget=args.budget, costs=(params.r1, params.r2),
                             sigma=params.sigma, base=params,
                             config=_config(args))
    rows = [[f"{r['split']:.6g}", f"{r['effort_1']:.12g}",
             f"{r['effort_2']:.12g}", f"{r['total_effort']:.12g}",
             f"{r['mean_state_T']:.12g}", int(r["converged"])]
            for r in report.rows]
    _write_csv(os.path.join(args.out, "sweep.csv"),
               ["split", "effort_1", "effort_2", "total_effort",
                "mean_state_T", "converged"], rows)
    rows = [[f"{r['split']:.6g}", f"{r['p1']:.8g}", f"{r['p2']:.8g}",
             f"{r['ce_effort_1']:.12g}", f"{r['ce_effort_2']:.12g}",
             f"{r['wedge_max_1']:.12g}", f"{r['wedge_max_2']:.12g}"]
            for r in report.rows]
    _write_csv(os.path.join(args.out, "sweep_detail.csv"),
               ["split", "p1", "p2", "ce_effort_1", "ce_effort_2",
                "wedge_max_1", "wedge_max_2"], rows)
    return 0 if all(r["converged"] for r in report.rows) else 1


def cmd_riccati_check(args) -> int:
    params, _ = _scenario(args)
    from dataclasses import replace
    params = replace(params, mode="single-player")
    spec = build_scenario(params)
    sol = picard_solve(spec, _config(args))
    S, _s = riccati_single_player(spec)
    adj = sol.adjoints[0]
    pred = np.einsum("tde,trem->trdm", S, sol.env.X)
    scale = max(np.abs(pred).max(), 1e-12)
    rel = float(np.abs(adj.H_X - pred).max() / scale)
    ok = sol.converged and rel <= 1e-3
    _write_json(os.path.join(args.out, "riccati.json"), {
        "converged": bool(sol.converged),
        "rel_error": rel,
        "tolerance": 1e-3,
        "passed": bool(ok),
    })
    return 0 if ok else 1


def cmd_wedge_export(args) -> int:
    _params, spec = _scenario(args)
    sol = picard_solve(spec, _config(args))
    rows = []
    for i in range(spec.n):
        for t in range(spec.N):
            rows.append([i + 1, f"{spec.grid.nodes[t]:.10g}", "mean",
                         f"{sol.adjoints[i].Vbar[t, 0]:.12g}"])
    _write_csv(os.path.join(args.out, "wedges.csv"),
               ["player", "t", "component", "value"], rows)
    return 0 if sol.converged else 1


def cmd_validate(args) -> int:
    checks = []

    def record(name, value, tol, ok, larger_is_better=False):
        checks.append({"check": name, "measured": float(value),
                       "tolerance": float(tol), "passed": bool(ok)})

    from dataclasses import replace
    base = ScenarioParams()

    # filtering covariance vs the classical Riccati reference
    prm = replace(base, mode="zero-control-gain", N=160)
    spec = build_scenario(prm)
    env = forward_closure(spec, StrategyProfile.zeros(spec))
    ref = np.tanh(np.sqrt(3.0) * spec.grid.nodes) / np.sqrt(3.0)
    got = env.filters[0].Sigma_XX[:, 0, 0]
    rel = np.abs(got[1:] - ref[1:]).max() / ref[1:].max()
    record("kalman_bucy_rel_error_n160", rel, 2e-2, rel <= 2e-2)

    # filter projection vs exact discrete conditioning
    errs = {}
    for N in (10, 20):
        prm = replace(base, N=N)
        s = build_scenario(prm)
        prof = StrategyProfile.zeros(s)
        prof.Dbar[:] = 0.3
        for i in range(s.n):
            for t in range(s.N):
                prof.D[i, t, :t + 1, 0, :] = 0.2
        node = N - 1
        exact = exact_discrete_projection(s, prof, 0, node)
        ker = kernel_projection_map(s, prof, 0, node)
        errs[N] = np.abs(ker - exact.projection).max()
    proj_tol = 2.0 * (1.0 / 9)      # C * dt at N = 10
    record("filter_projection_err_n10", errs[10], proj_tol,
           errs[10] <= proj_tol)
    ratio = errs[20] / errs[10]
    record("filter_projection_halving", ratio, 0.65, ratio <= 0.65)

    # benchmark equilibrium properties
    spec = build_scenario(base)
    sol = picard_solve(spec, SolverConfig(tol=args.tol,
                                          max_iter=args.max_iter,
                                          damping=args.damping))
    record("benchmark_residual", sol.residual_history[-1], args.tol,
           sol.converged)
    env = forward_closure(spec, sol.profile, retain_filter_slices=True)
    F = env.filters[0].F
    sym = np.abs(F - F.T).max()
    record("filter_self_adjoint", sym, 1e-14, sym <= 1e-14)
    diss = 0.0
    for t in range(1, spec.N):
        xt = np.linalg.norm(env.filters[0].Xtilde[t, :t])
        xx = np.linalg.norm(env.X[t, :t])
        diss = max(diss, xt - xx)
    record("filter_dissipation_gap", diss, 0.0, diss <= 1e-12)

    # Monte Carlo cost agreement
    ens = simulate_closed_loop(spec, sol, args.paths, seed=args.seed)
    bad = 0.0
    for i in range(spec.n):
        est, se = monte_carlo_cost(ens, spec, i)
        ana = expected_cost(spec, sol.env, sol.profile, i).total
        bad = max(bad, abs(est - ana) / (3 * se))
    record("mc_cost_z3", bad, 1.0, bad <= 1.0)

    # stationarity of the converged profile
    worst = 0.0
    for i in range(spec.n):
        J = expected_cost(spec, sol.env, sol.profile, i).total
        for t0 in np.linspace(0, spec.N - 2, 5).astype(int):
            dJ = mean_spike_sensitivity(spec, sol, i, int(t0))
            worst = max(worst, abs(dJ) / (1e-3 * (1 + abs(J))))
    record("stationarity", worst, 1.0, worst <= 1.0)

    ok = all(c["passed"] for c in checks)
    _write_json(os.path.join(args.out, "validation.json"),
                {"checks": checks, "passed": ok})
    for c in checks:
        status = "pass" if c["passed"] else "FAIL"
        print(f"[{status}] {c['check']}: {c['measured']:.3e} "
              f"(tol {c['tolerance']:.3e})")
    return 0 if ok else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lqgames",
        description="Equilibrium solver for LQG games with endogenous "
                    "signals, plus validation and experiment drivers.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--scenario", help="scenario JSON file")
        p.add_argument("--out", default=".", help="output directory")
        p.add_argument("--tol", type=float, default=1e-5)
        p.add_argument("--max-iter", type=int, default=200)
        p.add_argument("--damping", type=float, default=1.0)
        p.add_argument("--grid-n", type=int, default=0,
                       help="override the number of grid nodes")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--paths", type=int, default=2000,
                       help="Monte Carlo path count")
        p.add_argument("--threads", type=int, default=1,
                       help="worker cap (computations are numpy-bound)")
        p.add_argument("--retain-filter-slices", action="store_true")

    p = sub.add_parser("solve", help="solve a scenario to equilibrium")
    common(p)
    p.set_defaults(func=cmd_solve)
    p = sub.add_parser("pool-compare", help="private vs pooled welfare grid")
    common(p)
    p.set_defaults(func=cmd_pool_compare)
    p = sub.add_parser("precision-sweep", help="precision-budget allocation sweep")
    common(p)
    p.add_argument("--budget", type=float, default=20.0,
                   help="squared-precision budget p1^2 + p2^2")
    p.set_defaults(func=cmd_precision_sweep)
    p = sub.add_parser("validate", help="run the oracle and invariant suite")
    common(p)
    p.set_defaults(func=cmd_validate)
    p = sub.add_parser("riccati-check", help="single-player reduction report")
    common(p)
    p.set_defaults(func=cmd_riccati_check)
    p = sub.add_parser("wedge-export", help="export information-wedge paths")
    common(p)
    p.set_defaults(func=cmd_wedge_export)
    return parser


def run_command(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code not in (0, None) else 0
    try:
        return args.func(args)
    except (SpecError, GridError, ValueError, OSError,
            json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(run_command())


if __name__ == "__main__":
    main()
