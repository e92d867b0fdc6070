"""Command line entry point: ``phidca run | compare | list-fixtures``."""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import analysis
from .core import ConfigError, PhiDCAError
from .driver import SolverOptions, reference_inf_F, run_phi_dca, run_phi_dca_averaged
from .fixtures import fixture_names
from .forward import forward_step
from .traceio import read_trace_csv, write_report, write_trace_csv, x_columns

EXIT_OK, EXIT_CHECKS, EXIT_CONFIG, EXIT_DOMAIN = 0, 1, 2, 3


def decrease_check(trace, inner_tol):
    """Decrease identity with the tolerance matching the backward solver in use."""
    worst_rel = 0.0
    for r in trace.records:
        if not np.isfinite(r.decrease_residual):
            continue
        F_ref = r.F_w if r.F_w is not None else r.F_value
        if r.solver_used == "ClosedForm":
            tol = 1e-8 * (1.0 + abs(F_ref))
        else:
            tol = 10.0 * inner_tol
        worst_rel = max(worst_rel, abs(r.decrease_residual) / tol)
    return worst_rel <= 1.0, analysis.check_decrease_identity(trace)


def _envelope_bound(check, problem, x0):
    c = problem.coupling
    r0 = check.get("r0")
    if r0 is None:
        if problem.known_minimizer is None:
            raise ConfigError("envelope check needs r0 or a fixture with a known minimizer")
        r0 = float(np.linalg.norm(x0 - problem.known_minimizer))
    kind = check["bound"]
    if kind == "hoelder":
        return analysis.hoelder_bound(check.get("H", getattr(c, "H", None)), check.get("nu", getattr(c, "nu", None)), r0)
    if kind == "tensor":
        return analysis.tensor_bound(check.get("p", getattr(c, "p", None)), check.get("L_p", getattr(c, "L_p", None)), r0)
    h = getattr(c, "h", None)
    L_h = check.get("L_h", getattr(h, "smoothness", None))
    return analysis.aniso_bound(check.get("L", getattr(c, "L", None)), L_h, r0)


def _grid(problem, spacing):
    if problem.dim > 2 or problem.grid_lower is None:
        raise ConfigError("grid checks need a fixture of dimension <= 2 with a grid box")
    return analysis.Grid(problem.grid_lower, problem.grid_upper, spacing)


def run_checks(cfg, problem, x0, trace, opts):
    certificates, failures = [], []
    inf_cache = {}

    def inf_F(check):
        if check.get("inf_F") is not None:
            return float(check["inf_F"]), False
        if "v" not in inf_cache:
            inf_cache["v"] = reference_inf_F(problem, x0, opts)
        return inf_cache["v"]

    for check in cfg.checks:
        kind = check["kind"]
        try:
            if kind == "decrease":
                ok, worst = decrease_check(trace, cfg.inner_tol)
                if not ok:
                    failures.append(f"decrease: residual {worst:.3e} above tolerance")
            elif kind == "envelope":
                bound = _envelope_bound(check, problem, x0)
                value, _ = inf_F(check)
                cert = analysis.check_sublinear_envelope(trace, bound, value)
                certificates.append(cert.as_dict())
                if not cert.passed:
                    failures.append(f"envelope: max violation {cert.fields['max_violation']:.3e}")
            elif kind == "qlinear":
                value, estimated = inf_F(check)
                cert = analysis.certify_q_linear(trace, value, check["mu1"], check.get("mu2", 0.0), estimated)
                certificates.append(cert.as_dict())
                if not cert.passed:
                    failures.append(f"qlinear: worst ratio {cert.fields['worst_ratio']:.6g} above bound "
                                    f"{cert.fields['bound']:.6g}")
            elif kind == "subgradient-grid":
                grid = _grid(problem, check.get("spacing", 1e-3))
                tol = check.get("tol", 1e-6)
                xK = trace.final_x
                y = forward_step(problem, xK)
                vf = analysis.verify_phi_subgradient(problem.f, problem.coupling, xK, y, grid)
                vg = analysis.verify_phi_subgradient(problem.g, problem.coupling, xK, y, grid)
                if max(vf, vg) > tol:
                    failures.append(f"subgradient-grid: violation f {vf:.3e}, g {vg:.3e}")
            elif kind == "oracle-grid":
                spacing = check.get("spacing", 1e-3)
                grid = _grid(problem, spacing)
                for r in trace.records[: int(check.get("records", 3))]:
                    xg = analysis.grid_backward(problem, r.y, grid)
                    dev = float(np.max(np.abs(xg - r.x_next)))
                    if dev > spacing * (1 + 1e-9):
                        failures.append(f"oracle-grid: record {r.k} deviates by {dev:.3e}")
        except PhiDCAError as exc:
            failures.append(f"{kind}: {type(exc).__name__}: {exc}")
    return certificates, failures


def execute_run(cfg, out_override=None):
    """Run one configuration, persist its trace and report; returns the exit code."""
    out = out_override or cfg.output_dir
    if not out:
        raise ConfigError("no output directory: set output_dir or pass --out")
    problem = cfg.build_problem()
    x0 = cfg.start(problem)
    opts = SolverOptions(max_iter=cfg.max_iter, gap_tol=cfg.gap_tol, inner_tol=cfg.inner_tol,
                         averaging_p=cfg.p, schedule=cfg.schedule, record_timing=cfg.record_timing,
                         min_iter=cfg.min_iter)
    runner = run_phi_dca_averaged if cfg.averaged else run_phi_dca
    trace = runner(problem, x0, opts, config_digest=cfg.digest())
    write_trace_csv(trace, os.path.join(out, "trace.csv"), problem.dim)
    if trace.terminated_by == "DomainError":
        certificates, failures = [], [f"solver: {trace.message}"]
    else:
        certificates, failures = run_checks(cfg, problem, x0, trace, opts)
    last = trace.records[-1] if trace.records else None
    report = {
        "final_F": float(trace.final_F) if trace.final_F is not None else None,
        "final_gap_sum": float(last.gap_primal + last.gap_dual) if last else None,
        "iterations": len(trace.records),
        "certificates": certificates,
        "check_failures": failures,
    }
    write_report(report, os.path.join(out, "report.json"))
    if trace.terminated_by == "DomainError":
        print(f"phidca: run stopped by {trace.message}", file=sys.stderr)
        return EXIT_DOMAIN
    for f in failures:
        print(f"phidca: check failed: {f}", file=sys.stderr)
    return EXIT_CHECKS if failures else EXIT_OK


def cmd_run(config_path, out=None):
    from .config import load_config

    try:
        runs = load_config(config_path)
        if out and len(runs) > 1:
            outs = [os.path.join(out, f"run{i}") for i in range(len(runs))]
        else:
            outs = [out] * len(runs)
        codes = [execute_run(cfg, o) for cfg, o in zip(runs, outs)]
    except ConfigError as exc:
        print(f"phidca: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return max(codes)


def compare_traces(path_a, path_b):
    """Max coordinate deviation of the iterates over the common prefix of two traces."""
    ha, da = read_trace_csv(path_a)
    hb, db = read_trace_csv(path_b)
    xa, xb = x_columns(ha, da), x_columns(hb, db)
    if xa.shape[1] != xb.shape[1]:
        raise ValueError(f"dimension mismatch: {xa.shape[1]} vs {xb.shape[1]}")
    n = min(len(xa), len(xb))
    if n == 0:
        return 0.0, len(xa), len(xb)
    return float(np.max(np.abs(xa[:n] - xb[:n]))), len(xa), len(xb)


def cmd_compare(path_a, path_b, tol):
    try:
        dev, na, nb = compare_traces(path_a, path_b)
    except (OSError, ValueError) as exc:
        print(f"phidca: cannot compare: {exc}", file=sys.stderr)
        return EXIT_CHECKS
    if na != nb:
        print(f"note: traces have {na} and {nb} records; compared the first {min(na, nb)}")
    print(f"max deviation: {dev:.17g}")
    return EXIT_OK if dev <= tol else EXIT_CHECKS


def cmd_list_fixtures():
    for name in fixture_names():
        print(name)
    return EXIT_OK


def build_parser():
    p = argparse.ArgumentParser(prog="phidca", description="Φ-DCA runs, trace comparison and fixtures.")
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run a configuration and write trace.csv and report.json")
    r.add_argument("--config", required=True)
    r.add_argument("--out", default=None, help="output directory (overrides output_dir)")
    c = sub.add_parser("compare", help="max iterate deviation between two traces")
    c.add_argument("trace_a")
    c.add_argument("trace_b")
    c.add_argument("--tol", type=float, required=True)
    sub.add_parser("list-fixtures", help="print the fixture catalog")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    if args.command == "run":
        return cmd_run(args.config, args.out)
    if args.command == "compare":
        return cmd_compare(args.trace_a, args.trace_b, args.tol)
    return cmd_list_fixtures()


if __name__ == "__main__":
    sys.exit(main())
