"""Command line interface: ``jflow run | verify | report``.

Exit codes: 0 clean, 1 configuration or input error, 2 monitor violation or
failing suite, 3 solver error.
"""

from __future__ import annotations

import argparse
import contextlib
import csv
import json
import logging
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np
import scipy.fft

from . import cone, flow, stationary, verify
from . import geometry as geo
from .config import RunConfig, load_config
from .errors import ConfigError, JFlowError, LedgerFormatError
from .functionals import FunctionalLedger

log = logging.getLogger("jflow")

EXIT_OK, EXIT_CONFIG, EXIT_VIOLATION, EXIT_SOLVER = 0, 1, 2, 3


def _threads(args) -> int | None:
    if args.threads is not None:
        return args.threads
    env = os.environ.get("JFLOW_THREADS")
    if env:
        try:
            return int(env)
        except ValueError:
            raise ConfigError(f"JFLOW_THREADS must be an integer, got {env!r}") from None
    return None


def _workers(k: int | None):
    return scipy.fft.set_workers(k) if k else contextlib.nullcontext()


def _setup_header(setup, t: float, kind: str) -> dict:
    return {"n": setup.n, "m": setup.m, "N": setup.grid.N, "t": t, "c": setup.c, "kind": kind}


def execute_run(cfg: RunConfig, out: Path) -> int:
    """Build the scenario, solve, integrate, and write every artifact to ``out``."""
    spec = cone.get_scenario(cfg.scenario, N=cfg.N, seed=cfg.seed)
    if cfg.n is not None and cfg.n != spec.n:
        raise ConfigError(f"scenario {spec.name!r} has n={spec.n}", field="n")
    if cfg.m is not None and cfg.m != spec.m:
        spec = replace(spec, m=cfg.m)
    spec = replace(spec, mask_delta=cfg.mask_delta)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.ini").write_text(cfg.to_text())
    setup, phi0, spec = cone.prepare(spec)
    geo.write_snapshot(out / "setup.bin", _setup_header(setup, 0.0, "setup"),
                       [("chi", setup.chi), ("chi_tilde", setup.chi_tilde), ("omega", setup.omega),
                        ("phi0", phi0)])
    psi = None
    if cfg.solve_stationary:
        sol = stationary.solve_elliptic(setup, tol=cfg.tol_stationary)
        psi = sol.psi
        geo.write_snapshot(out / "psi.bin", _setup_header(setup, 0.0, "psi"), [("psi", psi)])
    fc = cfg.flow_config()
    fc.snapshot_dir = out if cfg.snapshot_every else None
    traj, ledger, report = flow.run(setup, phi0, fc, psi=psi)
    by_t = {row["t"]: row.get("violations", []) for row in report.rows}
    for row in ledger.rows:
        row["violations"] = list(by_t.get(row["t"], []))
    ledger.write_jsonl(out / "ledger.jsonl")
    flow.save_state(out / "phi_final.bin", traj.final, setup)
    summary = report.to_dict()
    summary.update({"scenario": spec.name, "c": setup.c, "converged": traj.converged,
                    "t_final": traj.final.t, "steps": traj.steps})
    if psi is not None:
        cmp_ = stationary.compare_flow_limit(traj.final.phi, sol, setup, traj.mask, phi0)
        summary["stationary"] = {"residual": sol.residual_norm, "iterations": sol.newton_iterations,
                                 "spread": cmp_.spread, "K": cmp_.K, "sup_difference": cmp_.sup_difference}
    (out / "monitor.json").write_text(json.dumps(summary, indent=2, default=float))
    print(f"{spec.name}: t={traj.final.t:.6g} steps={traj.steps} converged={traj.converged} "
          f"violations={report.violations or 'none'}")
    return EXIT_VIOLATION if report.violations else EXIT_OK


def cmd_run(args) -> int:
    cfg = load_config(args.config) if args.config else RunConfig()
    changes = {}
    if args.out:
        changes["out_dir"] = args.out
    if args.seed is not None:
        changes["seed"] = args.seed
    if changes:
        cfg = replace(cfg, **changes).validate()
    with _workers(_threads(args)):
        return execute_run(cfg, Path(cfg.out_dir))


def cmd_verify(args) -> int:
    target = args.target or (args.config if args.config else "default")
    full = target == "all"
    if target not in ("all", "default"):
        load_config(target)  # validates; suites regenerate their own scenarios
    with _workers(_threads(args)):
        results = verify.run_suites(full=full)
    width = max(len(r.name) for r in results)
    for r in results:
        print(f"{'PASS' if r.passed else 'FAIL'}  {r.name:<{width}}  {r.seconds:7.2f}s  {r.detail}")
    failed = [r.name for r in results if not r.passed]
    if failed:
        print(f"failing properties: {', '.join(failed)}")
        return EXIT_VIOLATION
    return EXIT_OK


REPORT_SCALARS = ("t", "dt", "sup_dphidt", "inf_dphidt", "ratio_min", "ratio_max", "phi_min", "phi_max",
                  "w_max", "combined", "dissipation", "theorem_norm")


def write_report(ledger: FunctionalLedger, out: Path) -> tuple[Path, Path]:
    out.mkdir(parents=True, exist_ok=True)
    n = ledger.n
    csv_path = out / "ledger.csv"
    with open(csv_path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(list(REPORT_SCALARS) + [f"J_{i}" for i in range(n + 1)] + ["violations"])
        for row in ledger.rows:
            w.writerow([repr(float(row.get(k, float("nan")))) for k in REPORT_SCALARS]
                       + [repr(float(v)) for v in row["J"]] + [";".join(row.get("violations", []))])
    J = ledger.J
    t = ledger.times
    drift = J[:, n] - J[0, n]
    sup_abs = np.maximum(np.abs(ledger.column("sup_dphidt")), np.abs(ledger.column("inf_dphidt")))
    plot_path = out / "plot.dat"
    data = np.column_stack([t, ledger.column("combined"), drift, sup_abs, ledger.column("w_max")])
    np.savetxt(plot_path, data, header="t combined Jn_drift sup_abs_dphidt w_max")
    return csv_path, plot_path


def cmd_report(args) -> int:
    path = Path(args.ledger)
    try:
        ledger = FunctionalLedger.read_jsonl(path)
    except OSError as exc:
        print(f"error: cannot read ledger: {exc.strerror}", file=sys.stderr)
        return EXIT_CONFIG
    except LedgerFormatError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out = Path(args.out) if args.out else path.parent
    csv_path, plot_path = write_report(ledger, out)
    print(f"wrote {csv_path} ({len(ledger)} rows) and {plot_path}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="jflow", description="Generalized J-flow laboratory on flat tori")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="INI run configuration")
    common.add_argument("--out", help="output directory")
    common.add_argument("--threads", type=int, help="FFT worker threads (fallback: JFLOW_THREADS)")
    common.add_argument("--seed", type=int, help="seed for random scenario perturbations")
    common.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)
    p = sub.add_parser("run", parents=[common], help="integrate one scenario")
    p.set_defaults(func=cmd_run)
    p = sub.add_parser("verify", parents=[common], help="run the property suites")
    p.add_argument("target", nargs="?", help="config path, or 'all' for the long suites too")
    p.set_defaults(func=cmd_verify)
    p = sub.add_parser("report", parents=[common], help="CSV and plot data from a ledger")
    p.add_argument("ledger")
    p.set_defaults(func=cmd_report)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except JFlowError as exc:
        print(f"solver error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_SOLVER

