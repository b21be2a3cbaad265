"""Named property suites driven by ``jflow verify``.

Each suite returns a :class:`SuiteResult`; the CLI prints one line per suite
and exits nonzero if any fails. Suites regenerate their scenarios from fixed
seeds, so a fresh checkout needs no prior artifacts.
"""

from __future__ import annotations

import math
import tempfile
import time
from dataclasses import dataclass
from math import factorial
from pathlib import Path

import numpy as np

from . import cone, flow, herm
from . import geometry as geo
from . import stationary


@dataclass
class SuiteResult:
    name: str
    passed: bool
    detail: str
    seconds: float = 0.0


def _random_pd(rng, n, complex_=True):
    G = rng.standard_normal((n, n))
    if complex_:
        G = G + 1j * rng.standard_normal((n, n))
    return G @ G.conj().T / n + 0.1 * np.eye(n)


def suite_wedge_oracle(draws: int = 200, seed: int = 11) -> tuple[bool, str]:
    """mixed_wedge_ratio times the A^n volume equals n A^m ^ B^{n-m} from polarization."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for n in (2, 3, 4):
        for _ in range(draws):
            A, B = _random_pd(rng, n), _random_pd(rng, n)
            m = 1 + int(rng.integers(n - 1))
            vol_a = herm.mixed_discriminant([A] * n)
            mixed = herm.mixed_discriminant([A] * m + [B] * (n - m))
            lhs = herm.mixed_wedge_ratio(A, B, m, n) * vol_a
            worst = max(worst, abs(lhs - n * mixed) / abs(n * mixed))
    return worst < 1e-10, f"worst relative error {worst:.2e}"


def suite_partial_sym_identity(draws: int = 200, seed: int = 12) -> tuple[bool, str]:
    """e_k(lam) = e_k(lam without i) + lam_i e_{k-1}(lam without i)."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(draws):
        n = int(rng.integers(2, 6))
        lam = list(rng.uniform(0.1, 3.0, n))
        for k in range(1, n):
            for i in range(n):
                rhs = herm.elem_sym_partial(k, i, lam) + lam[i] * herm.elem_sym_partial(k - 1, i, lam)
                full = herm.elem_sym(k, lam)
                worst = max(worst, abs(full - rhs) / abs(full))
    return worst < 1e-12, f"worst relative error {worst:.2e}"


def suite_cone_oracle(draws: int = 100, seed: int = 13) -> tuple[bool, str]:
    """Cone coefficients from partial symmetric polynomials match the polarization oracle."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for k in range(draws):
        n = 2 + k % 3
        m = 1 + int(rng.integers(n - 1))
        chi, omega = _random_pd(rng, n), _random_pd(rng, n)
        c = float(rng.uniform(0.2, 3.0))
        mu = list(herm.gen_eigen(chi, omega).values)
        w = factorial(m) * factorial(n - m) / factorial(n - 1)
        kappa = np.sort([c * herm.elem_sym_partial(n - 1, i, mu) - w * herm.elem_sym_partial(m - 1, i, mu)
                         for i in range(n)])
        oracle = cone.kappa_oracle(chi, omega, m, c)
        scale = max(1.0, float(np.max(np.abs(oracle))))
        worst = max(worst, float(np.max(np.abs(kappa - oracle))) / scale)
    return worst < 1e-9, f"worst error {worst:.2e}"


def suite_cohomology(seed: int = 14) -> tuple[bool, str]:
    """int X^n does not depend on the potential (discrete Stokes)."""
    spec = cone.get_scenario("strict", N=32, seed=seed)
    setup, phi0, _ = cone.prepare(spec)
    X = geo.HermFormField(setup.grid, setup.base.data + geo.complex_hessian(phi0).data)
    a = geo.wedge_integral([(X, setup.n)], setup.omega)
    b = setup.volume
    rel = abs(a - b) / abs(b)
    return rel < 1e-10, f"relative drift {rel:.2e}"


def _short_run(name: str, N: int, t_max: float, seed: int = 0, interval: float = 0.01):
    spec = cone.get_scenario(name, N=N, seed=seed)
    setup, phi0, _ = cone.prepare(spec)
    cfg = flow.FlowConfig(t_max=t_max, record_interval=interval)
    return setup, phi0, flow.run(setup, phi0, cfg)


_CACHE: dict = {}


def _strict_run():
    if "strict" not in _CACHE:
        _CACHE["strict"] = _short_run("strict", 32, 0.5)
    return _CACHE["strict"]


def suite_conservation() -> tuple[bool, str]:
    """J_n and the normalization quantity stay constant along the flow."""
    setup, phi0, (traj, ledger, report) = _strict_run()
    J = ledger.J[:, setup.n]
    drift = float(np.max(np.abs(J - J[0])) / max(1.0, abs(J[0])))
    tn = ledger.column("theorem_norm")
    ident = float(np.max(np.abs(tn - (setup.n + 1) * J)) / max(1e-300, float(np.max(np.abs(tn)))))
    return drift < 1e-6 and ident < 1e-10, f"J_n drift {drift:.2e}, normalization identity {ident:.2e}"


def suite_monotonicity() -> tuple[bool, str]:
    """The combined functional never decreases and the dissipation is nonnegative."""
    _, _, (traj, ledger, report) = _strict_run()
    comb_ = ledger.column("combined")
    dmin = float(np.min(np.diff(comb_))) if len(comb_) > 1 else 0.0
    diss = float(np.min(ledger.column("dissipation")))
    return dmin >= -1e-8 and diss >= 0.0, f"min increment {dmin:.2e}, min dissipation {diss:.2e}"


def suite_max_principle() -> tuple[bool, str]:
    _, _, (traj, ledger, report) = _strict_run()
    worst = min(c.worst_margin for c in report.checks.values())
    return not report.violations, f"violations {report.violations or 'none'}, worst margin {worst:.2e}"


def suite_solver_comparison() -> tuple[bool, str]:
    """A converged flow agrees with the Newton solution after J_n matching."""
    spec = cone.get_scenario("strict", N=32)
    setup, phi0, _ = cone.prepare(spec)
    sol = stationary.solve_elliptic(setup, tol=1e-10)
    traj, ledger, report = flow.run(setup, phi0, flow.FlowConfig(t_max=20.0, record_interval=1.0,
                                                                  tol_converge=1e-9))
    cmp_ = stationary.compare_flow_limit(traj.final.phi, sol, setup, traj.mask, phi0)
    ok = traj.converged and sol.residual_norm < 1e-10 and cmp_.sup_difference < 1e-5 and cmp_.spread < 1e-6
    return ok, (f"converged={traj.converged} at t={traj.final.t:.3g}, residual {sol.residual_norm:.1e}, "
                f"sup diff {cmp_.sup_difference:.1e}, spread {cmp_.spread:.1e}")


def suite_jacobian(seed: int = 15) -> tuple[bool, str]:
    """Assembled linearization matches central differences of the right-hand side at order 2."""
    rng = np.random.default_rng(seed)
    spec = cone.get_scenario("strict", N=32)
    setup, phi0, _ = cone.prepare(spec)
    orders = []
    for _ in range(3):
        modes = [(0.01 * rng.uniform(0.5, 1), tuple(int(v) for v in rng.integers(-3, 4, 2)), rng.uniform(0, 6))
                 for _ in range(3)]
        delta = geo.trig_potential(setup.grid, modes)
        lin = stationary.linearization_coefficients(flow.make_state(setup, phi0), setup)
        Ld = stationary.apply_linearization(lin, delta.data, setup.grid)
        errs = []
        for eps in (0.1, 0.05):
            fp = flow.flow_rhs(phi0 + delta * eps, setup).data
            fm = flow.flow_rhs(phi0 - delta * eps, setup).data
            errs.append(float(np.max(np.abs((fp - fm) / (2 * eps) - Ld))))
        orders.append(math.log2(errs[0] / errs[1]))
    return min(orders) >= 1.9, f"observed orders {', '.join(f'{o:.2f}' for o in orders)}"


def suite_snapshot_roundtrip() -> tuple[bool, str]:
    spec = cone.get_scenario("boundary", N=16)
    setup = cone.calibrate_boundary_scenario(spec)
    with tempfile.TemporaryDirectory() as d:
        p = Path(d) / "setup.bin"
        geo.write_snapshot(p, {"n": setup.n, "m": setup.m, "N": setup.grid.N, "t": 0.0, "c": setup.c,
                               "kind": "setup"},
                           [("chi", setup.chi), ("chi_tilde", setup.chi_tilde), ("omega", setup.omega)])
        head, arrays = geo.read_snapshot(p)
    ok = all(np.array_equal(arrays[k], getattr(setup, k).data) for k in ("chi", "chi_tilde", "omega"))
    return ok and head["c"] == setup.c, "bit-exact" if ok else "mismatch"


def suite_boundary() -> tuple[bool, str]:
    """Calibrated boundary scenario: admissible throughout and decaying on the mask."""
    spec = cone.get_scenario("boundary", N=32)
    setup, phi0, _ = cone.prepare(spec)
    traj, ledger, report = flow.run(setup, phi0, flow.FlowConfig(t_max=50.0, record_interval=1.0,
                                                                  tol_converge=1e-12))
    s = traj.series("sup_abs_dphidt_mask")
    half = s[len(s) // 2:]
    slope = np.polyfit(np.arange(len(half)), half, 1)[0]
    mins = traj.series("min_eig")
    ok = bool(np.all(mins > 0)) and slope < 0 and not report.violations
    return ok, f"min eigenvalue {np.min(mins):.3g}, final sup {s[-1]:.2e}, trend slope {slope:.2e}"


def suite_artifacts() -> tuple[bool, str]:
    """A run directory holds the config copy, setup, ledger, monitor report and final phi."""
    from .cli import main

    with tempfile.TemporaryDirectory() as d:
        cfg = Path(d) / "run.ini"
        cfg.write_text("[scenario]\nname = trivial\nN = 16\n[flow]\nt_max = 0.1\n")
        out = Path(d) / "out"
        code = main(["run", "--config", str(cfg), "--out", str(out)])
        names = sorted(p.name for p in out.iterdir()) if out.exists() else []
    need = {"config.ini", "setup.bin", "ledger.jsonl", "monitor.json", "phi_final.bin"}
    missing = need - set(names)
    return code == 0 and not missing, f"exit {code}, missing {sorted(missing) or 'none'}"


QUICK = {
    "wedge_oracle": suite_wedge_oracle,
    "elem_sym_partial_identity": suite_partial_sym_identity,
    "cone_oracle": suite_cone_oracle,
    "cohomology_invariance": suite_cohomology,
    "jn_conservation": suite_conservation,
    "combined_monotonicity": suite_monotonicity,
    "max_principle": suite_max_principle,
    "jacobian_consistency": suite_jacobian,
    "snapshot_roundtrip": suite_snapshot_roundtrip,
    "run_artifacts": suite_artifacts,
}
FULL = dict(QUICK, solver_comparison=suite_solver_comparison, boundary_case=suite_boundary)


def run_suites(names=None, full: bool = False) -> list[SuiteResult]:
    table = FULL if full else QUICK
    chosen = list(table) if names is None else list(names)
    _CACHE.clear()
    out = []
    for name in chosen:
        t0 = time.perf_counter()
        try:
            ok, detail = table[name]()
        except Exception as exc:  # a crashing suite is a failing suite
            ok, detail = False, f"{type(exc).__name__}: {exc}"
        out.append(SuiteResult(name, bool(ok), detail, time.perf_counter() - t0))
    return out

