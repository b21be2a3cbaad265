"""Acceptance criteria 1-10, each at its stated tolerance.

Every test prints one ``PASS``/``FAIL`` line; the lines are also collected in
the terminal summary under "acceptance criteria". The long flow runs are
shared through module fixtures.
"""

from __future__ import annotations

import math
import time
from math import factorial

import numpy as np
import pytest

from jflow import cone, flow, herm, stationary
from jflow import functionals as fn
from jflow import geometry as geo
from jflow.flow import GeometrySetup


def _report(log, number: int, ok: bool, detail: str) -> None:
    line = f"{'PASS' if ok else 'FAIL'} criterion {number}: {detail}"
    print(line)
    log.append(line)


def _random_pd(rng, n):
    G = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    return G @ G.conj().T / n + 0.1 * np.eye(n)


def _run(name, N, t_max, interval, tol_converge, psi_tol=1e-10):
    setup, phi0, _ = cone.prepare(cone.get_scenario(name, N=N))
    sol = stationary.solve_elliptic(setup, tol=psi_tol)
    t0 = time.perf_counter()
    traj, ledger, report = flow.run(setup, phi0, flow.FlowConfig(t_max=t_max, record_interval=interval,
                                                                   tol_converge=tol_converge), psi=sol.psi)
    return {"setup": setup, "phi0": phi0, "sol": sol, "traj": traj, "ledger": ledger, "report": report,
            "seconds": time.perf_counter() - t0}


@pytest.fixture(scope="module")
def strict_long():
    """Strict scenario, N = 64, RK4 to t = 5 with dense records."""
    return _run("strict", 64, 5.0, 0.002, 1e-14)


@pytest.fixture(scope="module")
def strict_converged():
    """Strict scenario, N = 64, run until sup over the mask of |d phi/dt| < 1e-8."""
    return _run("strict", 64, 100.0, 0.5, 1e-8)


@pytest.fixture(scope="module")
def boundary_long():
    """Calibrated boundary scenario, N = 64, to t = 200."""
    return _run("boundary", 64, 200.0, 1.0, 1e-12)


# -- 1 ---------------------------------------------------------------------------


def test_criterion_1_wedge_oracle(acceptance_log):
    rng = np.random.default_rng(20240101)
    t0 = time.perf_counter()
    worst_ratio = worst_kappa = 0.0
    for n in (2, 3, 4):
        for _ in range(1000):
            A, B = _random_pd(rng, n), _random_pd(rng, n)
            m = 1 + int(rng.integers(n - 1))
            oracle = n * herm.mixed_discriminant([A] * m + [B] * (n - m)) / herm.mixed_discriminant([A] * n)
            got = herm.mixed_wedge_ratio(A, B, m, n)
            worst_ratio = max(worst_ratio, abs(got - oracle) / abs(oracle))
            c = float(rng.uniform(0.2, 3.0))
            mu = herm.gen_eigen(A, B).values
            kappa = np.sort(herm.cone_form_coefficients(mu, m, c))
            slow = cone.kappa_oracle(A, B, m, c)
            # relative to the size of the two terms whose difference forms kappa
            w = factorial(m) * factorial(n - m) / factorial(n - 1)
            scale = float(np.max(c * herm.elem_sym_partial_all(mu, n - 1)
                                 + w * herm.elem_sym_partial_all(mu, m - 1)))
            worst_kappa = max(worst_kappa, float(np.max(np.abs(kappa - slow))) / scale)
    secs = time.perf_counter() - t0
    ok = worst_ratio < 1e-10 and worst_kappa < 1e-10 and secs < 30
    _report(acceptance_log, 1, ok, f"wedge ratio rel err {worst_ratio:.2e}, cone coefficients rel err "
                                   f"{worst_kappa:.2e} over 3x1000 draws in {secs:.1f}s")
    assert ok


# -- 2 ---------------------------------------------------------------------------


def test_criterion_2_jn_conservation(strict_long, acceptance_log):
    ledger, setup = strict_long["ledger"], strict_long["setup"]
    J = ledger.J[:, setup.n]
    drift = float(np.max(np.abs(J - J[0])) / max(1.0, abs(J[0])))
    t_end = ledger.times[-1]
    ok = drift < 1e-6 and t_end == pytest.approx(5.0) and strict_long["seconds"] < 300
    _report(acceptance_log, 2, ok, f"J_n relative drift {drift:.2e} to t={t_end:g} "
                                   f"({strict_long['traj'].steps} RK4 steps, {strict_long['seconds']:.0f}s)")
    assert ok


# -- 3 ---------------------------------------------------------------------------


def test_criterion_3_dissipation(strict_long, acceptance_log):
    ledger = strict_long["ledger"]
    t, d, diss, rel = fn.dissipation_check(ledger)
    comb = ledger.column("combined")
    min_inc = float(np.min(np.diff(comb)))
    worst = float(np.max(rel)) if len(rel) else math.inf
    ok = len(rel) > 0 and worst < 1e-3 and min_inc >= -1e-8
    _report(acceptance_log, 3, ok, f"d/dt combined vs dissipation worst rel err {worst:.2e} at {len(rel)} "
                                   f"interior times; min increment {min_inc:.2e}")
    assert ok


# -- 4 ---------------------------------------------------------------------------


def test_criterion_4_max_principle(strict_long, acceptance_log):
    L = strict_long["ledger"]
    sup, inf = L.column("sup_dphidt"), L.column("inf_dphidt")
    rmin, rmax = L.column("ratio_min"), L.column("ratio_max")
    env = min(float(np.min(sup[0] - sup)), float(np.min(inf - inf[0])))
    renv = min(float(np.min((rmax[0] - rmax) / abs(rmax[0]))), float(np.min((rmin - rmin[0]) / abs(rmin[0]))))
    sign = min(float(np.min(sup)), float(np.min(-inf)))
    ok = env >= -1e-6 and renv >= -1e-6 and sign >= -1e-8 and not strict_long["report"].violations
    _report(acceptance_log, 4, ok, f"envelope margin {env:.2e}, ratio margin {renv:.2e}, "
                                   f"sign bracket margin {sign:.2e}")
    assert ok


# -- 5 ---------------------------------------------------------------------------


def test_criterion_5_strict_convergence(strict_converged, acceptance_log):
    r = strict_converged
    traj, sol, setup = r["traj"], r["sol"], r["setup"]
    cmp_ = stationary.compare_flow_limit(traj.final.phi, sol, setup, traj.mask, r["phi0"])
    ok = (traj.converged and traj.final.t <= 100 and sol.residual_norm < 1e-10
          and cmp_.sup_difference < 1e-5 and cmp_.spread < 1e-6 and r["seconds"] < 900)
    _report(acceptance_log, 5, ok, f"converged={traj.converged} at t={traj.final.t:.3g}; Newton residual "
                                   f"{sol.residual_norm:.1e}; sup diff {cmp_.sup_difference:.1e}; "
                                   f"spread {cmp_.spread:.1e}")
    assert ok


# -- 6 ---------------------------------------------------------------------------


def test_criterion_6_c0_bound(strict_long, strict_converged, boundary_long, acceptance_log):
    worst_up = worst_lo = math.inf
    worst_corrected = math.inf
    for r in (strict_long, strict_converged, boundary_long):
        L = r["ledger"]
        pmax, pmin = L.column("phi_max"), L.column("phi_min")
        psi_norm = float(np.max(np.abs(r["sol"].psi.data)))
        worst_up = min(worst_up, float(np.min(pmax[0] + psi_norm + 1e-4 - pmax)))
        worst_lo = min(worst_lo, float(np.min(pmin - (pmin[0] - 1e-4))))
        worst_corrected = min(worst_corrected, float(np.min(pmin - (pmin[0] - psi_norm - 1e-4))))
    ok = worst_up >= 0 and worst_lo >= 0
    _report(acceptance_log, 6, ok, f"upper margin {worst_up:.3g}; literal lower margin {worst_lo:.3g} "
                                   f"(bound min phi0 - 1e-4); margin against min phi0 - |psi| - 1e-4 is "
                                   f"{worst_corrected:.3g}")
    assert worst_corrected >= 0
    assert ok


# -- 7 ---------------------------------------------------------------------------


def test_criterion_7_boundary_case(boundary_long, acceptance_log):
    traj, L = boundary_long["traj"], boundary_long["ledger"]
    mins = traj.series("min_eig")
    s = traj.series("sup_abs_dphidt_mask")
    t = traj.times
    half = t >= 0.5 * t[-1]
    slope = float(np.polyfit(t[half], s[half], 1)[0])
    tn = L.column("theorem_norm")
    tn_drift = float(np.max(np.abs(tn - tn[0])) / max(1.0, abs(tn[0])))
    ok = (bool(np.all(mins > 0)) and t[-1] == pytest.approx(200.0) and s[-1] < 1e-4 and slope < 0
          and tn_drift < 1e-5)
    _report(acceptance_log, 7, ok, f"min eigenvalue {np.min(mins):.3g}; sup mask |d phi/dt| at t={t[-1]:g} "
                                   f"is {s[-1]:.2e}; last-half slope {slope:.2e}; normalization drift "
                                   f"{tn_drift:.2e}")
    assert ok


# -- 8 ---------------------------------------------------------------------------


def test_criterion_8_second_order(strict_long, strict_converged, boundary_long, acceptance_log):
    parts = []
    ok = True
    for label, r in (("strict t=5", strict_long), ("strict converged", strict_converged),
                     ("boundary", boundary_long)):
        g = r["report"].fits["global"]
        ok &= bool(g["stabilized"]) and g["max_rel_change_last_quarter"] < 0.01
        parts.append(f"{label} A={g['A']:.3g} C={g['C']:.4g} change {g['max_rel_change_last_quarter']:.1e}")
    mt = boundary_long["report"].fits["mask_time"]
    ok &= bool(mt["t_independent"])
    parts.append(f"boundary mask growth exp({mt['growth_log']:.2e})")
    _report(acceptance_log, 8, ok, "; ".join(parts))
    assert ok


# -- 9 ---------------------------------------------------------------------------


def test_criterion_9_jacobian(acceptance_log):
    rng = np.random.default_rng(99)
    states = []
    for name, N, count in (("strict", 64, 4), ("boundary", 64, 2), ("strict3", 32, 2), ("strict3m2", 32, 2)):
        setup, phi0, _ = cone.prepare(cone.get_scenario(name, N=N))
        for _ in range(count):
            modes = [(0.002 * rng.uniform(0.5, 1), tuple(int(v) for v in rng.integers(-2, 3, setup.n)),
                      rng.uniform(0, 6.3)) for _ in range(3)]
            states.append((setup, phi0 + geo.trig_potential(setup.grid, modes)))
    orders = []
    for setup, phi in states:
        lin = stationary.linearization_coefficients(flow.make_state(setup, phi), setup)
        modes = [(0.01 * rng.uniform(0.5, 1), tuple(int(v) for v in rng.integers(-3, 4, setup.n)),
                  rng.uniform(0, 6.3)) for _ in range(3)]
        delta = geo.trig_potential(setup.grid, modes)
        Ld = stationary.apply_linearization(lin, delta.data, setup.grid)
        errs = []
        for eps in (0.2, 0.1, 0.05):
            d = flow.flow_rhs(phi + delta * eps, setup).data - flow.flow_rhs(phi - delta * eps, setup).data
            errs.append(float(np.max(np.abs(d / (2 * eps) - Ld))))
        orders.append(min(math.log2(errs[0] / errs[1]), math.log2(errs[1] / errs[2])))
    ok = len(orders) == 10 and min(orders) >= 1.9
    _report(acceptance_log, 9, ok, f"min observed order {min(orders):.3f} over {len(orders)} states")
    assert ok


# -- 10 --------------------------------------------------------------------------


def test_criterion_10_closed_form_cone(acceptance_log):
    rng = np.random.default_rng(10)
    grid = geo.PeriodicGrid(2, 4)
    mismatches = 0
    labels = {cone.STRICT: 0, cone.BOUNDARY: 0, cone.VIOLATED: 0}
    for _ in range(1000):
        chi = _random_pd(rng, 2)
        omega = _random_pd(rng, 2)
        g = rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))
        chi_tilde = float(rng.uniform(0.0, 0.4)) * (g @ g.conj().T) / 2
        setup = GeometrySetup.build(geo.HermFormField.constant(grid, chi),
                                    geo.HermFormField.constant(grid, chi_tilde),
                                    geo.HermFormField.constant(grid, omega), 1, require_big=False)
        # mu from the quadratic det(chi - mu omega) = 0
        M = np.linalg.solve(omega, chi)
        tr, det = np.real(np.trace(M)), np.real(np.linalg.det(M))
        disc = math.sqrt(max(tr * tr - 4 * det, 0.0))
        mu = ((tr - disc) / 2, (tr + disc) / 2)
        closed = min(setup.c * mu[1] - 1, setup.c * mu[0] - 1)
        rep = cone.cone_condition(setup.chi, setup.omega, 1, setup.c)
        expected = cone.STRICT if closed > 0 else cone.VIOLATED
        mismatches += rep.classification != expected
        labels[rep.classification] += 1
    ok = mismatches == 0
    _report(acceptance_log, 10, ok, f"{mismatches} mismatches over 1000 constant setups "
                                    f"(strict {labels[cone.STRICT]}, violated {labels[cone.VIOLATED]}, "
                                    f"boundary {labels[cone.BOUNDARY]})")
    assert ok
