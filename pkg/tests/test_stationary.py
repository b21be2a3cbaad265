from __future__ import annotations

import functools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from jflow import cone, flow, stationary
from jflow import functionals as fn
from jflow import geometry as geo
from jflow.errors import NonConvergenceError, PreconditionError

from conftest import constant_setup


@functools.lru_cache(maxsize=None)
def _scenario(name, N):
    return cone.prepare(cone.get_scenario(name, N=N))


@functools.lru_cache(maxsize=None)
def _solution(name, N, tol=1e-10):
    return stationary.solve_elliptic(_scenario(name, N)[0], tol=tol)


def test_linearization_coefficients_at_unit_eigenvalues():
    a = stationary.coefficients_from_eigs(np.array([1.0, 1.0]), 2, 1)
    assert np.array_equal(a, [1.0, 1.0])


def test_linearization_laplacian_on_trivial(trivial_setup):
    lin = stationary.linearization_coefficients(geo.ScalarField.zeros(trivial_setup.grid), trivial_setup)
    assert np.allclose(lin.coeffs, 1.0) and lin.factor == 1.0
    u = geo.trig_potential(trivial_setup.grid, [(1.0, (1, 2))])
    Lu = stationary.apply_linearization(lin, u.data, trivial_setup.grid)
    # (1/4) Laplacian of cos(2 pi (x + 2y)) is -(pi^2)(1 + 4) cos
    assert np.allclose(Lu, -5 * math.pi ** 2 * u.data, atol=1e-10)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(0.01, 100), min_size=2, max_size=4), st.data())
def test_coefficients_positive(lam, data):
    n = len(lam)
    m = data.draw(st.integers(1, n - 1))
    a = stationary.coefficients_from_eigs(np.array(lam), n, m)
    assert np.all(a > 0)


@pytest.mark.parametrize("seed", range(3))
def test_jacobian_consistency_order(seed):
    setup, phi0, _ = _scenario("strict", 32)
    rng = np.random.default_rng(seed)
    modes = [(0.01 * rng.uniform(0.5, 1), tuple(int(v) for v in rng.integers(-3, 4, 2)), rng.uniform(0, 6))
             for _ in range(3)]
    delta = geo.trig_potential(setup.grid, modes)
    lin = stationary.linearization_coefficients(flow.make_state(setup, phi0), setup)
    Ld = stationary.apply_linearization(lin, delta.data, setup.grid)
    errs = []
    for eps in (0.2, 0.1, 0.05):
        fp = flow.flow_rhs(phi0 + delta * eps, setup).data
        fm = flow.flow_rhs(phi0 - delta * eps, setup).data
        errs.append(np.max(np.abs((fp - fm) / (2 * eps) - Ld)))
    orders = [math.log2(errs[0] / errs[1]), math.log2(errs[1] / errs[2])]
    assert min(orders) >= 1.9


def test_jacobian_consistency_n3():
    setup, phi0, _ = _scenario("strict3m2", 8)
    delta = geo.trig_potential(setup.grid, [(0.01, (1, -1, 2), 0.4)])
    lin = stationary.linearization_coefficients(phi0, setup)
    Ld = stationary.apply_linearization(lin, delta.data, setup.grid)
    errs = []
    for eps in (0.1, 0.05):
        d = (flow.flow_rhs(phi0 + delta * eps, setup).data - flow.flow_rhs(phi0 - delta * eps, setup).data)
        errs.append(np.max(np.abs(d / (2 * eps) - Ld)))
    assert math.log2(errs[0] / errs[1]) >= 1.9


# -- Newton ------------------------------------------------------------------------


def test_trivial_solve_is_immediate(trivial_setup):
    sol = stationary.solve_elliptic(trivial_setup)
    assert sol.newton_iterations == 0
    assert np.array_equal(sol.psi.data, np.zeros(trivial_setup.grid.shape))


def test_strict_solve_quadratic_tail():
    sol = _solution("strict", 32)
    assert sol.residual_norm < 1e-10
    assert sol.psi.max == 0.0
    ratios = sol.quadratic_ratios()
    assert len(ratios) >= 3 and np.all(ratios[-3:] >= 1.8)
    assert sol.linearization_conditioning >= 1.0


def test_boundary_solve_matches_flat_solution():
    setup = _scenario("boundary", 32)[0]
    sol = _solution("boundary", 32, 1e-6)
    assert sol.residual_norm < 1e-6 and sol.psi.max == 0.0
    exact = stationary.exact_flat_solution(setup)
    assert np.max(np.abs(sol.psi.data - exact.data)) < 1e-6
    assert np.all(np.isfinite(sol.psi.data)) and sol.psi.min > -10


def test_exact_flat_solution_is_stationary():
    setup = _scenario("strict", 32)[0]
    psi = stationary.exact_flat_solution(setup)
    assert np.max(np.abs(flow.flow_rhs(psi, setup).data)) < 1e-12
    assert psi.max == 0.0


def test_newton_increments_have_zero_mean():
    setup, _, _ = _scenario("strict", 16)
    psi = np.zeros(setup.grid.shape)
    F, X, _ = stationary._residual(psi, setup)
    delta, _ = stationary._newton_direction(psi, F, X, setup, 1e-10)
    assert abs(np.mean(delta)) < 1e-12


def test_non_admissible_init_rejected(trivial_setup):
    with pytest.raises(PreconditionError):
        stationary.solve_elliptic(trivial_setup, init=geo.trig_potential(trivial_setup.grid, [(-0.5, (1, 0))]))


def test_stalled_newton_reports_last_iterate():
    setup, _, _ = _scenario("strict", 16)
    with pytest.raises(NonConvergenceError) as info:
        stationary.solve_elliptic(setup, max_iter=1)
    assert info.value.last_iterate is not None and len(info.value.history) == 2


def test_failed_line_search():
    setup, _, _ = _scenario("strict", 16)
    with pytest.raises(NonConvergenceError, match="line search"):
        stationary.solve_elliptic(setup, tol=1e-30, max_backtracks=1, decrease=1e-20)


# -- flow comparison -------------------------------------------------------------------


def test_compare_identical():
    setup = _scenario("strict", 32)[0]
    sol = _solution("strict", 32)
    cmp_ = stationary.compare_flow_limit(sol.psi, sol, setup, setup.mask())
    assert cmp_.spread == 0.0 and abs(cmp_.K) < 1e-14
    assert fn.j_functional(2, sol.psi + cmp_.K, setup) == pytest.approx(cmp_.J_target, rel=1e-12, abs=1e-15)


def test_compare_shifted():
    setup = _scenario("strict", 32)[0]
    sol = _solution("strict", 32)
    cmp_ = stationary.compare_flow_limit(sol.psi + 3.0, sol, setup, setup.mask())
    assert cmp_.spread < 1e-13
    assert cmp_.K == pytest.approx(3.0, abs=1e-12)
    assert cmp_.sup_difference < 1e-12


@pytest.mark.parametrize("K", [-2.0, 0.5, 7.0])
def test_j_n_shift_slope_is_volume(K):
    setup = _scenario("strict", 16)[0]
    sol = _solution("strict", 16)
    assert stationary.j_n_shift_slope(sol.psi, setup, K) == pytest.approx(setup.volume, rel=1e-10)
    assert setup.volume > 0


def test_strict_flow_limit_agrees_with_newton():
    setup, phi0, _ = _scenario("strict", 32)
    sol = _solution("strict", 32)
    traj, _, _ = flow.run(setup, phi0, flow.FlowConfig(t_max=20.0, record_interval=1.0, tol_converge=1e-9))
    assert traj.converged
    cmp_ = stationary.compare_flow_limit(traj.final.phi, sol, setup, traj.mask, phi0)
    assert cmp_.spread < 1e-6 and cmp_.sup_difference < 1e-5


def test_constant_setup_solution_is_zero():
    setup = constant_setup(np.diag([1.0, 3.0]), np.diag([0.5, 0.5]))
    sol = stationary.solve_elliptic(setup)
    assert sol.newton_iterations == 0 and np.array_equal(sol.psi.data, np.zeros(setup.grid.shape))
