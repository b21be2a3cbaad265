from __future__ import annotations

import numpy as np
import pytest

from jflow import cone
from jflow import geometry as geo
from jflow.flow import GeometrySetup


def constant_setup(chi, chi_tilde, omega=None, m: int = 1, N: int = 8) -> GeometrySetup:
    chi = np.asarray(chi, dtype=float)
    n = chi.shape[0]
    grid = geo.PeriodicGrid(n, N)
    omega = np.eye(n) if omega is None else omega
    return GeometrySetup.build(geo.HermFormField.constant(grid, chi),
                               geo.HermFormField.constant(grid, chi_tilde),
                               geo.HermFormField.constant(grid, omega), m, require_big=False)


@pytest.fixture
def trivial_setup():
    """chi = omega = I, chi_tilde = 0 on a small n=2 grid: phi = 0 is stationary."""
    return constant_setup(np.eye(2), np.zeros((2, 2)))


@pytest.fixture(scope="session")
def strict32():
    return cone.prepare(cone.get_scenario("strict", N=32))


@pytest.fixture(scope="session")
def boundary32():
    return cone.prepare(cone.get_scenario("boundary", N=32))


_ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def acceptance_log():
    return _ACCEPTANCE_LINES


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
