"""Damped Newton solver for the stationary equation c X^n = n X^m ^ omega^{n-m}.

The residual is the flow's right-hand side F(psi). Its linearization is

    L delta = (n / C(n,m)) tr(Q (1/4) Hess delta),   Q = V diag(a) V*,

with (lam, V) the omega-orthonormal eigenpairs of X and
a_i = e_{n-m-1}(1/lam without i) / lam_i^2.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq
from scipy.sparse.linalg import LinearOperator, gmres

from . import geometry as geo
from . import herm
from .errors import ArgumentError, GeometryError, NonConvergenceError, PreconditionError
from .geometry import AmpMask, ScalarField

log = logging.getLogger(__name__)


def coefficients_from_eigs(lam: np.ndarray, n: int, m: int) -> np.ndarray:
    """a_i = e_{n-m-1}(1/lam without i) / lam_i^2, per point."""
    inv = 1.0 / np.asarray(lam)
    return herm.elem_sym_partial_all(inv, n - m - 1) * inv * inv


@dataclass(frozen=True)
class Linearization:
    coeffs: np.ndarray  # (..., n) positive a_i
    frame: np.ndarray  # (..., n, n) omega-orthonormal eigenvectors as columns
    Q: np.ndarray  # (..., n, n) V diag(a) V*
    factor: float  # n / C(n, m)

    @property
    def conditioning(self) -> float:
        return float(np.max(self.coeffs) / np.min(self.coeffs))


def linearization_coefficients(state, setup) -> Linearization:
    """Coefficients and frame of the linearized operator at an admissible state."""
    from .flow import FlowState

    X = state.X.data if isinstance(state, FlowState) else \
        setup.base.data + geo.complex_hessian(state, setup.diff_method).data
    lam, V = geo.rel_eigh(X, setup.omega)
    if not np.all(lam > 0):
        raise GeometryError("state is not admissible", value=float(np.min(lam)))
    a = coefficients_from_eigs(lam, setup.n, setup.m)
    Q = np.einsum("...ik,...k,...jk->...ij", V, a, V.conj())
    return Linearization(a, V, np.real(Q), setup.rhs_factor)


def apply_linearization(lin: Linearization, delta: np.ndarray, grid, method: str = "spectral") -> np.ndarray:
    H = geo.differentiator(grid, method).hessian(delta)
    return lin.factor * 0.25 * np.einsum("...jk,...jk->...", lin.Q, H)


@dataclass
class EllipticSolution:
    psi: ScalarField
    residual_norm: float
    newton_iterations: int
    linearization_conditioning: float
    history: list[float] = field(default_factory=list)
    damping: list[float] = field(default_factory=list)

    def quadratic_ratios(self) -> np.ndarray:
        """log r_{k+1} / log r_k over consecutive residuals below 1."""
        r = np.array([x for x in self.history if 0 < x < 1])
        if len(r) < 2:
            return np.empty(0)
        lr = np.log(r)
        return lr[1:] / lr[:-1]


def _residual(psi: np.ndarray, setup):
    """(F, admissible) for a raw potential array."""
    from .flow import _X_of, _rhs_from_X

    X = _X_of(psi, setup)
    F, coeffs, ok = _rhs_from_X(X, setup)
    return F, X, ok


def _newton_direction(psi: np.ndarray, F: np.ndarray, X: np.ndarray, setup, rtol: float):
    grid = setup.grid
    diff = geo.differentiator(grid, setup.diff_method)
    lam, V = geo.rel_eigh(X, setup.omega)
    a = coefficients_from_eigs(lam, setup.n, setup.m)
    Q = np.real(np.einsum("...ik,...k,...jk->...ij", V, a, V.conj()))
    lin = Linearization(a, V, Q, setup.rhs_factor)
    shape = grid.shape
    size = grid.total_points
    keep = diff.non_nyquist

    def P(u):
        return diff.inverse(diff.forward(u) * keep)

    def matvec(z):
        d = z[:size].reshape(shape)
        mu = z[size]
        Pd = P(d)
        top = P(apply_linearization(lin, Pd, grid, setup.diff_method)) + (d - Pd) + mu
        return np.concatenate([top.ravel(), [np.mean(d)]])

    # constant-coefficient preconditioner from the mean of Q
    Qbar = np.mean(Q.reshape(-1, setup.n, setup.n), axis=0)
    symb = sum(Qbar[j, k] * diff.symbol(j, k) for j in range(setup.n) for k in range(setup.n))
    symb = lin.factor * 0.25 * np.real(symb)
    symb = np.where(keep, symb, 1.0)
    zero = (0,) * setup.n
    symb[zero] = 1.0
    inv_symb = 1.0 / symb

    def precond(z):
        r = z[:size].reshape(shape)
        s = z[size]
        R = diff.forward(r)
        mu = R[zero].real / size
        D = R * inv_symb
        D[zero] = s * size
        return np.concatenate([diff.inverse(D).ravel(), [mu]])

    n_tot = size + 1
    A = LinearOperator((n_tot, n_tot), matvec=matvec, dtype=float)
    M = LinearOperator((n_tot, n_tot), matvec=precond, dtype=float)
    rhs = np.concatenate([-P(F).ravel(), [0.0]])
    sol, info = gmres(A, rhs, M=M, rtol=rtol, atol=0.0, restart=200, maxiter=20)
    if info < 0:
        raise NonConvergenceError(f"linear solver breakdown (info={info})")
    delta = sol[:size].reshape(shape)
    return delta - np.mean(delta), lin.conditioning


def solve_elliptic(setup, init: ScalarField | None = None, tol: float = 1e-10, max_iter: int = 60,
                   max_backtracks: int = 20, decrease: float = 0.99) -> EllipticSolution:
    """Damped Newton on F(psi) = c - n X^m ^ omega^{n-m} / X^n, zero-mean increments."""
    if not tol > 0:
        raise ArgumentError(f"tolerance must be positive, got {tol}")
    grid = setup.grid
    psi = np.zeros(grid.shape) if init is None else np.array(init.data, dtype=float)
    F, X, ok = _residual(psi, setup)
    if not ok:
        raise PreconditionError("initial guess is not admissible")
    r = float(np.max(np.abs(F)))
    history = [r]
    damping: list[float] = []
    cond = 1.0
    it = 0
    while r >= tol:
        if it >= max_iter:
            raise NonConvergenceError(f"Newton stalled at residual {r:.3g} after {it} iterations",
                                      last_iterate=ScalarField(grid, psi), history=history)
        rtol = max(1e-14, min(1e-2, 1e-2 * r))
        delta, cond = _newton_direction(psi, F, X, setup, rtol)
        alpha = 1.0
        for _ in range(max_backtracks):
            trial = psi + alpha * delta
            F_new, X_new, ok = _residual(trial, setup)
            r_new = float(np.max(np.abs(F_new)))
            if ok and r_new <= decrease * r:
                break
            alpha *= 0.5
        else:
            raise NonConvergenceError(f"line search failed {max_backtracks} times at residual {r:.3g}",
                                      last_iterate=ScalarField(grid, psi), history=history)
        psi, F, X, r = trial, F_new, X_new, r_new
        history.append(r)
        damping.append(alpha)
        it += 1
        log.debug("newton %d: residual %.3e, damping %.3g", it, r, alpha)
    psi = psi - np.max(psi)
    return EllipticSolution(ScalarField(grid, psi), r, it, cond, history, damping)


@dataclass(frozen=True)
class FlowComparison:
    spread: float
    K: float
    sup_difference: float
    sup_difference_all: float
    J_target: float


def compare_flow_limit(phi_end: ScalarField, sol: EllipticSolution, setup, mask: AmpMask,
                       phi0: ScalarField | None = None) -> FlowComparison:
    """Compare a flow limit with the Newton solution after J_n matching.

    K solves J_n(psi + K) = J_n(phi0) (or J_n(phi_end) when phi0 is omitted).
    """
    from .functionals import j_functional

    psi = sol.psi
    target_src = phi0 if phi0 is not None else phi_end
    target = j_functional(setup.n, target_src, setup)
    d = (phi_end.data - psi.data)
    dm = d[mask.mask] if np.any(mask.mask) else d.ravel()
    spread = float(np.max(dm) - np.min(dm))
    Jpsi = j_functional(setup.n, psi, setup)
    vol = setup.volume

    def g(K):
        return Jpsi + K * vol - target

    # J_n(psi + K) is affine in K with slope int (chi + chi_tilde)^n > 0
    K0 = (target - Jpsi) / vol
    width = 1.0 + abs(K0)
    K = brentq(g, K0 - width, K0 + width, xtol=1e-15, rtol=4 * np.finfo(float).eps)
    diff = phi_end.data - (psi.data + K)
    dmask = diff[mask.mask] if np.any(mask.mask) else diff.ravel()
    return FlowComparison(spread, float(K), float(np.max(np.abs(dmask))), float(np.max(np.abs(diff))),
                          float(target))


def j_n_shift_slope(psi: ScalarField, setup, K: float = 1.0) -> float:
    """(J_n(psi + K) - J_n(psi)) / K, which should equal int (chi + chi_tilde)^n."""
    from .functionals import j_functional

    a = j_functional(setup.n, psi, setup)
    b = j_functional(setup.n, psi + ScalarField.constant(psi.grid, K), setup)
    return (b - a) / K


def exact_flat_solution(setup) -> ScalarField | None:
    """Closed-form stationary solution when chi + chi_tilde = constant + i dd-bar eta.

    Then psi = -eta (up to constants) makes X constant, and a constant X
    solves the equation because c is then its pointwise value. Returns None for
    untagged setups.
    """
    base = setup.base
    if base.kind != geo.KAHLER_FROM_POTENTIAL or not setup.omega.is_constant:
        return None
    psi = -base.potential.data
    return ScalarField(setup.grid, psi - np.max(psi))

