"""Cone condition c chi^{n-1} - m chi^{m-1} ^ omega^{n-m} >= 0 and the scenario library.

Scenario forms are realized as a constant matrix plus the complex Hessian of a
trigonometric potential, so every generated chi and chi_tilde is closed. A
diagonal bump ``amp * sin^2(pi f (x_a - x0))`` on entry (a, a) becomes
``amp / 2`` in the constant part plus the potential
``amp / (2 pi^2 f^2) * cos(2 pi f (x_a - x0))``.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, replace
from math import factorial

import numpy as np
from scipy.optimize import bisect

from . import geometry as geo
from . import herm
from .errors import ArgumentError, CalibrationError, GeometryError, ScenarioError
from .flow import GeometrySetup, compute_c
from .geometry import HermFormField, PeriodicGrid, ScalarField

TOL_BOUNDARY = 1e-9
CALIBRATION_XTOL = 1e-10

STRICT, BOUNDARY, VIOLATED = "strict", "boundary", "violated"


@dataclass(frozen=True, eq=False)
class ConeReport:
    grid: PeriodicGrid
    kappa: np.ndarray  # (..., n), per eigen-direction of chi relative to omega
    global_min: float
    classification: str
    argmin: tuple
    tol_boundary: float = TOL_BOUNDARY


def classify(global_min: float, tol: float = TOL_BOUNDARY) -> str:
    if global_min > tol:
        return STRICT
    if global_min < -tol:
        return VIOLATED
    return BOUNDARY


def cone_condition(chi: HermFormField, omega: HermFormField, m: int, c: float,
                   tol_boundary: float = TOL_BOUNDARY) -> ConeReport:
    """Evaluate the cone coefficients of the given representative chi pointwise."""
    if not c > 0:
        raise ArgumentError(f"c must be positive, got {c}")
    mu = geo.rel_eigvals(chi.data, omega)
    if np.any(mu <= 0):
        raise GeometryError("chi is not positive definite", value=float(np.min(mu)))
    kappa = herm.cone_form_coefficients(mu, m, c)
    flat = int(np.argmin(kappa))
    where = np.unravel_index(flat, kappa.shape)
    gmin = float(kappa[where])
    return ConeReport(chi.grid, kappa, gmin, classify(gmin, tol_boundary),
                      (tuple(int(i) for i in where[:-1]), int(where[-1])), tol_boundary)


# ---------------------------------------------------------------------------
# normalization oracle


def cone_pairing_matrix(chi, omega, m: int, c: float) -> np.ndarray:
    """Hermitian Q with n (c chi^{n-1} - m chi^{m-1} ^ omega^{n-m}) ^ beta = tr(Q beta) det(omega).

    Assembled entry by entry from mixed discriminants against a Hermitian basis.
    """
    chi = np.asarray(chi)
    omega = np.asarray(omega)
    n = chi.shape[0]
    scale = n / (factorial(n) * float(np.real(np.linalg.det(omega))))

    def pair(beta):
        a = herm.mixed_discriminant([chi] * (n - 1) + [beta])
        b = herm.mixed_discriminant([chi] * (m - 1) + [omega] * (n - m) + [beta])
        return scale * (c * a - m * b)

    Q = np.zeros((n, n), dtype=complex)
    for a in range(n):
        E = np.zeros((n, n))
        E[a, a] = 1.0
        Q[a, a] = pair(E)
        for b in range(a + 1, n):
            S = np.zeros((n, n), dtype=complex)
            S[a, b] = S[b, a] = 1.0
            T = np.zeros((n, n), dtype=complex)
            T[a, b], T[b, a] = 1j, -1j
            re, im = 0.5 * pair(S), 0.5 * pair(T)
            Q[a, b] = re + 1j * im
            Q[b, a] = re - 1j * im
    return Q if np.any(Q.imag) else Q.real


def kappa_oracle(chi, omega, m: int, c: float) -> np.ndarray:
    """Cone coefficients from the polarization oracle (ascending)."""
    Q = cone_pairing_matrix(chi, omega, m, c)
    return herm.gen_eigen(Q, np.linalg.inv(np.asarray(omega))).values


def _random_pd(rng: np.random.Generator, n: int, complex_: bool = True) -> np.ndarray:
    G = rng.standard_normal((n, n))
    if complex_:
        G = G + 1j * rng.standard_normal((n, n))
    return G @ G.conj().T / n + 0.2 * np.eye(n)


def validate_kappa_normalization(samples: int = 100, seed: int = 0, rtol: float = 1e-9) -> float:
    """Compare cone_form_coefficients with the oracle on random points; returns the worst error.

    Raises ScenarioError if the two disagree.
    """
    rng = np.random.default_rng(seed)
    worst = 0.0
    for k in range(samples):
        n = 2 + k % 3
        m = 1 + int(rng.integers(n - 1))
        chi = _random_pd(rng, n)
        omega = _random_pd(rng, n)
        c = float(rng.uniform(0.2, 3.0))
        mu = herm.gen_eigen(chi, omega).values
        fast = np.sort(herm.cone_form_coefficients(mu, m, c))
        slow = kappa_oracle(chi, omega, m, c)
        w = factorial(m) * factorial(n - m) / factorial(n - 1)
        scale = np.max(c * herm.elem_sym_partial_all(mu, n - 1) + w * herm.elem_sym_partial_all(mu, m - 1))
        worst = max(worst, float(np.max(np.abs(fast - slow)) / scale))
    if worst > rtol:
        raise ScenarioError(f"cone coefficient normalization disagrees with the oracle ({worst:.3g})")
    return worst


_VALIDATED = False


def _ensure_validated() -> None:
    global _VALIDATED
    if not _VALIDATED:
        validate_kappa_normalization()
        _VALIDATED = True


# ---------------------------------------------------------------------------
# scenarios


@dataclass(frozen=True)
class Bump:
    """amp * sin^2(pi freq (x_axis - shift)) added to diagonal entry (axis, axis)."""

    axis: int
    amp: float
    freq: int = 1
    shift: float = 0.0


@dataclass(frozen=True)
class ScenarioSpec:
    name: str
    n: int = 2
    m: int = 1
    N: int = 64
    chi_diag: tuple = (1.0, 1.0)
    chi_bumps: tuple = ()
    chi_modes: tuple = ()  # (amp, kvec, phase) potential modes
    chi_tilde_diag: tuple = (0.5, 0.5)
    chi_tilde_bumps: tuple = ()
    chi_tilde_modes: tuple = ()
    omega_diag: tuple | None = None
    scale: float = 1.0  # multiplies chi and chi_tilde
    calibrate: str = "none"  # "none", "scale" (chi only), "bumps" (all chi bump amps) or "bump:<i>"
    bracket: tuple = (0.0, 4.0)
    target: str = STRICT
    phi0_modes: tuple = ()
    phi0_random: int = 0  # number of random low-frequency modes added to phi0
    phi0_amplitude: float = 0.01
    phi0_max_freq: int = 2
    seed: int = 0
    diff_method: str = "spectral"
    require_big: bool = True
    mask_delta: float = 1e-3

    def __post_init__(self):
        if not 1 <= self.m < self.n <= 4:
            raise ArgumentError(f"need 1 <= m < n <= 4, got n={self.n}, m={self.m}")
        for attr in ("chi_diag", "chi_tilde_diag"):
            if len(getattr(self, attr)) != self.n:
                raise ArgumentError(f"{attr} must have {self.n} entries")
        if self.omega_diag is not None and len(self.omega_diag) != self.n:
            raise ArgumentError(f"omega_diag must have {self.n} entries")

    def grid(self) -> PeriodicGrid:
        return PeriodicGrid(self.n, self.N)

    def with_parameter(self, value: float) -> "ScenarioSpec":
        if self.calibrate == "scale":
            return replace(self, chi_diag=tuple(value * v for v in self.chi_diag),
                           chi_bumps=tuple(replace(b, amp=value * b.amp) for b in self.chi_bumps),
                           chi_modes=tuple((value * a, k, p) for a, k, p in self.chi_modes),
                           calibrate="none")
        if self.calibrate == "bumps":
            return replace(self, chi_bumps=tuple(replace(b, amp=value) for b in self.chi_bumps))
        if self.calibrate.startswith("bump:"):
            i = int(self.calibrate.split(":", 1)[1])
            bumps = list(self.chi_bumps)
            bumps[i] = replace(bumps[i], amp=value)
            return replace(self, chi_bumps=tuple(bumps))
        raise ArgumentError(f"scenario {self.name!r} has no calibration parameter")

    def parameter(self) -> float:
        if self.calibrate == "scale":
            return 1.0
        if self.calibrate == "bumps":
            return self.chi_bumps[0].amp
        if self.calibrate.startswith("bump:"):
            return self.chi_bumps[int(self.calibrate.split(":", 1)[1])].amp
        raise ArgumentError(f"scenario {self.name!r} has no calibration parameter")

    def as_dict(self) -> dict:
        return asdict(self)


def _form(grid: PeriodicGrid, diag, bumps, modes, scale: float, method: str) -> HermFormField:
    n = grid.n
    base = np.diag(np.asarray(diag, dtype=float))
    pot_modes = []
    for b in bumps:
        if not 0 <= b.axis < n:
            raise ArgumentError(f"bump axis {b.axis} outside 0..{n - 1}")
        base[b.axis, b.axis] += 0.5 * b.amp
        k = [0] * n
        k[b.axis] = b.freq
        coef = b.amp / (2 * math.pi ** 2 * b.freq ** 2)
        pot_modes.append((coef, tuple(k), -2 * math.pi * b.freq * b.shift))
    pot_modes.extend((a, tuple(k), p) for a, k, p in modes)
    eta = geo.trig_potential(grid, pot_modes) if pot_modes else ScalarField.zeros(grid)
    return HermFormField.from_potential(scale * base, eta * scale, method)


def build_fields(spec: ScenarioSpec):
    grid = spec.grid()
    chi = _form(grid, spec.chi_diag, spec.chi_bumps, spec.chi_modes, spec.scale, spec.diff_method)
    chi_tilde = _form(grid, spec.chi_tilde_diag, spec.chi_tilde_bumps, spec.chi_tilde_modes, spec.scale,
                      spec.diff_method)
    om = np.eye(spec.n) if spec.omega_diag is None else np.diag(spec.omega_diag)
    omega = HermFormField.constant(grid, om, spec.diff_method)
    return chi, chi_tilde, omega


def build_setup(spec: ScenarioSpec) -> GeometrySetup:
    _ensure_validated()
    chi, chi_tilde, omega = build_fields(spec)
    return GeometrySetup.build(chi, chi_tilde, omega, spec.m, spec.name, spec.require_big)


def initial_potential(spec: ScenarioSpec) -> ScalarField:
    """phi_0 from the listed modes plus ``phi0_random`` seeded low-frequency modes."""
    grid = spec.grid()
    modes = list(spec.phi0_modes)
    if spec.phi0_random:
        rng = np.random.default_rng(spec.seed)
        for _ in range(spec.phi0_random):
            k = tuple(int(v) for v in rng.integers(-spec.phi0_max_freq, spec.phi0_max_freq + 1, spec.n))
            if not any(k):
                k = (1,) + (0,) * (spec.n - 1)
            modes.append((spec.phi0_amplitude * float(rng.uniform(0.2, 1.0)), k,
                          float(rng.uniform(0, 2 * math.pi))))
    return geo.trig_potential(grid, modes) if modes else ScalarField.zeros(grid)


def _cone_min(spec: ScenarioSpec) -> float:
    chi, chi_tilde, omega = build_fields(spec)
    c = compute_c(chi, chi_tilde, omega, spec.m)
    return cone_condition(chi, omega, spec.m, c).global_min


def calibrate_spec(spec: ScenarioSpec, max_iter: int = 64) -> ScenarioSpec:
    """Bisect the calibration parameter until the cone minimum vanishes (c recomputed each trial)."""
    _ensure_validated()
    if abs(_cone_min(spec)) <= TOL_BOUNDARY:
        return spec

    def g(p):
        return _cone_min(spec.with_parameter(p))

    lo, hi = spec.bracket
    g_lo, g_hi = g(lo), g(hi)
    it = 0
    # widen the bracket geometrically until the sign changes
    while g_lo * g_hi > 0:
        if it >= max_iter:
            raise CalibrationError(
                f"no sign change of the cone minimum for {spec.name!r} in [{lo:.3g}, {hi:.3g}] "
                f"after {max_iter} expansions (values {g_lo:.3g}, {g_hi:.3g})")
        width = hi - lo
        lo, hi = max(lo - width, 1e-12) if lo > 0 else lo, hi + width
        g_lo, g_hi = g(lo), g(hi)
        it += 1
    p = bisect(g, lo, hi, xtol=CALIBRATION_XTOL * 1e-2, rtol=4 * np.finfo(float).eps, maxiter=200)
    out = spec.with_parameter(p)
    val = _cone_min(out)
    if abs(val) > TOL_BOUNDARY:
        raise CalibrationError(f"calibrated cone minimum {val:.3g} exceeds {TOL_BOUNDARY}")
    return out


def calibrate_boundary_scenario(spec: ScenarioSpec) -> GeometrySetup:
    return build_setup(calibrate_spec(spec))


def degenerate_chi_tilde_scenario(spec: ScenarioSpec) -> GeometrySetup:
    """Setup whose chi_tilde is semipositive with a vanishing eigenvalue somewhere."""
    _ensure_validated()
    chi, chi_tilde, omega = build_fields(spec)
    lo = float(np.min(geo.rel_eigvals(chi_tilde.data, omega)))
    if lo < -1e-12:
        raise ScenarioError(f"chi_tilde fails semipositivity (min eigenvalue {lo:.3g})")
    return GeometrySetup.build(chi, chi_tilde, omega, spec.m, spec.name, spec.require_big)


def _boundary(name: str, shift: float, N: int = 64) -> ScenarioSpec:
    s = 6.0
    return ScenarioSpec(
        name=name, n=2, m=1, N=N, scale=s,
        chi_diag=(1.0, 1.0), chi_bumps=(Bump(0, 0.5, 1, shift), Bump(1, 0.5, 1, 0.0)),
        chi_tilde_diag=(0.0, 1.0), chi_tilde_bumps=(Bump(0, 1.0, 1, 0.0),),
        calibrate="bumps", bracket=(0.0, 2.0), target=BOUNDARY,
    )


def library(N: int | None = None, seed: int = 0) -> dict[str, ScenarioSpec]:
    """The named scenarios; N overrides the default grid size."""
    def g(default):
        return N if N is not None else default

    lib = {
        "trivial": ScenarioSpec("trivial", 2, 1, g(64), chi_diag=(0.5, 0.5), chi_tilde_diag=(0.5, 0.5),
                                target=BOUNDARY),
        "strict": ScenarioSpec(
            "strict", 2, 1, g(64), chi_diag=(1.0, 1.0),
            chi_bumps=(Bump(0, 0.3), Bump(1, 0.2)), chi_modes=((0.005, (1, 1), 0.0),),
            chi_tilde_diag=(0.5, 0.5), chi_tilde_bumps=(Bump(1, 0.3),),
            phi0_random=4, phi0_amplitude=0.01, phi0_max_freq=1, seed=seed),
        "boundary": _boundary("boundary", 0.0, g(64)),
        "compound": _boundary("compound", 0.0, g(64)),
        "disjoint": _boundary("disjoint", 0.5, g(64)),
        "degenerate": ScenarioSpec("degenerate", 2, 1, g(64), chi_diag=(1.0, 1.0),
                                   chi_tilde_diag=(0.0, 1.0), chi_tilde_bumps=(Bump(0, 1.0),),
                                   target=STRICT),
        "unit-boundary": ScenarioSpec("unit-boundary", 2, 1, g(64), chi_diag=(1.0, 1.0),
                                      chi_bumps=(Bump(0, 0.5),), chi_tilde_diag=(0.0, 1.0),
                                      chi_tilde_bumps=(Bump(0, 1.0),), calibrate="bump:0",
                                      bracket=(0.0, 4.0), target=BOUNDARY),
        "conformal": ScenarioSpec("conformal", 2, 1, g(64), chi_diag=(1.0, 1.0),
                                  chi_tilde_diag=(0.0, 0.0), calibrate="scale", bracket=(0.5, 2.0),
                                  require_big=False, target=BOUNDARY),
        "strict3": ScenarioSpec(
            "strict3", 3, 1, g(32), chi_diag=(1.0, 1.0, 1.0),
            chi_bumps=(Bump(0, 0.3), Bump(1, 0.2), Bump(2, 0.1)),
            chi_tilde_diag=(0.3, 0.3, 0.3), chi_tilde_bumps=(Bump(2, 0.2),),
            phi0_random=4, phi0_amplitude=0.005, seed=seed),
        "strict3m2": ScenarioSpec(
            "strict3m2", 3, 2, g(32), chi_diag=(1.0, 1.0, 1.0),
            chi_bumps=(Bump(0, 0.3), Bump(1, 0.2), Bump(2, 0.1)),
            chi_tilde_diag=(0.3, 0.3, 0.3), chi_tilde_bumps=(Bump(2, 0.2),),
            phi0_random=4, phi0_amplitude=0.005, seed=seed),
    }
    return lib


def get_scenario(name: str, N: int | None = None, seed: int = 0) -> ScenarioSpec:
    lib = library(N, seed)
    if name not in lib:
        raise ScenarioError(f"unknown scenario {name!r}; known: {sorted(lib)}")
    return lib[name]


def prepare(spec: ScenarioSpec) -> tuple[GeometrySetup, ScalarField, ScenarioSpec]:
    """Build (setup, phi0, final spec), calibrating boundary targets first."""
    if spec.target == BOUNDARY and spec.calibrate != "none":
        spec = calibrate_spec(spec)
        setup = build_setup(spec)
    elif spec.chi_tilde_diag and np.min(spec.chi_tilde_diag) == 0.0:
        setup = degenerate_chi_tilde_scenario(spec)
    else:
        setup = build_setup(spec)
    return setup, initial_potential(spec), spec
