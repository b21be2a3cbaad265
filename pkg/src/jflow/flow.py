"""Time integration of the generalized J-flow and its runtime monitors.

    d phi / dt = c - n (X^m ^ omega^{n-m}) / X^n,   X = chi + chi_tilde + i dd-bar phi

Pointwise the right-hand side is c - (n / C(n,m)) e_m(lam) / e_n(lam) with lam
the eigenvalues of X relative to omega.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from functools import cached_property
from pathlib import Path

import numpy as np
from scipy.optimize import minimize_scalar

from . import geometry as geo
from . import herm
from .errors import ArgumentError, GeometryError, PreconditionError, StiffnessError
from .geometry import AmpMask, HermFormField, PeriodicGrid, ScalarField

log = logging.getLogger(__name__)

# real-axis extent of the absolute stability region
_STABILITY_LIMIT = {"explicit-euler": 2.0, "rk4": 2.785293563405282}
METHODS = tuple(_STABILITY_LIMIT)


def compute_c(chi: HermFormField, chi_tilde: HermFormField, omega: HermFormField, m: int) -> float:
    """n * int (chi+chi_tilde)^m ^ omega^{n-m} / int (chi+chi_tilde)^n."""
    n = chi.n
    if not 1 <= m < n:
        raise ArgumentError(f"need 1 <= m < n, got m={m}, n={n}")
    A = chi + chi_tilde
    den = geo.wedge_integral([(A, n)], omega)
    if not den > 0:
        raise GeometryError(f"chi + chi_tilde has nonpositive volume {den:.3g}; chi_tilde not big enough",
                            value=den)
    num = geo.wedge_integral([(A, m), (omega, n - m)], omega)
    return n * num / den


@dataclass(frozen=True, eq=False)
class GeometrySetup:
    chi: HermFormField
    chi_tilde: HermFormField
    omega: HermFormField
    m: int
    c: float
    name: str = ""

    @classmethod
    def build(cls, chi: HermFormField, chi_tilde: HermFormField, omega: HermFormField, m: int,
              name: str = "", require_big: bool = True) -> "GeometrySetup":
        grid = chi.grid
        if chi_tilde.grid != grid or omega.grid != grid:
            raise ArgumentError("chi, chi_tilde and omega must share a grid")
        if chi.diff_method != chi_tilde.diff_method:
            raise ArgumentError("chi and chi_tilde were built with different differentiators")
        lo_omega = float(np.min(np.linalg.eigvalsh(omega.data)))
        if lo_omega <= 0:
            raise GeometryError("omega is not positive definite", value=lo_omega)
        lo_chi = float(np.min(geo.rel_eigvals(chi.data, omega)))
        if lo_chi <= 0:
            raise GeometryError("chi is not positive definite", value=lo_chi)
        lo_tilde = float(np.min(geo.rel_eigvals(chi_tilde.data, omega)))
        if lo_tilde < -1e-12:
            raise GeometryError("chi_tilde is not semipositive", value=lo_tilde)
        if require_big:
            vol = geo.wedge_integral([(chi_tilde, grid.n)], omega)
            if not vol > 0:
                raise GeometryError(f"chi_tilde is not big (volume {vol:.3g})", value=vol)
        c = compute_c(chi, chi_tilde, omega, m)
        return cls(chi, chi_tilde, omega, m, c, name)

    @property
    def grid(self) -> PeriodicGrid:
        return self.chi.grid

    @property
    def n(self) -> int:
        return self.grid.n

    @property
    def diff_method(self) -> str:
        return self.chi.diff_method

    @cached_property
    def base(self) -> HermFormField:
        return self.chi + self.chi_tilde

    @property
    def closed(self) -> bool:
        """Both chi and chi_tilde are constant + complex Hessian, omega constant."""
        return (self.chi.kind == geo.KAHLER_FROM_POTENTIAL
                and self.chi_tilde.kind == geo.KAHLER_FROM_POTENTIAL
                and self.omega.is_constant)

    @cached_property
    def rhs_factor(self) -> float:
        return self.n / math.comb(self.n, self.m)

    @cached_property
    def volume(self) -> float:
        """int (chi + chi_tilde)^n."""
        return geo.wedge_integral([(self.base, self.n)], self.omega)

    @cached_property
    def omega_min_eig(self) -> float:
        return float(np.min(np.linalg.eigvalsh(self.omega.data)))

    def mask(self, delta: float = 1e-3) -> AmpMask:
        return geo.amp_locus(self.chi_tilde, self.omega, delta)


# ---------------------------------------------------------------------------
# state and right-hand side


def _rhs_from_X(X: np.ndarray, setup: GeometrySetup):
    coeffs = geo.rel_coeffs(X, setup.omega)
    ok = bool(np.all(coeffs[..., 1:] > 0))
    F = setup.c - setup.rhs_factor * coeffs[..., setup.m] / coeffs[..., setup.n]
    return F, coeffs, ok


def _X_of(phi_data: np.ndarray, setup: GeometrySetup) -> np.ndarray:
    H = geo.differentiator(setup.grid, setup.diff_method).hessian(phi_data)
    return setup.base.data + 0.25 * H


def _eigs_from(X: np.ndarray, coeffs: np.ndarray, setup: GeometrySetup) -> np.ndarray:
    if setup.n == 2:
        half = 0.5 * coeffs[..., 1]
        disc = np.sqrt(np.maximum(half * half - coeffs[..., 2], 0.0))
        return np.stack([half - disc, half + disc], axis=-1)
    if setup.n == 3:
        return herm.eigvalsh3(geo.whiten(X, setup.omega))
    return geo.rel_eigvals(X, setup.omega)


@dataclass(frozen=True, eq=False)
class FlowState:
    """A potential with its coherent caches (X, d phi/dt, w = S_1(X))."""

    phi: ScalarField
    t: float
    X: HermFormField
    dphi_dt: ScalarField
    w: ScalarField
    eigs: np.ndarray
    dt: float = 0.0

    @property
    def min_eig(self) -> float:
        return float(np.min(self.eigs[..., 0]))


def make_state(setup: GeometrySetup, phi: ScalarField, t: float = 0.0, dt: float = 0.0) -> FlowState:
    """Build a cache-coherent state; raises GeometryError if phi is not admissible."""
    X = _X_of(phi.data, setup)
    F, coeffs, ok = _rhs_from_X(X, setup)
    eigs = _eigs_from(X, coeffs, setup)
    if not ok or not np.all(eigs[..., 0] > 0):
        idx = np.unravel_index(np.argmin(eigs[..., 0]), setup.grid.shape)
        raise GeometryError(f"potential is not admissible at grid point {idx}",
                            value=float(eigs[idx][0]), where=idx)
    grid = setup.grid
    Xf = HermFormField(grid, X, geo.KAHLER_FROM_POTENTIAL, setup.base.base,
                       setup.base.potential + phi, setup.diff_method) \
        if setup.base.kind == geo.KAHLER_FROM_POTENTIAL else HermFormField(grid, X)
    eigs.setflags(write=False)
    return FlowState(phi, float(t), Xf, ScalarField(grid, F), ScalarField(grid, coeffs[..., 1]), eigs, dt)


def flow_rhs(state, setup: GeometrySetup) -> ScalarField:
    """c - mixed_wedge_ratio(X, omega, m, n) at every grid point."""
    if isinstance(state, FlowState):
        return state.dphi_dt
    return make_state(setup, state).dphi_dt


def stable_dt(state: FlowState, setup: GeometrySetup, method: str = "rk4", cfl: float = 0.9) -> float:
    """Explicit stability cap from the linearized operator's spectral radius bound."""
    from .stationary import coefficients_from_eigs

    a = coefficients_from_eigs(state.eigs, setup.n, setup.m)
    diff = geo.differentiator(setup.grid, setup.diff_method)
    rho = setup.rhs_factor * 0.25 * diff.hessian_norm_bound * float(np.max(np.sum(a, axis=-1)))
    rho /= setup.omega_min_eig
    return cfl * _STABILITY_LIMIT[method] / rho if rho > 0 else math.inf


def step(state: FlowState, setup: GeometrySetup, dt: float, method: str = "rk4",
         safety: float = 0.5, max_halvings: int = 30) -> FlowState:
    """Advance by dt, halving on loss of admissibility or a collapsing eigenvalue floor."""
    if method not in METHODS:
        raise ArgumentError(f"unknown integrator {method!r}; choose from {METHODS}")
    if not dt > 0:
        raise ArgumentError(f"time step must be positive, got {dt}")
    phi = state.phi.data
    k1 = state.dphi_dt.data
    floor = safety * state.min_eig
    for _ in range(max_halvings + 1):
        trial = _trial(phi, k1, dt, method, setup)
        if trial is not None:
            try:
                new = make_state(setup, ScalarField(setup.grid, trial), state.t + dt, dt)
            except GeometryError:
                new = None
            if new is not None and new.min_eig >= floor:
                return new
        dt *= 0.5
    raise StiffnessError(f"no admissible step after {max_halvings} halvings at t={state.t:.6g}",
                         last_state=state)


def _trial(phi, k1, dt, method, setup):
    if method == "explicit-euler":
        return phi + dt * k1

    def stage(u):
        F, _, ok = _rhs_from_X(_X_of(u, setup), setup)
        return F if ok else None

    k2 = stage(phi + 0.5 * dt * k1)
    if k2 is None:
        return None
    k3 = stage(phi + 0.5 * dt * k2)
    if k3 is None:
        return None
    k4 = stage(phi + dt * k3)
    if k4 is None:
        return None
    return phi + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)


# ---------------------------------------------------------------------------
# trajectories


def upper_hull(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Vertices of the upper convex hull of the points (x, y), sorted by x.

    max_p (y_p - A x_p) over all p equals the max over these vertices.
    """
    x = np.asarray(x, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    order = np.lexsort((y, x))
    x, y = x[order], y[order]
    # keep the highest y for each distinct x
    last = np.r_[x[1:] != x[:-1], True]
    x, y = x[last], y[last]
    hull: list[tuple[float, float]] = []
    for px, py in zip(x.tolist(), y.tolist()):
        while len(hull) >= 2:
            (ax, ay), (bx, by) = hull[-2], hull[-1]
            if (bx - ax) * (py - ay) - (by - ay) * (px - ax) >= 0:
                hull.pop()
            else:
                break
        hull.append((px, py))
    return np.array(hull, dtype=float).reshape(-1, 2)


@dataclass(frozen=True)
class TrajectoryRecord:
    t: float
    dt: float
    sup_dphidt: float
    inf_dphidt: float
    sup_abs_dphidt_mask: float
    ratio_min: float
    ratio_max: float
    phi_min: float
    phi_max: float
    phi_min_mask: float
    phi_max_mask: float
    w_max: float
    w_max_mask: float
    min_eig: float
    hull: np.ndarray = field(repr=False)
    hull_mask: np.ndarray = field(repr=False)
    hull_rho_mask: np.ndarray | None = field(default=None, repr=False)


def record_state(state: FlowState, setup: GeometrySetup, mask: AmpMask,
                 rho: ScalarField | None = None) -> TrajectoryRecord:
    F = state.dphi_dt.data
    phi = state.phi.data
    w = state.w.data
    mk = mask.mask
    # X^n / (X^m ^ omega^{n-m}) = n / (c - dphi/dt)
    ratio = setup.rhs_factor * math.comb(setup.n, setup.m) / (setup.c - F)
    logw = np.log(w)
    any_mask = bool(np.any(mk))
    hull_rho = None
    if rho is not None and any_mask:
        hull_rho = upper_hull((phi - rho.data)[mk], logw[mk])
    return TrajectoryRecord(
        t=state.t, dt=state.dt,
        sup_dphidt=float(np.max(F)), inf_dphidt=float(np.min(F)),
        sup_abs_dphidt_mask=float(np.max(np.abs(F[mk]))) if any_mask else 0.0,
        ratio_min=float(np.min(ratio)), ratio_max=float(np.max(ratio)),
        phi_min=float(np.min(phi)), phi_max=float(np.max(phi)),
        phi_min_mask=float(np.min(phi[mk])) if any_mask else math.nan,
        phi_max_mask=float(np.max(phi[mk])) if any_mask else math.nan,
        w_max=float(np.max(w)), w_max_mask=float(np.max(w[mk])) if any_mask else math.nan,
        min_eig=state.min_eig,
        hull=upper_hull(phi, logw),
        hull_mask=upper_hull(phi[mk], logw[mk]) if any_mask else np.empty((0, 2)),
        hull_rho_mask=hull_rho,
    )


@dataclass
class Trajectory:
    setup: GeometrySetup
    mask: AmpMask
    records: list[TrajectoryRecord] = field(default_factory=list)
    initial: FlowState | None = None
    final: FlowState | None = None
    converged: bool = False
    steps: int = 0
    snapshots: list[Path] = field(default_factory=list)

    @property
    def times(self) -> np.ndarray:
        return np.array([r.t for r in self.records])

    def series(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.records])


@dataclass
class FlowConfig:
    method: str = "rk4"
    dt0: float | None = None
    t_max: float = 10.0
    tol_converge: float = 1e-8
    record_interval: float = 0.1
    safety: float = 0.5
    cfl: float = 0.9
    growth: float = 1.5
    mask_delta: float = 1e-3
    slack_max_principle: float = 1e-6
    slack_ratio: float = 1e-6
    slack_sign: float = 1e-8
    slack_c0: float = 1e-6
    fit_stability: float = 0.01
    fit_flat_tolerance: float = 0.05
    max_steps: int | None = None
    snapshot_dir: Path | None = None
    snapshot_every: int = 0  # persist every k-th record; 0 = final state only

    def validate(self) -> None:
        if self.method not in METHODS:
            raise ArgumentError(f"unknown integrator {self.method!r}")
        for name in ("t_max", "tol_converge", "record_interval", "safety", "cfl", "mask_delta",
                     "slack_max_principle", "slack_ratio", "slack_sign", "slack_c0"):
            v = getattr(self, name)
            if not v > 0:
                raise ArgumentError(f"{name} must be positive, got {v}")
        if self.dt0 is not None and not self.dt0 > 0:
            raise ArgumentError(f"dt0 must be positive, got {self.dt0}")


def default_dt0(state: FlowState, setup: GeometrySetup) -> float:
    return 0.1 * setup.grid.spacing ** 2 * state.min_eig ** 2


def save_state(path, state: FlowState, setup: GeometrySetup, kind: str = "phi") -> None:
    geo.write_snapshot(path, {"n": setup.n, "m": setup.m, "N": setup.grid.N, "t": state.t,
                              "c": setup.c, "kind": kind}, [("phi", state.phi)])


def run(setup: GeometrySetup, phi0: ScalarField, config: FlowConfig | None = None,
        rho: ScalarField | None = None, psi: ScalarField | None = None):
    """Integrate until t_max or until sup over the Amp mask of |d phi/dt| < tol.

    Returns (Trajectory, FunctionalLedger, MonitorReport). The C^0 monitor runs
    only when a stationary reference ``psi`` is supplied.
    """
    from . import functionals

    cfg = config or FlowConfig()
    cfg.validate()
    ok, lo = geo.admissible(setup, phi0)
    if not ok:
        raise PreconditionError(f"initial potential is not admissible (min eigenvalue {lo:.3g})")
    state = make_state(setup, phi0)
    mask = setup.mask(cfg.mask_delta)
    traj = Trajectory(setup, mask, initial=state)
    ledger = functionals.FunctionalLedger(setup.n)
    snap_dir = Path(cfg.snapshot_dir) if cfg.snapshot_dir is not None else None

    def capture(s: FlowState) -> None:
        traj.records.append(record_state(s, setup, mask, rho))
        ledger.append(functionals.ledger_row(s, setup))
        if snap_dir is not None and cfg.snapshot_every and (len(traj.records) - 1) % cfg.snapshot_every == 0:
            p = snap_dir / f"phi_{len(traj.records) - 1:06d}.bin"
            save_state(p, s, setup)
            traj.snapshots.append(p)

    capture(state)
    dt_prop = cfg.dt0 if cfg.dt0 is not None else default_dt0(state, setup)
    next_record = cfg.record_interval
    eps_t = 1e-12 * max(1.0, cfg.t_max)

    def converged(s: FlowState) -> bool:
        # an empty mask (chi_tilde = 0) falls back to the whole grid
        F = np.abs(s.dphi_dt.data)
        region = F[mask.mask] if np.any(mask.mask) else F
        return float(np.max(region)) < cfg.tol_converge

    while True:
        if converged(state):
            traj.converged = True
            break
        if state.t >= cfg.t_max - eps_t:
            break
        if cfg.max_steps is not None and traj.steps >= cfg.max_steps:
            break
        cap = stable_dt(state, setup, cfg.method, cfg.cfl)
        target = min(next_record, cfg.t_max)
        dt_try = min(dt_prop, cap, target - state.t)
        new = step(state, setup, dt_try, cfg.method, cfg.safety)
        traj.steps += 1
        if new.dt < dt_try:
            dt_prop = new.dt
        elif dt_try >= dt_prop:
            dt_prop = dt_prop * cfg.growth
        state = new
        if abs(state.t - target) <= eps_t:
            state = replace(state, t=target)
            if target >= next_record - eps_t:
                capture(state)
                next_record += cfg.record_interval
    if traj.records[-1].t != state.t:
        capture(state)
    traj.final = state
    ledger.rows[-1]["converged"] = traj.converged
    if snap_dir is not None:
        p = snap_dir / "phi_final.bin"
        save_state(p, state, setup)
        traj.snapshots.append(p)

    report = monitor_max_principle(traj, cfg.slack_max_principle, cfg.slack_ratio, cfg.slack_sign)
    report.merge(second_order_monitor(traj, rho, cfg.fit_stability, cfg.fit_flat_tolerance))
    if psi is not None:
        report.merge(c0_monitor(traj, psi, cfg.slack_c0))
    return traj, ledger, report


# ---------------------------------------------------------------------------
# monitors


@dataclass
class Check:
    """Worst signed margin of one inequality; negative beyond slack is a violation.

    Advisory checks are reported but do not count as violations.
    """

    name: str
    worst_margin: float
    slack: float
    advisory: bool = False
    worst_t: float | None = None

    @property
    def violated(self) -> bool:
        return self.worst_margin < -self.slack

    def as_dict(self) -> dict:
        return {"name": self.name, "worst_margin": self.worst_margin, "slack": self.slack,
                "violated": self.violated, "advisory": self.advisory, "worst_t": self.worst_t}


@dataclass
class MonitorReport:
    rows: list[dict] = field(default_factory=list)
    checks: dict[str, Check] = field(default_factory=dict)
    fits: dict[str, dict] = field(default_factory=dict)

    def merge(self, other: "MonitorReport") -> "MonitorReport":
        by_t = {r["t"]: r for r in self.rows}
        for row in other.rows:
            if row["t"] in by_t:
                by_t[row["t"]].update(row)
            else:
                self.rows.append(dict(row))
                by_t[row["t"]] = self.rows[-1]
        self.rows.sort(key=lambda r: r["t"])
        self.checks.update(other.checks)
        self.fits.update(other.fits)
        return self

    @property
    def violations(self) -> list[str]:
        return [name for name, c in self.checks.items() if c.violated and not c.advisory]

    def violations_at(self, t: float) -> list[str]:
        for row in self.rows:
            if row["t"] == t:
                return list(row.get("violations", []))
        return []

    def to_dict(self) -> dict:
        return {"checks": {k: c.as_dict() for k, c in self.checks.items()},
                "fits": self.fits, "violations": self.violations}


def _worst(name, margins, times, slack, advisory=False) -> Check:
    margins = np.asarray(margins, dtype=float)
    i = int(np.argmin(margins))
    return Check(name, float(margins[i]), slack, advisory, float(times[i]))


def _tag_rows(rows: list[dict], name: str, margins, slack: float) -> None:
    for row, mg in zip(rows, margins):
        if mg < -slack:
            row.setdefault("violations", []).append(name)


def monitor_max_principle(traj: Trajectory, slack: float = 1e-6, slack_ratio: float = 1e-6,
                          slack_sign: float = 1e-8) -> MonitorReport:
    """d phi/dt and the volume ratio stay in their t = 0 envelopes; sign bracket."""
    if not traj.records:
        raise ArgumentError("empty trajectory")
    recs = traj.records
    t = np.array([r.t for r in recs])
    sup = np.array([r.sup_dphidt for r in recs])
    inf = np.array([r.inf_dphidt for r in recs])
    rmin = np.array([r.ratio_min for r in recs])
    rmax = np.array([r.ratio_max for r in recs])
    m_upper = sup[0] - sup
    m_lower = inf - inf[0]
    m_rmax = (rmax[0] - rmax) / abs(rmax[0])
    m_rmin = (rmin - rmin[0]) / abs(rmin[0])
    m_sup_sign = sup
    m_inf_sign = -inf
    rows = [{"t": float(ti), "sup_dphidt": float(s), "inf_dphidt": float(i), "ratio_min": float(a),
             "ratio_max": float(b)} for ti, s, i, a, b in zip(t, sup, inf, rmin, rmax)]
    checks = {}
    for name, mg, sl in (("dphidt_upper_envelope", m_upper, slack),
                         ("dphidt_lower_envelope", m_lower, slack),
                         ("ratio_upper_envelope", m_rmax, slack_ratio),
                         ("ratio_lower_envelope", m_rmin, slack_ratio),
                         ("sign_bracket_sup", m_sup_sign, slack_sign),
                         ("sign_bracket_inf", m_inf_sign, slack_sign)):
        checks[name] = _worst(name, mg, t, sl)
        _tag_rows(rows, name, mg, sl)
    return MonitorReport(rows, checks)


def _envelope_fit(lines_y: np.ndarray, lines_s: np.ndarray, a_max: float = 50.0):
    """Minimize g(A) = max_i (y_i - A s_i) over 0 <= A <= a_max; smallest minimizer.

    Returns (A, log C, bounded) where bounded is False if the minimizer hit a_max.
    """
    y = np.asarray(lines_y, dtype=float)
    s = np.asarray(lines_s, dtype=float)

    def g(A):
        return float(np.max(y - A * s))

    g0 = g(0.0)
    # g is convex; if it does not decrease at 0+ the minimum is at 0
    top = y >= g0 - 1e-14 * max(1.0, abs(g0))
    if np.max(s[top]) <= 0:
        return 0.0, g0, True
    res = minimize_scalar(g, bounds=(0.0, a_max), method="bounded",
                          options={"xatol": 1e-10 * a_max})
    A = float(res.x)
    gA = g(A)
    if g0 <= gA + 1e-13 * max(1.0, abs(gA)):
        return 0.0, g0, True
    return A, gA, A < a_max * (1 - 1e-6)


def _fit_records(records, c: float, hull_attr: str, with_phi: bool = True, with_t: bool = True):
    ys, ss = [], []
    for r in records:
        h = getattr(r, hull_attr)
        if h is None or len(h) == 0:
            continue
        shift = c * r.t if with_t else 0.0
        ys.append(h[:, 1])
        ss.append((h[:, 0] if with_phi else 0.0 * h[:, 0]) + shift)
    if not ys:
        return None
    A, logC, bounded = _envelope_fit(np.concatenate(ys), np.concatenate(ss))
    return {"A": A, "C": math.exp(logC), "log_C": logC, "bounded": bounded}


def _rel(a: float, b: float, floor: float) -> float:
    return abs(a - b) / max(abs(b), floor)


def _stability(records, c, hull_attr, tol, with_phi=True, with_t=True):
    full = _fit_records(records, c, hull_attr, with_phi, with_t)
    if full is None:
        return None
    t_end = records[-1].t
    t_start = records[0].t
    cut = t_end - 0.25 * (t_end - t_start)
    worst = 0.0
    for k, r in enumerate(records):
        if r.t < cut or k == len(records) - 1:
            continue
        part = _fit_records(records[:k + 1], c, hull_attr, with_phi, with_t)
        if part is None:
            continue
        worst = max(worst, _rel(part["C"], full["C"], 1e-300), _rel(part["A"], full["A"], 1e-3))
    full["max_rel_change_last_quarter"] = worst
    full["stabilized"] = bool(worst < tol)
    return full


def second_order_monitor(traj: Trajectory, rho: ScalarField | None = None, stability_tol: float = 0.01,
                         flat_tolerance: float = 0.05) -> MonitorReport:
    """Fit w <= C exp(A (phi + c t)) globally, and w <= C exp(A (phi - rho)) on the mask."""
    if not traj.records:
        raise ArgumentError("empty trajectory")
    c = traj.setup.c
    recs = traj.records
    fits = {}
    fits["global"] = _stability(recs, c, "hull", stability_tol)
    mask_fit = _stability(recs, c, "hull_mask", stability_tol)
    if mask_fit is not None:
        fits["mask"] = mask_fit
        # t-only envelope of max w on the mask: growth needed beyond a flat bound
        y = np.log(np.array([r.w_max_mask for r in recs]))
        s = np.array([c * r.t for r in recs])
        A, logC, _ = _envelope_fit(y, s)
        t_end = recs[-1].t
        growth = A * c * t_end
        fits["mask_time"] = {"A": A, "C": math.exp(logC), "growth_log": growth,
                             "C_flat": float(np.exp(np.max(y))),
                             "t_independent": bool(math.exp(growth) <= 1 + flat_tolerance)}
    if rho is not None and recs[0].hull_rho_mask is not None:
        fits["mask_rho"] = _stability(recs, c, "hull_rho_mask", stability_tol, with_t=False)
    rows = [{"t": r.t, "w_max": r.w_max, "w_max_mask": r.w_max_mask} for r in recs]
    return MonitorReport(rows, {}, fits)


def c0_monitor(traj: Trajectory, psi: ScalarField, slack: float = 1e-6) -> MonitorReport:
    """Time-independent bounds on phi from the stationary reference psi (sup psi = 0).

    Checked: max phi <= max phi_0 + |psi|_inf and min phi >= min phi_0 - |psi|_inf.
    The sharper lower bound min phi >= min phi_0 is reported as an advisory
    check ``c0_lower_literal``: its derivation drops the term psi(z) <= 0 and
    it fails whenever chi + chi_tilde is not already stationary.
    """
    if not traj.records:
        raise ArgumentError("empty trajectory")
    recs = traj.records
    t = np.array([r.t for r in recs])
    pmax = np.array([r.phi_max for r in recs])
    pmin = np.array([r.phi_min for r in recs])
    psi_norm = float(np.max(np.abs(psi.data)))
    upper = pmax[0] + psi_norm
    m_up = upper - pmax
    m_lo = pmin - (pmin[0] - psi_norm)
    m_lit = pmin - pmin[0]
    rows = [{"t": float(ti), "phi_min": float(a), "phi_max": float(b)} for ti, a, b in zip(t, pmin, pmax)]
    checks = {
        "c0_upper": _worst("c0_upper", m_up, t, slack),
        "c0_lower": _worst("c0_lower", m_lo, t, slack),
        "c0_lower_literal": _worst("c0_lower_literal", m_lit, t, slack, advisory=True),
    }
    _tag_rows(rows, "c0_upper", m_up, slack)
    _tag_rows(rows, "c0_lower", m_lo, slack)
    return MonitorReport(rows, checks, {"c0": {"psi_sup_norm": psi_norm, "upper_bound": upper,
                                               "lower_bound": float(pmin[0] - psi_norm),
                                               "lower_bound_literal": float(pmin[0])}})
