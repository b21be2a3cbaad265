"""J-functionals, the combined functional and their identities along the flow.

With A = chi + chi_tilde and X_u = A + i dd-bar u, the straight-line formula is

    J_i(A, u) = 1/(i+1) * sum_{j=0}^{i} int u X_u^j ^ A^{i-j} ^ omega^{n-i}.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.integrate import simpson

from . import geometry as geo
from .errors import ArgumentError, GeometryError
from .geometry import ScalarField

LEDGER_KEYS = ("t", "dt", "sup_dphidt", "inf_dphidt", "ratio_min", "ratio_max", "phi_min", "phi_max",
               "w_max", "J", "combined", "dissipation", "theorem_norm", "violations")


def _X_data(u: ScalarField, setup) -> np.ndarray:
    X = setup.base.data + geo.complex_hessian(u, setup.diff_method).data
    lo = float(np.min(geo.rel_eigvals(X, setup.omega)[..., 0]))
    if not lo > 0:
        raise GeometryError(f"potential is not admissible (min eigenvalue {lo:.3g})", value=lo)
    return X


def _density_table(u: ScalarField, setup, X: np.ndarray | None = None) -> np.ndarray:
    """Monomial densities omega^{n-a-b} ^ A^a ^ X_u^b, indexed [..., a, b]."""
    if X is None:
        X = _X_data(u, setup)
    return geo.mixed_density_table([setup.omega.data, setup.base.data, X])


def j_all(u: ScalarField, setup, X: np.ndarray | None = None) -> np.ndarray:
    """J_0..J_n of u by the straight-line formula."""
    n = setup.n
    table = _density_table(u, setup, X)
    grid = setup.grid
    out = np.zeros(n + 1)
    for i in range(n + 1):
        dens = sum(table[..., i - j, j] for j in range(i + 1))
        out[i] = grid.integrate(u.data * dens) / (i + 1)
    return out


def j_functional(i: int, u: ScalarField, setup) -> float:
    if not 0 <= i <= setup.n:
        raise ArgumentError(f"functional index {i} outside 0..{setup.n}")
    return float(j_all(u, setup)[i])


def j_functional_path(i: int, u: ScalarField, setup, nodes: int = 65) -> float:
    """J_i by Simpson quadrature of dJ_i/ds = int u X_{su}^i ^ omega^{n-i} over s in [0, 1]."""
    if not 0 <= i <= setup.n:
        raise ArgumentError(f"functional index {i} outside 0..{setup.n}")
    if nodes < 3 or nodes % 2 == 0:
        raise ArgumentError("Simpson quadrature needs an odd number of nodes >= 3")
    H = geo.complex_hessian(u, setup.diff_method).data
    n = setup.n
    s = np.linspace(0.0, 1.0, nodes)
    vals = np.empty(nodes)
    for k, sk in enumerate(s):
        X = setup.base.data + sk * H
        table = geo.mixed_density_table([setup.omega.data, X])
        vals[k] = setup.grid.integrate(u.data * table[..., i]) if n > 0 else 0.0
    return float(simpson(vals, x=s))


def combined_functional(u: ScalarField, setup, J: np.ndarray | None = None) -> float:
    """c J_n - n J_m, with c taken from the setup."""
    J = j_all(u, setup) if J is None else J
    return float(setup.c * J[setup.n] - setup.n * J[setup.m])


def dissipation(state, setup) -> float:
    """int (d phi/dt)^2 X^n  (always >= 0)."""
    from .flow import FlowState

    if not isinstance(state, FlowState):
        raise ArgumentError("dissipation needs a FlowState with a fresh d phi/dt cache")
    dens = geo.wedge_density([(state.X, setup.n)], setup.omega)
    return float(setup.grid.integrate(state.dphi_dt.data ** 2 * dens))


def theorem_normalization(u: ScalarField, setup, X: np.ndarray | None = None) -> float:
    """sum_{i=0}^{n} int u X_u^i ^ A^{n-i}."""
    if X is None:
        X = _X_data(u, setup)
    table = geo.mixed_density_table([setup.base.data, X])
    dens = sum(table[..., i] for i in range(setup.n + 1))
    return float(setup.grid.integrate(u.data * dens))


def ledger_row(state, setup) -> dict:
    """Functional values of one flow state plus the flow scalars of the ledger schema."""
    X = state.X.data
    J = j_all(state.phi, setup, X)
    F = state.dphi_dt.data
    ratio = math.comb(setup.n, setup.m) * setup.rhs_factor / (setup.c - F)
    return {
        "t": float(state.t),
        "dt": float(state.dt),
        "sup_dphidt": float(np.max(F)),
        "inf_dphidt": float(np.min(F)),
        "ratio_min": float(np.min(ratio)),
        "ratio_max": float(np.max(ratio)),
        "phi_min": float(np.min(state.phi.data)),
        "phi_max": float(np.max(state.phi.data)),
        "w_max": float(np.max(state.w.data)),
        "J": [float(v) for v in J],
        "combined": combined_functional(state.phi, setup, J),
        "dissipation": dissipation(state, setup),
        "theorem_norm": theorem_normalization(state.phi, setup, X),
        "violations": [],
    }


@dataclass
class FunctionalLedger:
    n: int
    rows: list[dict] = field(default_factory=list)

    def append(self, row: dict) -> None:
        if self.rows and not row["t"] > self.rows[-1]["t"]:
            raise ArgumentError(f"ledger times must increase strictly ({row['t']} after {self.rows[-1]['t']})")
        self.rows.append(row)

    def __len__(self) -> int:
        return len(self.rows)

    def column(self, key: str) -> np.ndarray:
        return np.array([r[key] for r in self.rows], dtype=float)

    @property
    def times(self) -> np.ndarray:
        return self.column("t")

    @property
    def J(self) -> np.ndarray:
        return np.array([r["J"] for r in self.rows], dtype=float)

    def write_jsonl(self, path) -> None:
        with open(path, "w") as fh:
            for row in self.rows:
                fh.write(json.dumps(row) + "\n")

    @classmethod
    def read_jsonl(cls, path) -> "FunctionalLedger":
        from .errors import LedgerFormatError

        raw = Path(path).read_bytes()
        rows = []
        offset = 0
        for line in raw.splitlines(keepends=True):
            text = line.strip()
            if text:
                try:
                    row = json.loads(text)
                except json.JSONDecodeError as exc:
                    raise LedgerFormatError(f"malformed ledger line: {exc.msg}", offset) from None
                if not line.endswith(b"\n"):
                    raise LedgerFormatError("truncated ledger line", offset)
                missing = [k for k in ("t", "J", "combined") if k not in row]
                if missing:
                    raise LedgerFormatError(f"ledger row lacks keys {missing}", offset)
                rows.append(row)
            offset += len(line)
        if not rows:
            raise LedgerFormatError("empty ledger", 0)
        ledger = cls(len(rows[0]["J"]) - 1)
        for r in rows:
            ledger.append(r)
        return ledger


def dissipation_check(ledger: FunctionalLedger, floor: float = 1e-10):
    """Central-difference d/dt combined vs dissipation at interior rows.

    Returns (times, derivative, dissipation, relative error) for rows whose
    dissipation exceeds ``floor``.
    """
    t = ledger.times
    comb = ledger.column("combined")
    diss = ledger.column("dissipation")
    out = []
    for k in range(1, len(t) - 1):
        if diss[k] <= floor:
            continue
        h1, h2 = t[k] - t[k - 1], t[k + 1] - t[k]
        # three-point derivative on a nonuniform stencil
        d = (-h2 / (h1 * (h1 + h2)) * comb[k - 1] + (h2 - h1) / (h1 * h2) * comb[k]
             + h1 / (h2 * (h1 + h2)) * comb[k + 1])
        out.append((t[k], d, diss[k], abs(d - diss[k]) / diss[k]))
    if not out:
        return tuple(np.empty(0) for _ in range(4))
    return tuple(np.array(col) for col in zip(*out))


def cumulative_dissipation(ledger: FunctionalLedger) -> float:
    """Trapezoidal integral of the dissipation over the recorded times."""
    t = ledger.times
    d = ledger.column("dissipation")
    return float(np.sum(0.5 * (d[1:] + d[:-1]) * np.diff(t)))
