"""Flat periodic model geometry.

Potentials live on the unit real torus [0,1)^n and depend only on the real
parts of the complex coordinates, so the complex Hessian is one quarter of
the real Hessian. Derivatives are spectral by default; a fourth-order
finite-difference symbol is available for robustness experiments.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from functools import cached_property
from math import comb, factorial
from pathlib import Path
from typing import TYPE_CHECKING, Sequence

import numpy as np
import scipy.fft as sfft

from . import herm
from .errors import ArgumentError, GeometryError

if TYPE_CHECKING:
    from .flow import GeometrySetup

SNAPSHOT_SCHEMA = "jflow-field/1"
KAHLER_FROM_POTENTIAL = "kahler-from-potential"
PLAIN = "plain"


@dataclass(frozen=True)
class PeriodicGrid:
    n: int
    points_per_axis: int

    def __post_init__(self):
        N = self.points_per_axis
        if not 1 <= self.n <= herm.MAX_DIM:
            raise ArgumentError(f"complex dimension {self.n} outside 1..{herm.MAX_DIM}")
        if N < 4 or N % 2:
            raise ArgumentError(f"points_per_axis must be even and >= 4, got {N}")
        if abs(self.spacing * N - 1.0) > 1e-15:
            raise ArgumentError("grid spacing inconsistent with unit torus")

    @property
    def N(self) -> int:
        return self.points_per_axis

    @property
    def spacing(self) -> float:
        return 1.0 / self.points_per_axis

    @property
    def total_points(self) -> int:
        return self.points_per_axis ** self.n

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.points_per_axis,) * self.n

    @property
    def cell_volume(self) -> float:
        return self.spacing ** self.n

    def coords(self) -> tuple[np.ndarray, ...]:
        x = np.arange(self.N) * self.spacing
        return tuple(np.meshgrid(*([x] * self.n), indexing="ij"))

    def integrate(self, values: np.ndarray) -> float:
        # np.sum over a contiguous array is a fixed pairwise reduction
        return float(np.sum(np.ascontiguousarray(values))) * self.cell_volume


# ---------------------------------------------------------------------------
# differentiation


class Differentiator:
    """Fourier symbols of d/dx_j and d^2/dx_j dx_k on a periodic grid."""

    METHODS = ("spectral", "fd4")

    def __init__(self, grid: PeriodicGrid, method: str = "spectral"):
        if method not in self.METHODS:
            raise ArgumentError(f"unknown differentiation method {method!r}")
        self.grid = grid
        self.method = method
        N, n, h = grid.N, grid.n, grid.spacing
        freqs = [np.fft.fftfreq(N, d=1.0 / N)] * (n - 1) + [np.fft.rfftfreq(N, d=1.0 / N)]
        first, second = [], []
        for j, k in enumerate(freqs):
            k = k.copy()
            if method == "spectral":
                k[np.abs(k) == N // 2] = 0.0  # Nyquist carries no odd derivative
                s1 = 2j * np.pi * k
                s2 = -(2 * np.pi * k) ** 2
            else:
                th = 2 * np.pi * k / N
                s1 = 1j * (8 * np.sin(th) - np.sin(2 * th)) / (6 * h)
                s2 = (-2 * np.cos(2 * th) + 32 * np.cos(th) - 30) / (12 * h * h)
            shape = [1] * n
            shape[j] = len(k)
            first.append(s1.reshape(shape))
            second.append(s2.reshape(shape))
        self.first = first
        self.second = second
        self.max_second = max(float(np.max(np.abs(s))) for s in second)
        max_first = max(float(np.max(np.abs(s))) for s in first)
        # bound on the spectral norm of the Hessian symbol matrix over all modes
        if method == "spectral":
            self.hessian_norm_bound = n * self.max_second
        else:
            self.hessian_norm_bound = n * self.max_second + n * (n - 1) * max_first ** 2
        keep = np.ones(tuple(len(f) for f in freqs), dtype=bool)
        for j, k in enumerate(freqs):
            shape = [1] * n
            shape[j] = len(k)
            keep = keep & (np.abs(k) != N // 2).reshape(shape)
        self.non_nyquist = keep

    def symbol(self, j: int, k: int) -> np.ndarray:
        return self.second[j] if j == k else self.first[j] * self.first[k]

    def forward(self, u: np.ndarray) -> np.ndarray:
        return sfft.rfftn(u)

    def inverse(self, U: np.ndarray) -> np.ndarray:
        return sfft.irfftn(U, s=self.grid.shape)

    def hessian(self, u: np.ndarray) -> np.ndarray:
        """Real Hessian, shape grid.shape + (n, n)."""
        n = self.grid.n
        U = self.forward(u)
        H = np.empty(self.grid.shape + (n, n))
        for j in range(n):
            for k in range(j, n):
                H[..., j, k] = self.inverse(self.symbol(j, k) * U)
                if k != j:
                    H[..., k, j] = H[..., j, k]
        return H

    def filter_nyquist(self, u: np.ndarray) -> np.ndarray:
        """Drop modes sitting on the Nyquist frequency of any axis."""
        return self.inverse(self.forward(u) * self.non_nyquist)


_DIFF_CACHE: dict[tuple, Differentiator] = {}


def differentiator(grid: PeriodicGrid, method: str = "spectral") -> Differentiator:
    key = (grid.n, grid.N, method)
    if key not in _DIFF_CACHE:
        _DIFF_CACHE[key] = Differentiator(grid, method)
    return _DIFF_CACHE[key]


# ---------------------------------------------------------------------------
# fields


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class ScalarField:
    grid: PeriodicGrid
    data: np.ndarray

    def __post_init__(self):
        d = np.array(self.data, dtype=float)
        if d.size != self.grid.total_points:
            raise ArgumentError(f"field has {d.size} values, grid has {self.grid.total_points}")
        d = d.reshape(self.grid.shape)
        if not np.all(np.isfinite(d)):
            raise ArgumentError("scalar field has non-finite entries")
        object.__setattr__(self, "data", _frozen(d))

    @classmethod
    def zeros(cls, grid: PeriodicGrid) -> "ScalarField":
        return cls(grid, np.zeros(grid.shape))

    @classmethod
    def constant(cls, grid: PeriodicGrid, value: float) -> "ScalarField":
        return cls(grid, np.full(grid.shape, float(value)))

    @classmethod
    def from_function(cls, grid: PeriodicGrid, f) -> "ScalarField":
        return cls(grid, f(*grid.coords()))

    def __add__(self, other):
        if isinstance(other, ScalarField):
            return ScalarField(self.grid, self.data + other.data)
        return ScalarField(self.grid, self.data + other)

    def __sub__(self, other):
        if isinstance(other, ScalarField):
            return ScalarField(self.grid, self.data - other.data)
        return ScalarField(self.grid, self.data - other)

    def __mul__(self, s: float):
        return ScalarField(self.grid, self.data * s)

    __rmul__ = __mul__

    def __neg__(self):
        return ScalarField(self.grid, -self.data)

    @property
    def max(self) -> float:
        return float(np.max(self.data))

    @property
    def min(self) -> float:
        return float(np.min(self.data))


@dataclass(frozen=True, eq=False)
class HermFormField:
    """One Hermitian n x n matrix per grid point.

    Fields tagged ``kahler-from-potential`` equal ``base + complex_hessian
    (potential)`` for the stored constant ``base`` and ``potential``; that is
    the closedness surrogate the functional identities rely on.
    """

    grid: PeriodicGrid
    data: np.ndarray
    kind: str = PLAIN
    base: np.ndarray | None = None
    potential: ScalarField | None = None
    diff_method: str = "spectral"

    def __post_init__(self):
        n = self.grid.n
        d = np.array(self.data)
        if d.shape != self.grid.shape + (n, n):
            d = d.reshape(self.grid.shape + (n, n))
        skew = np.max(np.abs(d - np.swapaxes(d, -1, -2).conj())) if d.size else 0.0
        if skew > herm.HERMITIAN_TOL:
            raise ArgumentError(f"form field is not Hermitian (deviation {skew:.3g})")
        d = 0.5 * (d + np.swapaxes(d, -1, -2).conj())
        if np.iscomplexobj(d) and np.max(np.abs(d.imag)) == 0.0:
            d = d.real
        if not np.all(np.isfinite(d)):
            raise ArgumentError("form field has non-finite entries")
        object.__setattr__(self, "data", _frozen(d))
        if self.kind == KAHLER_FROM_POTENTIAL:
            if self.base is None or self.potential is None:
                raise ArgumentError("potential-tagged field needs base and potential")
            object.__setattr__(self, "base", _frozen(np.array(self.base)))

    @property
    def n(self) -> int:
        return self.grid.n

    @classmethod
    def constant(cls, grid: PeriodicGrid, matrix, diff_method: str = "spectral") -> "HermFormField":
        M = herm.HermForm(np.asarray(matrix)).entries
        if M.shape != (grid.n, grid.n):
            raise ArgumentError(f"constant form has shape {M.shape}, need ({grid.n},{grid.n})")
        data = np.broadcast_to(M, grid.shape + M.shape)
        return cls(grid, data, KAHLER_FROM_POTENTIAL, M, ScalarField.zeros(grid), diff_method)

    @classmethod
    def from_potential(cls, base, potential: ScalarField,
                       diff_method: str = "spectral") -> "HermFormField":
        grid = potential.grid
        M = herm.HermForm(np.asarray(base)).entries
        H = complex_hessian(potential, diff_method).data
        return cls(grid, M + H, KAHLER_FROM_POTENTIAL, M, potential, diff_method)

    @cached_property
    def is_constant(self) -> bool:
        d = self.data.reshape(-1, self.n, self.n)
        return bool(np.all(d == d[0]))

    def at(self, index) -> herm.HermForm:
        return herm.HermForm(self.data[index])

    def __add__(self, other: "HermFormField") -> "HermFormField":
        if (self.kind == KAHLER_FROM_POTENTIAL and other.kind == KAHLER_FROM_POTENTIAL
                and self.diff_method == other.diff_method):
            return HermFormField(self.grid, self.data + other.data, KAHLER_FROM_POTENTIAL,
                                 self.base + other.base, self.potential + other.potential,
                                 self.diff_method)
        return HermFormField(self.grid, self.data + other.data)

    def scaled(self, s: float) -> "HermFormField":
        if self.kind == KAHLER_FROM_POTENTIAL:
            return HermFormField(self.grid, s * self.data, KAHLER_FROM_POTENTIAL,
                                 s * self.base, self.potential * s, self.diff_method)
        return HermFormField(self.grid, s * self.data)


@dataclass(frozen=True, eq=False)
class AmpMask:
    grid: PeriodicGrid
    mask: np.ndarray
    delta: float

    @property
    def fraction(self) -> float:
        return float(np.mean(self.mask))


def complex_hessian(phi: ScalarField, method: str = "spectral") -> HermFormField:
    """(i dd-bar phi)_{jk} = (1/4) d^2 phi / dx_j dx_k under the torus reduction."""
    grid = phi.grid
    H = 0.25 * differentiator(grid, method).hessian(phi.data)
    return HermFormField(grid, H, KAHLER_FROM_POTENTIAL, np.zeros((grid.n, grid.n)), phi, method)


def trig_potential(grid: PeriodicGrid, modes: Sequence[tuple]) -> ScalarField:
    """Sum of amp * cos(2 pi k.x + phase) over ``modes`` = [(amp, k, phase), ...]."""
    xs = grid.coords()
    u = np.zeros(grid.shape)
    for mode in modes:
        amp, k = mode[0], mode[1]
        phase = mode[2] if len(mode) > 2 else 0.0
        k = tuple(k)
        if len(k) != grid.n:
            raise ArgumentError(f"wave vector {k} does not match dimension {grid.n}")
        if max(abs(int(q)) for q in k) >= grid.N // 2:
            raise ArgumentError(f"wave vector {k} not resolved below Nyquist on N={grid.N}")
        arg = sum(2 * np.pi * q * x for q, x in zip(k, xs))
        u += amp * np.cos(arg + phase)
    return ScalarField(grid, u)


# ---------------------------------------------------------------------------
# pointwise algebra over fields


def whiten(X: np.ndarray, omega: HermFormField) -> np.ndarray:
    """W X W* with W = L^{-1}, omega = L L*, pointwise."""
    if omega.is_constant:
        M = omega.data.reshape(-1, omega.n, omega.n)[0]
        if np.array_equal(M, np.eye(omega.n)):
            return X
        W = herm.whitener(M)
        return W @ X @ W.conj().T
    L = np.linalg.cholesky(omega.data)
    eye = np.broadcast_to(np.eye(omega.n), L.shape)
    W = np.linalg.solve(L, eye)
    return W @ X @ np.swapaxes(W, -1, -2).conj()


def rel_coeffs(X: np.ndarray, omega: HermFormField) -> np.ndarray:
    """e_0..e_n of the eigenvalues of X relative to omega, per point."""
    return herm.sym_coeffs(whiten(X, omega))


def rel_eigvals(X: np.ndarray, omega: HermFormField) -> np.ndarray:
    return np.linalg.eigvalsh(whiten(X, omega))


def rel_eigh(X: np.ndarray, omega: HermFormField):
    """Eigenvalues and omega-orthonormal eigenvectors (V* omega V = I) per point."""
    lam, U = np.linalg.eigh(whiten(X, omega))
    if omega.is_constant:
        M = omega.data.reshape(-1, omega.n, omega.n)[0]
        if np.array_equal(M, np.eye(omega.n)):
            return lam, U
        W = herm.whitener(M)
        return lam, W.conj().T @ U
    L = np.linalg.cholesky(omega.data)
    eye = np.broadcast_to(np.eye(omega.n), L.shape)
    W = np.linalg.solve(L, eye)
    return lam, np.swapaxes(W, -1, -2).conj() @ U


def omega_volume_density(omega: HermFormField) -> np.ndarray:
    """det(omega) per point: the density of omega^n against the unit-torus volume."""
    return np.real(herm._det_small(omega.data)) if omega.n <= 3 else np.real(np.linalg.det(omega.data))


def mixed_density_table(forms: Sequence[np.ndarray]) -> np.ndarray:
    """Densities of every wedge monomial F_1^{e_1} ^ ... ^ F_k^{e_k}, sum e = n.

    Returns an array indexed ``[..., e_2, ..., e_k]`` (e_1 = n - sum of the
    rest; entries with a negative e_1 are zero). Densities are normalized so
    that the identity form to the n-th power has density 1.

    det(F_1 + z_2 F_2 + ... + z_k F_k) is sampled on (n+1)-th roots of unity
    and the monomial coefficients recovered by an exact discrete Fourier
    transform; the coefficient of z^e times prod(e!)/n! is the density.
    """
    k = len(forms)
    F0 = np.asarray(forms[0])
    n = F0.shape[-1]
    pts = F0.shape[:-2]
    if k == 1:
        return np.real(herm._det_small(F0) if n <= 3 else np.linalg.det(F0))
    zeta = np.exp(2j * np.pi * np.arange(n + 1) / (n + 1))
    samples = np.empty(pts + (n + 1,) * (k - 1), dtype=complex)
    for a in itertools.product(range(n + 1), repeat=k - 1):
        M = F0.astype(complex)
        for r, ar in enumerate(a):
            M = M + zeta[ar] * np.asarray(forms[r + 1])
        samples[(Ellipsis,) + a] = herm._det_small(M) if n <= 3 else np.linalg.det(M)
    axes = tuple(range(len(pts), len(pts) + k - 1))
    coeffs = np.fft.fftn(samples, axes=axes) / (n + 1) ** (k - 1)
    coeffs = np.real(coeffs)
    out = np.zeros_like(coeffs)
    for e in itertools.product(range(n + 1), repeat=k - 1):
        e1 = n - sum(e)
        if e1 < 0:
            continue
        w = factorial(e1)
        for q in e:
            w *= factorial(q)
        out[(Ellipsis,) + e] = coeffs[(Ellipsis,) + e] * w / factorial(n)
    return out


def wedge_density(terms: Sequence[tuple[HermFormField, int]],
                  reference: HermFormField | None = None) -> np.ndarray:
    """Pointwise density of the wedge product of ``terms`` = [(field, power), ...]."""
    terms = [(f, int(e)) for f, e in terms if int(e) != 0]
    if not terms:
        raise ArgumentError("empty wedge product")
    n = terms[0][0].n
    if sum(e for _, e in terms) != n or any(e < 0 for _, e in terms):
        raise ArgumentError(f"exponents {[e for _, e in terms]} must be nonnegative and sum to n={n}")
    distinct: list[HermFormField] = []
    powers: list[int] = []
    for f, e in terms:
        for i, g in enumerate(distinct):
            if g is f:
                powers[i] += e
                break
        else:
            distinct.append(f)
            powers.append(e)
    if len(distinct) == 1:
        return mixed_density_table([distinct[0].data])
    if reference is not None and len(distinct) == 2 and any(g is reference for g in distinct):
        i_ref = next(i for i, g in enumerate(distinct) if g is reference)
        other = distinct[1 - i_ref]
        j = powers[1 - i_ref]
        return omega_volume_density(reference) * rel_coeffs(other.data, reference)[..., j] / comb(n, j)
    table = mixed_density_table([g.data for g in distinct])
    return table[(Ellipsis,) + tuple(powers[1:])]


def wedge_integral(fields: Sequence[tuple[HermFormField, int]], reference: HermFormField | None = None,
                   weight: np.ndarray | ScalarField | None = None) -> float:
    """Trapezoidal integral of a wedge product (optionally times a scalar weight)."""
    dens = wedge_density(fields, reference)
    grid = fields[0][0].grid
    if weight is not None:
        w = weight.data if isinstance(weight, ScalarField) else np.asarray(weight)
        dens = dens * w
    return grid.integrate(dens)


def amp_locus(chi_tilde: HermFormField, omega: HermFormField, delta: float = 1e-3) -> AmpMask:
    if not delta > 0:
        raise ArgumentError(f"mask threshold must be positive, got {delta}")
    lam = rel_eigvals(chi_tilde.data, omega)
    return AmpMask(chi_tilde.grid, _frozen(lam[..., 0] >= delta), float(delta))


def admissible(setup: "GeometrySetup", phi: ScalarField) -> tuple[bool, float]:
    """Whether chi + chi_tilde + i dd-bar phi > 0 everywhere, and its least eigenvalue."""
    X = setup.base.data + complex_hessian(phi, setup.diff_method).data
    lo = float(np.min(rel_eigvals(X, setup.omega)[..., 0]))
    return lo > 0, lo


# ---------------------------------------------------------------------------
# snapshots


def _herm_to_raw(data: np.ndarray) -> np.ndarray:
    c = np.asarray(data, dtype=complex).reshape(-1)
    out = np.empty(2 * c.size, dtype="<f8")
    out[0::2] = c.real
    out[1::2] = c.imag
    return out


def _raw_to_herm(raw: np.ndarray, grid: PeriodicGrid) -> np.ndarray:
    c = raw[0::2] + 1j * raw[1::2]
    c = c.reshape(grid.shape + (grid.n, grid.n))
    return c.real.copy() if np.all(c.imag == 0) else c


def write_snapshot(path, header: dict, arrays: Sequence[tuple[str, object]]) -> None:
    """Write a JSON header line followed by little-endian float64 arrays.

    ``arrays`` holds (name, ScalarField | HermFormField | ndarray-of-grid-shape).
    """
    head = {"schema": SNAPSHOT_SCHEMA}
    head.update(header)
    head["arrays"] = []
    blobs = []
    for name, obj in arrays:
        if isinstance(obj, HermFormField):
            head["arrays"].append({"name": name, "type": "herm"})
            blobs.append(_herm_to_raw(obj.data))
        else:
            data = obj.data if isinstance(obj, ScalarField) else np.asarray(obj)
            head["arrays"].append({"name": name, "type": "scalar"})
            blobs.append(np.ascontiguousarray(data, dtype="<f8").reshape(-1))
    with open(path, "wb") as fh:
        fh.write((json.dumps(head) + "\n").encode())
        for b in blobs:
            fh.write(b.tobytes())


def read_snapshot(path) -> tuple[dict, dict[str, np.ndarray]]:
    raw = Path(path).read_bytes()
    nl = raw.index(b"\n")
    head = json.loads(raw[:nl])
    if head.get("schema") != SNAPSHOT_SCHEMA:
        raise ArgumentError(f"unknown snapshot schema {head.get('schema')!r}")
    grid = PeriodicGrid(int(head["n"]), int(head["N"]))
    body = np.frombuffer(raw[nl + 1:], dtype="<f8")
    out = {}
    pos = 0
    for spec in head["arrays"]:
        if spec["type"] == "herm":
            size = 2 * grid.total_points * grid.n ** 2
            out[spec["name"]] = _raw_to_herm(body[pos:pos + size], grid)
        else:
            size = grid.total_points
            out[spec["name"]] = body[pos:pos + size].reshape(grid.shape).copy()
        pos += size
    if pos != body.size:
        raise ArgumentError(f"snapshot payload has {body.size - pos} trailing values")
    return head, out
