"""Pointwise algebra of Hermitian (1,1)-forms.

Everything here acts on a single point (one n x n matrix) or on a stack of
matrices with the matrix axes last. Wedge products of (1,1)-forms are
expressed through generalized eigenvalues and elementary symmetric
polynomials; :func:`mixed_discriminant` is the brute-force polarization used
to cross-check those shortcuts.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from math import comb, factorial

import numpy as np
from scipy.linalg import solve_triangular

from .errors import ArgumentError, GeometryError

HERMITIAN_TOL = 1e-12
MAX_DIM = 8


@dataclass(frozen=True)
class HermForm:
    """A Hermitian matrix standing for a real (1,1)-form at one point.

    Input within ``HERMITIAN_TOL`` of Hermitian is symmetrized; anything
    further off is rejected.
    """

    entries: np.ndarray

    def __post_init__(self):
        M = np.array(self.entries)
        if M.ndim != 2 or M.shape[0] != M.shape[1] or M.shape[0] < 1:
            raise ArgumentError(f"expected a square matrix, got shape {M.shape}")
        if not np.all(np.isfinite(M)):
            raise ArgumentError("form entries must be finite")
        skew = np.max(np.abs(M - M.conj().T))
        if skew > HERMITIAN_TOL:
            raise ArgumentError(f"matrix is not Hermitian (deviation {skew:.3g})")
        M = 0.5 * (M + M.conj().T)
        if np.isrealobj(M) or np.max(np.abs(M.imag)) == 0.0:
            M = np.ascontiguousarray(M.real, dtype=float)
        M.setflags(write=False)
        object.__setattr__(self, "entries", M)

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    @classmethod
    def identity(cls, n: int) -> "HermForm":
        return cls(np.eye(n))

    @classmethod
    def diag(cls, values) -> "HermForm":
        return cls(np.diag(np.asarray(values, dtype=float)))

    def __add__(self, other: "HermForm") -> "HermForm":
        return HermForm(self.entries + other.entries)

    def scaled(self, s: float) -> "HermForm":
        return HermForm(s * self.entries)


@dataclass(frozen=True)
class EigenSpectrum:
    values: np.ndarray  # ascending
    basis_conditioning: float

    @property
    def min(self) -> float:
        return float(self.values[0])


def _as_matrix(A) -> np.ndarray:
    return A.entries if isinstance(A, HermForm) else np.asarray(A)


# ---------------------------------------------------------------------------
# elementary symmetric polynomials


def elem_sym(k: int, values) -> float:
    """k-th elementary symmetric polynomial of ``values`` (e_0 = 1).

    Works for any number type supporting ``+`` and ``*`` (floats, Fractions).
    """
    vals = list(values)
    if k < 0 or k > len(vals):
        raise ArgumentError(f"degree {k} outside 0..{len(vals)}")
    e = [1] + [0] * k
    for x in vals:
        for j in range(k, 0, -1):
            e[j] = e[j] + x * e[j - 1]
    return e[k]


def elem_sym_partial(k: int, i: int, values) -> float:
    """e_k of ``values`` with entry ``i`` removed."""
    vals = list(values)
    if not 0 <= i < len(vals):
        raise ArgumentError(f"index {i} outside 0..{len(vals) - 1}")
    if k < 0 or k > len(vals) - 1:
        raise ArgumentError(f"degree {k} outside 0..{len(vals) - 1}")
    return elem_sym(k, vals[:i] + vals[i + 1:])


def elem_sym_all(values: np.ndarray) -> np.ndarray:
    """All e_0..e_n along the last axis; output shape ``values.shape[:-1] + (n+1,)``."""
    values = np.asarray(values)
    n = values.shape[-1]
    e = np.zeros(values.shape[:-1] + (n + 1,), dtype=values.dtype)
    e[..., 0] = 1
    for j in range(n):
        x = values[..., j]
        e[..., 1:j + 2] = e[..., 1:j + 2] + x[..., None] * e[..., 0:j + 1]
    return e


def elem_sym_partial_all(values: np.ndarray, k: int) -> np.ndarray:
    """e_k(values without entry i) for every i; shape ``values.shape``."""
    values = np.asarray(values)
    n = values.shape[-1]
    out = np.empty_like(values)
    for i in range(n):
        rest = np.delete(values, i, axis=-1)
        out[..., i] = elem_sym_all(rest)[..., k]
    return out


def _det_small(M: np.ndarray) -> np.ndarray:
    n = M.shape[-1]
    if n == 1:
        return M[..., 0, 0]
    if n == 2:
        return M[..., 0, 0] * M[..., 1, 1] - M[..., 0, 1] * M[..., 1, 0]
    if n == 3:
        return (M[..., 0, 0] * (M[..., 1, 1] * M[..., 2, 2] - M[..., 1, 2] * M[..., 2, 1])
                - M[..., 0, 1] * (M[..., 1, 0] * M[..., 2, 2] - M[..., 1, 2] * M[..., 2, 0])
                + M[..., 0, 2] * (M[..., 1, 0] * M[..., 2, 1] - M[..., 1, 1] * M[..., 2, 0]))
    return np.linalg.det(M)


def sym_coeffs(M: np.ndarray) -> np.ndarray:
    """e_0..e_n of the eigenvalues of stacked Hermitian matrices.

    Computed as sums of principal minors, so no eigensolve is involved.
    All coefficients positive is equivalent to positive definiteness.
    """
    M = np.asarray(M)
    n = M.shape[-1]
    out = np.empty(M.shape[:-2] + (n + 1,), dtype=float)
    out[..., 0] = 1.0
    for k in range(1, n + 1):
        if k == 1:
            s = np.trace(M, axis1=-2, axis2=-1)
        elif k == n:
            s = _det_small(M)
        elif k == 2:
            # e_2 = (tr(M)^2 - tr(M^2)) / 2, with tr(M^2) = sum |M_ij|^2 for Hermitian M
            tr = np.real(np.trace(M, axis1=-2, axis2=-1))
            s = 0.5 * (tr * tr - np.sum(np.abs(M) ** 2, axis=(-2, -1)))
        else:
            s = 0
            for idx in itertools.combinations(range(n), k):
                sub = M[..., idx, :][..., :, idx]
                s = s + _det_small(sub)
        out[..., k] = np.real(s)
    return out


def eigvalsh3(M: np.ndarray) -> np.ndarray:
    """Ascending eigenvalues of stacked 3 x 3 Hermitian matrices in closed form.

    Trigonometric solution of the characteristic cubic on the shifted,
    rescaled matrix (Smith's method); much faster than a batched eigensolve.
    """
    M = np.asarray(M)
    q = np.real(np.trace(M, axis1=-2, axis2=-1)) / 3.0
    B = M - q[..., None, None] * np.eye(3)
    p = np.sqrt(np.sum(np.abs(B) ** 2, axis=(-2, -1)) / 6.0)
    safe = np.where(p > 0, p, 1.0)
    r = np.real(_det_small(B / safe[..., None, None])) / 2.0
    phi = np.arccos(np.clip(r, -1.0, 1.0)) / 3.0
    hi = q + 2 * p * np.cos(phi)
    lo = q + 2 * p * np.cos(phi + 2 * np.pi / 3)
    mid = 3 * q - hi - lo
    return np.stack([lo, mid, hi], axis=-1)


# ---------------------------------------------------------------------------
# generalized eigenvalues


def whitener(B) -> np.ndarray:
    """Inverse Cholesky factor W = L^{-1} of a positive definite B (B = L L*)."""
    B = _as_matrix(B)
    try:
        L = np.linalg.cholesky(B)
    except np.linalg.LinAlgError:
        lo = float(np.linalg.eigvalsh(B)[0])
        raise GeometryError(f"reference form not positive definite (min eigenvalue {lo:.3g})",
                            value=lo) from None
    return solve_triangular(L, np.eye(B.shape[0]), lower=True)


def gen_eigen(A, B) -> EigenSpectrum:
    """Roots of det(A - lambda B) = 0, ascending, for positive definite B."""
    A = _as_matrix(A)
    B = _as_matrix(B)
    if A.shape != B.shape:
        raise ArgumentError(f"shape mismatch {A.shape} vs {B.shape}")
    W = whitener(B)
    C = W @ A @ W.conj().T
    vals = np.linalg.eigvalsh(0.5 * (C + C.conj().T))
    return EigenSpectrum(values=vals, basis_conditioning=float(np.linalg.cond(B)))


def mixed_wedge_ratio(A, B, m: int, n: int) -> float:
    """n (A^m ^ B^{n-m}) / A^n  =  (n / C(n,m)) e_{n-m}(1/lambda(A,B))."""
    if not 1 <= m < n:
        raise ArgumentError(f"need 1 <= m < n, got m={m}, n={n}")
    lam = gen_eigen(A, B).values
    if len(lam) != n:
        raise ArgumentError(f"form dimension {len(lam)} != n={n}")
    if lam[0] <= 0:
        raise GeometryError("form is not positive relative to the reference",
                            value=float(lam[0]))
    return n / comb(n, m) * float(elem_sym(n - m, 1.0 / lam))


def mixed_discriminant(forms) -> float:
    """Coefficient of t_1...t_n in det(sum t_k A_k), by inclusion-exclusion.

    Normalized so that MD(A, ..., A) = n! det(A).
    """
    mats = [_as_matrix(A) for A in forms]
    n = len(mats)
    if n == 0:
        raise ArgumentError("need at least one form")
    for M in mats:
        if M.shape != (n, n):
            raise ArgumentError(f"expected {n} forms of shape ({n},{n}), got {M.shape}")
    total = 0.0
    for r in range(1, n + 1):
        sign = (-1) ** (n - r)
        for S in itertools.combinations(range(n), r):
            total += sign * np.linalg.det(sum(mats[k] for k in S))
    return float(np.real(total))


def cone_form_coefficients(mu, m: int, c: float) -> np.ndarray:
    """Diagonal coefficients of c chi^{n-1} - m chi^{m-1} ^ omega^{n-m}.

    ``mu`` are the eigenvalues of chi relative to omega. Entry i is the
    coefficient against the direction i (scaled by n so that for n=2, m=1 it
    reads c mu_j - 1). The (n-1,n-1)-form is nonnegative iff all entries are.
    """
    mu = np.asarray(mu, dtype=float)
    n = mu.shape[-1]
    if not 1 <= m < n:
        raise ArgumentError(f"need 1 <= m < n, got m={m}, n={n}")
    if np.any(mu <= 0):
        raise GeometryError("chi must be positive definite", value=float(np.min(mu)))
    weight = factorial(m) * factorial(n - m) / factorial(n - 1)
    return c * elem_sym_partial_all(mu, n - 1) - weight * elem_sym_partial_all(mu, m - 1)
