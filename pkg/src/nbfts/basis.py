"""Low-rank thin plate spline basis and the orthonormal factor matrix.

The basis on a 1-d grid rescaled to [0, 1] is ``[1, t, |t - k_1|^3, ...]``.
The radial block is rotated by the eigenvectors of the knot penalty
``|k_i - k_j|^3`` and scaled by the inverse square root of its absolute
eigenvalues, so the roughness penalty becomes ``diag(0, 0, 1, ..., 1)``:
linear functions are unpenalised and every radial direction is penalised
equally.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateBasisError, InvalidInputError


@dataclass(frozen=True)
class SplineBasis:
    grid: np.ndarray  # rescaled to [0, 1]
    B: np.ndarray  # (m, L)
    Omega: np.ndarray  # (L, L)
    knots: np.ndarray  # (L - 2,)

    @property
    def size(self) -> int:
        return self.B.shape[1]

    @property
    def penalty_rank(self) -> int:
        return int(np.count_nonzero(np.diag(self.Omega) > 0))


def default_basis_size(m: int) -> int:
    return max(4, min(math.ceil(m / 4), 25))


def build_spline_basis(grid, L_m: int | None = None) -> SplineBasis:
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1:
        raise InvalidInputError("grid must be one-dimensional")
    m = grid.size
    if L_m is None:
        L_m = default_basis_size(m)
    if L_m < 4 or m < L_m:
        raise InvalidInputError(f"need m >= L_m >= 4, got m={m}, L_m={L_m}")
    if np.any(np.diff(grid) <= 0):
        raise InvalidInputError("grid points must be strictly increasing (no duplicates)")

    tau = (grid - grid[0]) / (grid[-1] - grid[0])
    knots = np.quantile(tau, np.linspace(0.0, 1.0, L_m)[1:-1])
    z_knots = np.abs(tau[:, None] - knots[None, :]) ** 3
    omega_knots = np.abs(knots[:, None] - knots[None, :]) ** 3

    evals, evecs = np.linalg.eigh(omega_knots)
    # deterministic eigenvector signs
    flip = np.sign(evecs[np.argmax(np.abs(evecs), axis=0), np.arange(evecs.shape[1])])
    evecs = evecs * flip
    radial = z_knots @ evecs / np.sqrt(np.abs(evals))

    B = np.column_stack([np.ones(m), tau, radial])
    Omega = np.diag(np.r_[0.0, 0.0, np.ones(L_m - 2)])
    if np.linalg.matrix_rank(B) < L_m:
        raise DegenerateBasisError("spline evaluation matrix is rank deficient; reduce L_m")
    return SplineBasis(grid=tau, B=B, Omega=Omega, knots=knots)


def fix_signs(F):
    """Flip columns so that each column's largest-magnitude entry is positive."""
    F = np.asarray(F, dtype=float)
    idx = np.argmax(np.abs(F), axis=0)
    signs = np.sign(F[idx, np.arange(F.shape[1])])
    signs[signs == 0] = 1.0
    return F * signs, signs


def orthonormalize(F_raw, return_transform=False, tol=1e-10):
    """Orthonormal factor with the same column span as ``F_raw``.

    With ``return_transform`` also returns the K x K matrix ``M`` such that
    ``F_raw = O @ M``; coefficients compensate as ``beta @ M.T`` so that
    ``F_raw @ beta.T == O @ (beta @ M.T).T``.
    """
    F_raw = np.asarray(F_raw, dtype=float)
    Q, R = np.linalg.qr(F_raw)
    diag = np.abs(np.diag(R))
    if diag.size == 0 or diag.min() <= tol * max(diag.max(), 1.0):
        raise DegenerateBasisError("factor matrix is (numerically) rank deficient")
    O, signs = fix_signs(Q)
    if return_transform:
        return O, signs[:, None] * R
    return O


def smoothness_logprior(psi, lam, Omega):
    """log N(psi; 0, (lam * Omega)^-) up to a constant."""
    psi = np.asarray(psi, dtype=float)
    Omega = np.asarray(Omega, dtype=float)
    rank = np.linalg.matrix_rank(Omega)
    return 0.5 * rank * math.log(lam) - 0.5 * lam * float(psi @ Omega @ psi)


def smoothness_logprior_grad(psi, lam, Omega):
    return -lam * (np.asarray(Omega) @ np.asarray(psi, dtype=float))


def project_to_basis(F, basis: SplineBasis):
    """Least-squares spline coefficients Psi with ``B @ Psi ~= F``."""
    Psi, *_ = np.linalg.lstsq(basis.B, F, rcond=None)
    return Psi
