"""
Dense Linear Algebra
Thin Householder QR with nonnegative diag(R), SPD solves with a ridge fallback,
row-wise lower-triangular solves and column normalisation
"""

import logging

import numpy as np
from scipy import linalg

from models import QrPair
from utils.errors import (
    DimensionMismatchError,
    InvalidInputError,
    SingularSystemError,
    SingularTriangularError,
)

logger = logging.getLogger(__name__)

# ============================================================================
# NUMERICAL THRESHOLDS
# ============================================================================

RIDGE_SCALE = 1e-12           # delta = RIDGE_SCALE * trace(G) / R
SYMMETRY_TOL = 1e-10          # relative asymmetry accepted by solve_spd
TRIANGULAR_TOL = 1e-14        # |l_ii| must exceed TRIANGULAR_TOL * max |l_ii|
DEGENERATE_COLUMN_NORM = 1e-300


def thin_qr(a):
    """
    Compact QR (LAPACK Householder, no pivoting) with the signs fixed so that
    diag(R) >= 0. Identical input bits give identical output bits.
    """
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2:
        raise InvalidInputError(f'thin_qr expects a matrix, got shape {a.shape}')
    q, r = linalg.qr(a, mode='economic', check_finite=False)
    signs = np.where(np.diag(r) < 0.0, -1.0, 1.0)
    if np.any(signs < 0.0):
        q = q * signs[None, :]
        r = r * signs[:, None]
    diag = np.abs(np.diag(r))
    if diag.size and np.any(diag <= TRIANGULAR_TOL * max(diag.max(), np.finfo(float).tiny)):
        logger.warning('rank-deficient QR: diag(R) = %s', np.array2string(diag, precision=3))
    return QrPair(np.ascontiguousarray(q), np.ascontiguousarray(r))


def solve_spd(g, rhs):
    """
    Solve X G = RHS for symmetric positive (semi)definite G.
    Returns (X, regularized); a failed Cholesky is retried once with G + delta*I.
    """
    g = np.asarray(g, dtype=np.float64)
    rhs = np.asarray(rhs, dtype=np.float64)
    if g.ndim != 2 or g.shape[0] != g.shape[1]:
        raise DimensionMismatchError(f'system matrix must be square, got {g.shape}')
    if rhs.ndim != 2 or rhs.shape[1] != g.shape[0]:
        raise DimensionMismatchError(
            f'right-hand side of shape {rhs.shape} does not match {g.shape}'
        )
    scale = max(np.abs(g).max(), np.finfo(float).tiny)
    if np.abs(g - g.T).max() > SYMMETRY_TOL * scale:
        raise InvalidInputError('system matrix is not symmetric')

    try:
        factor = linalg.cho_factor(g, lower=False, check_finite=False)
        return linalg.cho_solve(factor, rhs.T, check_finite=False).T, False
    except linalg.LinAlgError:
        pass

    rank = g.shape[0]
    delta = RIDGE_SCALE * np.trace(g) / rank
    logger.warning('Cholesky failed; retrying with ridge delta=%.3e', delta)
    try:
        factor = linalg.cho_factor(g + delta * np.eye(rank), lower=False, check_finite=False)
    except linalg.LinAlgError as e:
        cond = np.linalg.cond(g)
        raise SingularSystemError(
            f'Gram system is singular even after ridge {delta:.3e} (cond={cond:.3e})'
        ) from e
    return linalg.cho_solve(factor, rhs.T, check_finite=False).T, True


def solve_rows_lower_triangular(l, rhs):
    """Solve X L = RHS for lower-triangular L (forward substitution per row)."""
    l = np.asarray(l, dtype=np.float64)
    rhs = np.asarray(rhs, dtype=np.float64)
    if l.ndim != 2 or l.shape[0] != l.shape[1]:
        raise DimensionMismatchError(f'triangular factor must be square, got {l.shape}')
    if rhs.ndim != 2 or rhs.shape[1] != l.shape[0]:
        raise DimensionMismatchError(
            f'right-hand side of shape {rhs.shape} does not match {l.shape}'
        )
    diag = np.abs(np.diag(l))
    tau = TRIANGULAR_TOL * diag.max() if diag.size else 0.0
    small = np.flatnonzero(diag <= tau)
    if small.size:
        column = int(small[0])
        raise SingularTriangularError(
            f'triangular factor is singular at column {column} '
            f'(|l_ii|={diag[column]:.3e}); the Khatri-Rao factor is rank deficient',
            column=column,
        )
    # X L = RHS  <=>  L^T X^T = RHS^T, with L^T upper triangular
    return linalg.solve_triangular(l.T, rhs.T, lower=False, check_finite=False).T


def normalize_columns(a):
    """Unit-norm columns plus their norms; degenerate columns become e_1 with weight 0."""
    a = np.asarray(a, dtype=np.float64)
    weights = np.linalg.norm(a, axis=0)
    degenerate = weights < DEGENERATE_COLUMN_NORM
    safe = np.where(degenerate, 1.0, weights)
    normalized = a / safe[None, :]
    if np.any(degenerate):
        normalized[:, degenerate] = 0.0
        normalized[0, degenerate] = 1.0
        weights = np.where(degenerate, 0.0, weights)
    return np.ascontiguousarray(normalized), weights
