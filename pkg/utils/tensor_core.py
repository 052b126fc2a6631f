"""
Dense Tensor Kernels
Unfolding, TTM, Multi-TTM, Khatri-Rao, Kronecker, Hadamard, inner products, MTTKRP

Tensors and matrices are float64 C-contiguous numpy arrays. Modes are 0-based.
The mode-n unfolding places element (i_1, ..., i_N) in row i_n and orders the
columns with the lowest remaining mode varying fastest, which pairs with the
reversed Kronecker order B_N kron ... kron B_1 (mode n omitted).
"""

import numpy as np

from utils.errors import DimensionMismatchError, InvalidInputError


def as_tensor(values, shape=None):
    """Validate and normalise a dense tensor (float64, row-major, finite)."""
    t = np.ascontiguousarray(values, dtype=np.float64)
    if shape is not None:
        shape = tuple(int(d) for d in shape)
        if t.size != int(np.prod(shape)):
            raise DimensionMismatchError(
                f'{t.size} values cannot fill a tensor of shape {shape}'
            )
        t = t.reshape(shape)
    if t.ndim < 1 or any(d < 1 for d in t.shape):
        raise InvalidInputError(f'tensor extents must all be >= 1, got {t.shape}')
    if not np.all(np.isfinite(t)):
        raise InvalidInputError('tensor contains NaN or Inf entries')
    return t


def _check_mode(t, mode):
    if not 0 <= mode < t.ndim:
        raise InvalidInputError(f'mode {mode} out of range for order-{t.ndim} tensor')


# ============================================================================
# UNFOLD / FOLD
# ============================================================================

def unfold(t, mode):
    """Mode-n unfolding X_(n) of shape (I_n, prod of the other extents)."""
    _check_mode(t, mode)
    return np.reshape(np.moveaxis(t, mode, 0), (t.shape[mode], -1), order='F')


def fold(m, mode, shape):
    """Inverse of unfold."""
    shape = tuple(int(d) for d in shape)
    if not 0 <= mode < len(shape):
        raise InvalidInputError(f'mode {mode} out of range for order-{len(shape)} tensor')
    others = [d for k, d in enumerate(shape) if k != mode]
    if m.shape != (shape[mode], int(np.prod(others))):
        raise DimensionMismatchError(
            f'matrix of shape {m.shape} cannot fold into mode {mode} of {shape}'
        )
    t = np.reshape(m, [shape[mode]] + others, order='F')
    return np.ascontiguousarray(np.moveaxis(t, 0, mode))


# ============================================================================
# TTM / MULTI-TTM
# ============================================================================

def ttm(t, b, mode):
    """Tensor-times-matrix along `mode`: Y = X x_mode B."""
    _check_mode(t, mode)
    if b.ndim != 2 or b.shape[1] != t.shape[mode]:
        raise DimensionMismatchError(
            f'matrix of shape {b.shape} cannot contract mode {mode} of extent {t.shape[mode]}'
        )
    y = np.tensordot(b, t, axes=([1], [mode]))
    return np.ascontiguousarray(np.moveaxis(y, 0, mode))


def multi_ttm(t, pairs):
    """Contract several distinct modes, in the order given."""
    modes = [mode for mode, _ in pairs]
    if len(set(modes)) != len(modes):
        raise InvalidInputError(f'duplicate mode in multi-TTM: {modes}')
    for mode, b in pairs:
        t = ttm(t, b, mode)
    return t


def ttm_flops(shape, mode, rows):
    """2 * (output elements) * (contracted extent)."""
    out = int(np.prod(shape)) // shape[mode] * rows
    return 2 * out * shape[mode]


# ============================================================================
# MATRIX PRODUCTS
# ============================================================================

def khatri_rao(mats):
    """Column-wise Kronecker product, folded left to right over `mats`."""
    mats = list(mats)
    if not mats:
        raise InvalidInputError('khatri_rao needs at least one matrix')
    cols = mats[0].shape[1]
    if any(m.shape[1] != cols for m in mats):
        raise DimensionMismatchError(
            f'khatri_rao column counts differ: {[m.shape[1] for m in mats]}'
        )
    result = mats[0]
    for m in mats[1:]:
        result = (result[:, None, :] * m[None, :, :]).reshape(-1, cols)
    return np.ascontiguousarray(result, dtype=np.float64)


def kronecker(a, b):
    return np.kron(a, b)


def hadamard(a, b):
    if a.shape != b.shape:
        raise DimensionMismatchError(f'hadamard shapes differ: {a.shape} vs {b.shape}')
    return a * b


# ============================================================================
# INNER PRODUCT / NORM
# ============================================================================

def inner(t1, t2):
    if t1.shape != t2.shape:
        raise DimensionMismatchError(f'inner product shapes differ: {t1.shape} vs {t2.shape}')
    return float(np.dot(t1.ravel(), t2.ravel()))


def frobenius_norm(t):
    return float(np.linalg.norm(t.ravel()))


# ============================================================================
# MTTKRP
# ============================================================================

def _check_factors(t, factors, mode):
    _check_mode(t, mode)
    if len(factors) != t.ndim:
        raise DimensionMismatchError(
            f'expected {t.ndim} factors, got {len(factors)}'
        )
    others = [k for k in range(t.ndim) if k != mode]
    ranks = {factors[k].shape[1] for k in others}
    if len(ranks) > 1:
        raise DimensionMismatchError(f'factors disagree on rank: {sorted(ranks)}')
    for k in others:
        if factors[k].shape[0] != t.shape[k]:
            raise DimensionMismatchError(
                f'factor {k} has {factors[k].shape[0]} rows, mode extent is {t.shape[k]}'
            )
    return others


def mttkrp(t, factors, mode, materialize=False):
    """
    M_n = X_(n) (A_N kr ... kr A_{n+1} kr A_{n-1} kr ... kr A_1).
    The default path contracts one mode at a time and never forms the
    Khatri-Rao product; `materialize=True` builds it explicitly.
    """
    others = _check_factors(t, factors, mode)
    if not others:
        raise InvalidInputError('MTTKRP needs a tensor of order >= 2')
    if materialize:
        return unfold(t, mode) @ khatri_rao([factors[k] for k in reversed(others)])

    # axes after moveaxis: (mode, others...); contract the last one with a
    # full product, then the remaining ones row-wise per column r
    moved = np.moveaxis(t, mode, 0)
    result = np.tensordot(moved, factors[others[-1]], axes=([moved.ndim - 1], [0]))
    for k in reversed(others[:-1]):
        result = np.einsum('...ir,ir->...r', result, factors[k])
    return np.ascontiguousarray(result)


def mttkrp_flops(shape, rank, mode):
    """Flops of the streaming MTTKRP path."""
    others = [k for k in range(len(shape)) if k != mode]
    if not others:
        return 0
    remaining = int(np.prod(shape))
    flops = 2 * remaining * rank
    remaining //= shape[others[-1]]
    for k in reversed(others[:-1]):
        flops += 2 * remaining * rank
        remaining //= shape[k]
    return flops
