"""
Kruskal Model Evaluation
Dense reconstruction and the direct, fast-ALS and fast-QR fitness evaluators
"""

import numpy as np

from utils.errors import DimensionMismatchError, InvalidInputError
from utils.tensor_core import fold, frobenius_norm, inner, khatri_rao


class Fitness(float):
    """A fitness value that remembers the unclamped radicand it came from."""

    def __new__(cls, value, raw_radicand):
        obj = super().__new__(cls, value)
        obj.raw_radicand = float(raw_radicand)
        return obj


def _fitness_from_terms(norm_x_sq, x_dot_k, norm_k_sq):
    if norm_x_sq <= 0.0:
        raise InvalidInputError('fitness is undefined for a zero-norm tensor')
    radicand = norm_x_sq - 2.0 * x_dot_k + norm_k_sq
    residual = np.sqrt(max(radicand, 0.0))
    return Fitness(1.0 - residual / np.sqrt(norm_x_sq), radicand)


def reconstruct(model, shape=None, mode=0):
    """
    K = sum_r lambda_r a_r^(1) o ... o a_r^(N), built as fold(A_hat_n P_n^T, n).
    """
    shape = tuple(model.shape if shape is None else shape)
    if tuple(model.shape) != shape:
        raise DimensionMismatchError(f'model shape {model.shape} does not match {shape}')
    if model.order == 1:
        return np.ascontiguousarray(model.factors[0] @ model.weights)
    others = [k for k in range(model.order) if k != mode]
    a_hat = model.factors[mode] * model.weights[None, :]
    p = khatri_rao([model.factors[k] for k in reversed(others)])
    return fold(a_hat @ p.T, mode, shape)


def fitness_direct(x, model):
    """1 - ||X - K|| / ||X|| from the dense reconstruction."""
    k = reconstruct(model, x.shape)
    return _fitness_from_terms(inner(x, x), inner(x, k), inner(k, k))


def fitness_fast_als(norm_x_sq, m_last, a_hat_last, gamma_last, weights, s_last):
    """
    <X, K> = <M_n, A_hat_n> and ||K||^2 = <Gamma_n, diag(w) S_n diag(w)>,
    all taken from the last mode of the sweep.
    """
    if m_last.shape != a_hat_last.shape:
        raise DimensionMismatchError(f'M {m_last.shape} vs A_hat {a_hat_last.shape}')
    rank = weights.shape[0]
    if gamma_last.shape != (rank, rank) or s_last.shape != (rank, rank):
        raise DimensionMismatchError('Gamma and S must be R x R')
    x_dot_k = float(np.sum(m_last * a_hat_last))
    norm_k_sq = float(np.sum(gamma_last * (weights[:, None] * s_last * weights[None, :])))
    return _fitness_from_terms(norm_x_sq, x_dot_k, norm_k_sq)


def fitness_fast_qr(norm_x_sq, v_n, a_hat, r0, r_n, weights):
    """
    <X, K> = <V_n, A_hat R0^T> and ||K||^2 = <R0^T R0, diag(w) R_n^T R_n diag(w)>.
    """
    rank = weights.shape[0]
    if r0.shape[1] != rank or r_n.shape[1] != rank:
        raise DimensionMismatchError('R0 and R_n must have R columns')
    projected = a_hat @ r0.T
    if projected.shape != v_n.shape:
        raise DimensionMismatchError(f'V {v_n.shape} vs A_hat R0^T {projected.shape}')
    x_dot_k = float(np.sum(v_n * projected))
    gram_r0 = r0.T @ r0
    gram_rn = r_n.T @ r_n
    norm_k_sq = float(np.sum(gram_r0 * (weights[:, None] * gram_rn * weights[None, :])))
    return _fitness_from_terms(norm_x_sq, x_dot_k, norm_k_sq)


def relative_residual(x, model):
    """||X - K|| / ||X|| computed elementwise."""
    return frobenius_norm(x - reconstruct(model, x.shape)) / frobenius_norm(x)
