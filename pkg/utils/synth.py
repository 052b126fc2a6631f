"""
Synthetic Tensor Generator
Factors with prescribed collinearity, homoscedastic and heteroscedastic noise,
ground-truth model retention

Random draws come from numpy's PCG64 generator (`default_rng(seed)`), in a fixed
order: one I_n x R standard-normal block per mode, then the homoscedastic
noise tensor (only when l1 > 0), then the heteroscedastic one (only when l2 > 0).
"""

import logging

import numpy as np
from scipy import linalg

from models import KruskalModel, SynthSpec
from utils.dense_linalg import thin_qr
from utils.errors import GenerationError, InvalidInputError
from utils.kruskal import reconstruct
from utils.tensor_core import as_tensor, frobenius_norm

logger = logging.getLogger(__name__)

HETEROSCEDASTIC_STD = 3.0

# ============================================================================
# PUBLISHED CONFIGURATIONS
# preset: (dims, collinearity per mode, true rank, fitted rank, l1, l2)
# ============================================================================

PRESETS = {
    1: ((500, 500, 500), (0.9, 0.9, 0.9), 20, 10, 0.01, 0.0),
    2: ((500, 500, 500), (0.9, 0.9, 0.9), 20, 20, 0.01, 0.0),
    3: ((500, 500, 500), (0.9, 0.9, 0.9), 20, 30, 0.01, 0.0),
    4: ((600, 600, 600), (0.5, 0.09, 0.09), 20, 10, 0.01, 0.1),
    5: ((600, 600, 600), (0.5, 0.09, 0.09), 20, 20, 0.01, 0.1),
    6: ((600, 600, 600), (0.5, 0.09, 0.09), 20, 30, 0.01, 0.1),
    7: ((100, 100, 100, 100), (0.9, 0.9, 0.9, 0.9), 20, 10, 0.1, 0.0),
    8: ((100, 100, 100, 100), (0.9, 0.9, 0.9, 0.9), 20, 20, 0.1, 0.0),
    9: ((100, 100, 100, 100), (0.9, 0.9, 0.9, 0.9), 20, 30, 0.1, 0.0),
    10: ((120, 120, 120, 120), (0.5, 0.9, 0.9, 0.5), 20, 10, 0.1, 0.01),
    11: ((120, 120, 120, 120), (0.5, 0.9, 0.9, 0.5), 20, 20, 0.1, 0.01),
    12: ((120, 120, 120, 120), (0.5, 0.9, 0.9, 0.5), 20, 30, 0.1, 0.01),
}


def preset_spec(number, dims=None, seed=0, true_rank=None):
    """SynthSpec for a published configuration, optionally rescaled to `dims`."""
    if number not in PRESETS:
        raise InvalidInputError(f'unknown preset {number}; choose from {sorted(PRESETS)}')
    preset_dims, collinearity, preset_rank, fitted_rank, l1, l2 = PRESETS[number]
    if dims is not None and len(dims) != len(preset_dims):
        raise InvalidInputError(f'preset {number} is order {len(preset_dims)}, got dims {dims}')
    spec = SynthSpec(tuple(dims or preset_dims), true_rank or preset_rank,
                     collinearity, l1, l2, seed)
    return spec, fitted_rank


def collinearity_matrix(rank, c):
    """R x R matrix with unit diagonal and c off the diagonal."""
    return (1.0 - c) * np.eye(rank) + c * np.ones((rank, rank))


def collinear_factor(extent, rank, c, rng):
    """B = Q C with Q orthonormal (I x R) and C the upper Cholesky factor of K; B^T B = K."""
    if rank > extent:
        raise InvalidInputError(f'rank {rank} exceeds extent {extent}')
    if not 0.0 <= c < 1.0:
        raise InvalidInputError(f'collinearity must lie in [0, 1), got {c}')
    k = collinearity_matrix(rank, c)
    try:
        chol = linalg.cholesky(k, lower=False)
    except linalg.LinAlgError as e:
        raise GenerationError(
            f'collinearity matrix with c={c} at rank {rank} is not positive definite'
        ) from e
    q = thin_qr(rng.standard_normal((extent, rank))).q
    return q @ chol


def noise_scale(level, signal_norm, noise_norm):
    """(1 / sqrt(100/l - 1)) * ||signal|| / ||noise||."""
    if not 0.0 < level < 100.0:
        raise InvalidInputError(f'noise level must lie in (0, 100), got {level}')
    return signal_norm / (np.sqrt(100.0 / level - 1.0) * noise_norm)


def assemble_noisy_tensor(spec):
    """Build the noisy tensor and the ground-truth model it was generated from."""
    rng = np.random.default_rng(spec.seed)
    factors = [
        collinear_factor(extent, spec.true_rank, c, rng)
        for extent, c in zip(spec.dims, spec.collinearity)
    ]
    truth = KruskalModel(np.ones(spec.true_rank), factors)
    x = reconstruct(truth, spec.dims)

    if spec.l1 > 0.0:
        n1 = rng.standard_normal(spec.dims)
        x = x + noise_scale(spec.l1, frobenius_norm(x), frobenius_norm(n1)) * n1
    if spec.l2 > 0.0:
        n2 = rng.normal(0.0, HETEROSCEDASTIC_STD, spec.dims)
        x = x + noise_scale(spec.l2, frobenius_norm(x), frobenius_norm(n2)) * n2

    logger.info('generated tensor: %s', spec.to_dict())
    return as_tensor(x), truth
