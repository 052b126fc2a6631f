#!/usr/bin/env python3
"""
CP Toolkit - Data Models
Kruskal models, solver configuration, factor state, traces and cost reports
"""

from collections import Counter
from dataclasses import dataclass, field
from typing import Dict, List, NamedTuple, Optional, Tuple

import numpy as np

from utils.errors import DimensionMismatchError, InvalidInputError

ALGORITHMS = ('als', 'als-qr')
STRATEGIES = ('naive', 'dim-tree', 'branch-reuse')


# ============================================================================
# QR PAIR - Thin QR factors
# ============================================================================

class QrPair(NamedTuple):
    q: np.ndarray
    r: np.ndarray


# ============================================================================
# KRUSKAL MODEL - Weights plus one factor matrix per mode
# ============================================================================

@dataclass
class KruskalModel:
    weights: np.ndarray
    factors: List[np.ndarray]

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64).reshape(-1)
        self.factors = [np.ascontiguousarray(f, dtype=np.float64) for f in self.factors]
        if not self.factors:
            raise InvalidInputError('a Kruskal model needs at least one factor')
        rank = self.weights.shape[0]
        for n, factor in enumerate(self.factors):
            if factor.ndim != 2 or factor.shape[1] != rank:
                raise DimensionMismatchError(
                    f'factor {n} has shape {factor.shape}, expected (I, {rank})'
                )

    @property
    def rank(self):
        return self.weights.shape[0]

    @property
    def order(self):
        return len(self.factors)

    @property
    def shape(self):
        return tuple(f.shape[0] for f in self.factors)

    def copy(self):
        return KruskalModel(self.weights.copy(), [f.copy() for f in self.factors])

    def __repr__(self):
        return f'<KruskalModel rank={self.rank} shape={self.shape}>'


# ============================================================================
# SOLVER CONFIG - Inputs shared by every ALS driver
# ============================================================================

@dataclass
class SolverConfig:
    rank: int
    max_iterations: int = 100
    tol: float = 0.9999
    algorithm: str = 'als'
    strategy: str = 'naive'
    extrapolation_enabled: bool = False
    alpha: float = 0.1
    beta_override: Optional[float] = None
    activation_gap: float = 0.03
    seed: int = 0

    def __post_init__(self):
        if self.rank < 1:
            raise InvalidInputError(f'rank must be >= 1, got {self.rank}')
        if self.max_iterations < 1:
            raise InvalidInputError(f'max_iterations must be >= 1, got {self.max_iterations}')
        if not 0.0 <= self.tol <= 1.0:
            raise InvalidInputError(f'fitness threshold must lie in [0, 1], got {self.tol}')
        if self.algorithm not in ALGORITHMS:
            raise InvalidInputError(f'unknown algorithm {self.algorithm!r}')
        if self.strategy not in STRATEGIES:
            raise InvalidInputError(f'unknown strategy {self.strategy!r}')
        if not (np.isfinite(self.alpha) and np.isfinite(self.activation_gap)):
            raise InvalidInputError('alpha and activation_gap must be finite')
        if self.beta_override is not None and not np.isfinite(self.beta_override):
            raise InvalidInputError('beta_override must be finite')

    def to_dict(self):
        return {
            'rank': self.rank,
            'max_iterations': self.max_iterations,
            'tol': self.tol,
            'algorithm': self.algorithm,
            'strategy': self.strategy,
            'extrapolation_enabled': self.extrapolation_enabled,
            'alpha': self.alpha,
            'beta_override': self.beta_override,
            'activation_gap': self.activation_gap,
            'seed': self.seed,
        }


# ============================================================================
# FACTOR STATE - Current iterate owned by one solver run
# ============================================================================

@dataclass
class FactorState:
    factors: List[np.ndarray]
    weights: np.ndarray
    versions: List[int]
    qr: Optional[List[QrPair]] = None
    grams: Optional[List[np.ndarray]] = None

    @property
    def order(self):
        return len(self.factors)

    @property
    def rank(self):
        return self.weights.shape[0]

    def update(self, mode, factor, weights, qr=None):
        """Install a new factor for `mode` and bump its version."""
        self.factors[mode] = factor
        self.weights = weights
        self.versions[mode] += 1
        if self.qr is not None:
            self.qr[mode] = qr
        if self.grams is not None:
            self.grams[mode] = factor.T @ factor

    def to_model(self):
        return KruskalModel(self.weights.copy(), [f.copy() for f in self.factors])


# ============================================================================
# TRACE ROW - One record per sweep
# ============================================================================

@dataclass
class TraceRow:
    iteration: int
    update_order: Tuple[int, ...]
    fitness: float
    raw_radicand: float
    wall_seconds: float
    root_ttm_count: int
    flops: int
    beta_used: float = 0.0
    regularized: bool = False
    q0_defect: float = 0.0
    phase_seconds: Dict[str, float] = field(default_factory=dict)

    def to_dict(self):
        return {
            'iter': self.iteration,
            'order': ''.join(str(m + 1) for m in self.update_order),
            'fitness': self.fitness,
            'raw_radicand': self.raw_radicand,
            'seconds': self.wall_seconds,
            'root_ttms': self.root_ttm_count,
            'flops': self.flops,
            'beta': self.beta_used,
            'regularized': int(self.regularized),
        }


# ============================================================================
# SYNTH SPEC - Parameters of a synthetic tensor
# ============================================================================

@dataclass
class SynthSpec:
    dims: Tuple[int, ...]
    true_rank: int
    collinearity: Tuple[float, ...]
    l1: float = 0.0
    l2: float = 0.0
    seed: int = 0

    def __post_init__(self):
        self.dims = tuple(int(d) for d in self.dims)
        if len(self.collinearity) == 1:
            self.collinearity = tuple(self.collinearity) * len(self.dims)
        self.collinearity = tuple(float(c) for c in self.collinearity)
        if any(d < 1 for d in self.dims):
            raise InvalidInputError(f'extents must be >= 1, got {self.dims}')
        if len(self.collinearity) != len(self.dims):
            raise InvalidInputError('need one collinearity value per mode')
        if any(not 0.0 <= c < 1.0 for c in self.collinearity):
            raise InvalidInputError('collinearity values must lie in [0, 1)')
        if self.true_rank < 1 or self.true_rank > min(self.dims):
            raise InvalidInputError(
                f'true rank must lie in [1, {min(self.dims)}], got {self.true_rank}'
            )
        for name, level in (('l1', self.l1), ('l2', self.l2)):
            if not 0.0 <= level < 100.0:
                raise InvalidInputError(f'{name} must lie in [0, 100), got {level}')

    def to_dict(self):
        return {
            'dims': list(self.dims),
            'true_rank': self.true_rank,
            'collinearity': list(self.collinearity),
            'l1': self.l1,
            'l2': self.l2,
            'seed': self.seed,
        }


# ============================================================================
# COST REPORT - TTM counts and flops per size category
# ============================================================================

@dataclass
class CostReport:
    counts: Counter = field(default_factory=Counter)
    flops: Counter = field(default_factory=Counter)
    root_ttm_count: int = 0

    @property
    def total_flops(self):
        return sum(self.flops.values())

    @property
    def ttm_count(self):
        return sum(self.counts.values())

    def add(self, category, flops, is_root=False):
        self.counts[category] += 1
        self.flops[category] += flops
        if is_root:
            self.root_ttm_count += 1

    def merge(self, other):
        self.counts.update(other.counts)
        self.flops.update(other.flops)
        self.root_ttm_count += other.root_ttm_count
        return self
