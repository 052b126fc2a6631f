"""
CP Solvers
Normal-equation CP-ALS, QR-based CP-ALS with pluggable contraction strategies,
and the branch-reuse variant with Q0 extrapolation
"""

import logging
import time
from collections import defaultdict
from contextlib import contextmanager
from functools import reduce

import numpy as np

from models import FactorState, TraceRow
from utils.dense_linalg import normalize_columns, solve_rows_lower_triangular, solve_spd, thin_qr
from utils.dim_tree import IntermediateCache, build_schedule, execute
from utils.errors import DimensionMismatchError, InvalidInputError
from utils.kruskal import fitness_fast_als, fitness_fast_qr
from utils.tensor_core import as_tensor, hadamard, inner, khatri_rao, mttkrp, mttkrp_flops, unfold

logger = logging.getLogger(__name__)

# ============================================================================
# EXTRAPOLATION STEP SIZES
# (fitness floor, beta) checked top to bottom; the last row is the fallback
# ============================================================================

BETA_TABLE = (
    (0.90, 1.0 / 2000.0),
    (0.70, 1.0 / 500.0),
    (None, 1.0 / 250.0),
)


class PhaseTimer:
    """Accumulates wall time per named phase of a sweep."""

    def __init__(self):
        self.seconds = defaultdict(float)

    @contextmanager
    def phase(self, name):
        started = time.perf_counter()
        try:
            yield
        finally:
            self.seconds[name] += time.perf_counter() - started

    def finish(self, wall_seconds):
        phases = dict(self.seconds)
        phases['other'] = max(wall_seconds - sum(phases.values()), 0.0)
        return phases


# ============================================================================
# INITIALIZATION
# ============================================================================

def _check_input(x, cfg, algorithm):
    if cfg.algorithm != algorithm:
        raise InvalidInputError(
            f'solver expects algorithm {algorithm!r}, config says {cfg.algorithm!r}'
        )
    x = as_tensor(x)
    if x.ndim < 2:
        raise InvalidInputError(f'tensor order must be >= 2, got {x.ndim}')
    norm_x_sq = inner(x, x)
    if norm_x_sq <= 0.0:
        raise InvalidInputError('cannot decompose a zero-norm tensor')
    return x, norm_x_sq


def initial_state(x, cfg, init=None, with_qr=False):
    """
    Seeded standard-normal factors (or the given model), column-normalized.
    ALS runs track Gram matrices, QR runs track the thin QR of every factor.
    """
    if init is None:
        rng = np.random.default_rng(cfg.seed)
        raw = [rng.standard_normal((extent, cfg.rank)) for extent in x.shape]
        weights = np.ones(cfg.rank)
    else:
        if tuple(init.shape) != tuple(x.shape):
            raise DimensionMismatchError(f'initial model shape {init.shape} vs tensor {x.shape}')
        if init.rank != cfg.rank:
            raise DimensionMismatchError(f'initial model rank {init.rank} vs configured {cfg.rank}')
        raw = [f.copy() for f in init.factors]
        weights = init.weights.copy()

    factors = []
    for factor in raw:
        normalized, norms = normalize_columns(factor)
        factors.append(normalized)
        if init is not None:
            weights = weights * norms

    state = FactorState(factors, weights, [0] * len(factors))
    if with_qr:
        state.qr = [thin_qr(f) for f in factors]
    else:
        state.grams = [f.T @ f for f in factors]
    return state


# ============================================================================
# CP-ALS - Normal equations
# ============================================================================

def cp_als(x, cfg, init=None):
    """CP-ALS: Gamma by Hadamard of Grams, MTTKRP, SPD solve, normalize."""
    x, norm_x_sq = _check_input(x, cfg, 'als')
    state = initial_state(x, cfg, init)
    order = x.ndim
    trace = []
    flops = 0
    logger.info('cp_als: shape=%s config=%s', x.shape, cfg.to_dict())

    for iteration in range(1, cfg.max_iterations + 1):
        timer = PhaseTimer()
        started = time.perf_counter()
        regularized = False
        for n in range(order):
            with timer.phase('gram'):
                gamma = reduce(hadamard, [state.grams[k] for k in range(order) if k != n])
            with timer.phase('mttkrp'):
                m = mttkrp(x, state.factors, n)
            with timer.phase('solve'):
                a_hat, reg = solve_spd(gamma, m)
            regularized = regularized or reg
            factor, weights = normalize_columns(a_hat)
            with timer.phase('gram'):
                state.update(n, factor, weights)
            flops += mttkrp_flops(x.shape, cfg.rank, n)

        fitness = fitness_fast_als(norm_x_sq, m, a_hat, gamma, state.weights, state.grams[n])
        wall = time.perf_counter() - started
        trace.append(TraceRow(
            iteration=iteration,
            update_order=tuple(range(order)),
            fitness=float(fitness),
            raw_radicand=fitness.raw_radicand,
            wall_seconds=wall,
            root_ttm_count=0,
            flops=flops,
            regularized=regularized,
            phase_seconds=timer.finish(wall),
        ))
        logger.debug('cp_als sweep %d: fitness=%.10f', iteration, fitness)
        if fitness >= cfg.tol:
            break

    logger.info('cp_als finished after %d sweeps, fitness=%.6f', len(trace), trace[-1].fitness)
    return state.to_model(), trace


# ============================================================================
# EXTRAPOLATION
# ============================================================================

def extrapolate_q0(q0_now, q0_prev, beta, alpha):
    """Q0_hat = Q0 + beta * (Q0 - alpha * Q0_prev); beta == 0 returns q0_now itself."""
    if q0_now.shape != q0_prev.shape:
        raise DimensionMismatchError(f'Q0 {q0_now.shape} vs previous Q0 {q0_prev.shape}')
    if beta == 0.0:
        return q0_now
    return q0_now + beta * (q0_now - alpha * q0_prev)


def select_beta(fitness_prev, fitness_now, gap_threshold):
    """Extrapolation step for the current fitness, or None while fitness still moves."""
    prev = min(max(float(fitness_prev), 0.0), 1.0)
    now = min(max(float(fitness_now), 0.0), 1.0)
    if abs(now - prev) >= gap_threshold:
        return None
    if now > BETA_TABLE[0][0]:
        return BETA_TABLE[0][1]
    if now >= BETA_TABLE[1][0]:
        return BETA_TABLE[1][1]
    return BETA_TABLE[2][1]


def q0_defect(q0):
    """Largest deviation of Q0's first row and column from e_1."""
    first_row = np.abs(q0[0, 1:]).max(initial=0.0)
    first_col = np.abs(q0[1:, 0]).max(initial=0.0)
    return float(max(abs(q0[0, 0] - 1.0), first_row, first_col))


# ============================================================================
# CP-ALS-QR - Shared driver for every contraction strategy
# ============================================================================

def _check_qr_rank(shape, rank):
    for n in range(len(shape)):
        rows = int(np.prod([min(d, rank) for k, d in enumerate(shape) if k != n]))
        if rows < rank:
            raise InvalidInputError(
                f'rank {rank} exceeds the {rows} rows of the mode-{n + 1} Khatri-Rao factor'
            )


def _run_qr(x, norm_x_sq, cfg, init, strategy, extrapolate):
    order = x.ndim
    _check_qr_rank(x.shape, cfg.rank)
    schedule = build_schedule(order, strategy, cfg.max_iterations)
    cache = IntermediateCache()
    state = initial_state(x, cfg, init, with_qr=True)
    history = {}
    beta = None
    trace = []
    flops = 0
    root_ttms = 0
    label = 'als_qr_bre' if extrapolate else 'cp_als_qr'
    logger.info('%s: shape=%s strategy=%s config=%s', label, x.shape, strategy, cfg.to_dict())

    for iteration in range(1, cfg.max_iterations + 1):
        timer = PhaseTimer()
        started = time.perf_counter()
        beta_now = beta if (extrapolate and beta is not None) else 0.0
        update_order = schedule.update_order(iteration)
        defect = 0.0
        for n in update_order:
            others = [k for k in range(order) if k != n]
            with timer.phase('qr'):
                z = khatri_rao([state.qr[k].r for k in reversed(others)])
                q0, r0 = thin_qr(z)
            defect = max(defect, q0_defect(q0))

            with timer.phase('ttm'):
                y, report = execute(schedule, x, state, cache, iteration, n)
            flops += report.total_flops
            root_ttms += report.root_ttm_count

            with timer.phase('q0_apply'):
                y_n = unfold(y, n)
                v = y_n @ q0
                # the fitness identity needs V = Y Q0; only the solve sees Q0_hat
                v_fit = v
                if beta_now and n in history:
                    v = y_n @ extrapolate_q0(q0, history[n], beta_now, cfg.alpha)
            history[n] = q0

            with timer.phase('solve'):
                a_hat = solve_rows_lower_triangular(r0.T, v)
            factor, weights = normalize_columns(a_hat)
            with timer.phase('qr'):
                qr_n = thin_qr(factor)
            state.update(n, factor, weights, qr_n)

        fitness = fitness_fast_qr(norm_x_sq, v_fit, a_hat, r0, state.qr[n].r, state.weights)
        wall = time.perf_counter() - started
        trace.append(TraceRow(
            iteration=iteration,
            update_order=update_order,
            fitness=float(fitness),
            raw_radicand=fitness.raw_radicand,
            wall_seconds=wall,
            root_ttm_count=root_ttms,
            flops=flops,
            beta_used=float(beta_now),
            q0_defect=defect,
            phase_seconds=timer.finish(wall),
        ))
        logger.debug('%s sweep %d: order=%s fitness=%.10f beta=%g',
                     label, iteration, update_order, fitness, beta_now)
        if fitness >= cfg.tol:
            break

        if extrapolate and beta is None and len(trace) >= 2:
            chosen = select_beta(trace[-2].fitness, trace[-1].fitness, cfg.activation_gap)
            if chosen is not None:
                beta = chosen if cfg.beta_override is None else float(cfg.beta_override)
                logger.info('%s: extrapolation active from sweep %d with beta=%g',
                            label, iteration + 1, beta)

    logger.info('%s finished after %d sweeps, fitness=%.6f, root TTMs=%d',
                label, len(trace), trace[-1].fitness, root_ttms)
    return state.to_model(), trace


def cp_als_qr(x, cfg, init=None):
    """CP-ALS-QR with the configured contraction strategy and no extrapolation."""
    x, norm_x_sq = _check_input(x, cfg, 'als-qr')
    return _run_qr(x, norm_x_sq, cfg, init, cfg.strategy, extrapolate=False)


def als_qr_bre(x, cfg, init=None):
    """Branch-reuse CP-ALS-QR with gated, frozen-beta Q0 extrapolation."""
    x, norm_x_sq = _check_input(x, cfg, 'als-qr')
    return _run_qr(x, norm_x_sq, cfg, init, 'branch-reuse', extrapolate=True)


def decompose(x, cfg, init=None):
    """Dispatch on cfg.algorithm and cfg.extrapolation_enabled."""
    if cfg.algorithm == 'als':
        return cp_als(x, cfg, init)
    if cfg.extrapolation_enabled:
        return als_qr_bre(x, cfg, init)
    return cp_als_qr(x, cfg, init)

