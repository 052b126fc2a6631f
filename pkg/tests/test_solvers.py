import time

import numpy as np
import pytest

from models import SolverConfig, SynthSpec
from utils.errors import InvalidInputError
from utils.kruskal import fitness_direct, reconstruct
from utils.solvers import (
    als_qr_bre,
    cp_als,
    cp_als_qr,
    decompose,
    extrapolate_q0,
    initial_state,
    select_beta,
)
from utils.synth import assemble_noisy_tensor

QR_STRATEGIES = ('naive', 'dim-tree', 'branch-reuse')


def als_config(rank, **kwargs):
    return SolverConfig(rank=rank, algorithm='als', **kwargs)


def qr_config(rank, strategy='naive', **kwargs):
    return SolverConfig(rank=rank, algorithm='als-qr', strategy=strategy, **kwargs)


# ============================================================================
# FIXED POINTS AND SIMPLE CONVERGENCE
# ============================================================================

@pytest.mark.parametrize('solver, cfg', [
    (cp_als, als_config(2, max_iterations=5)),
    (cp_als_qr, qr_config(2, max_iterations=5)),
    (cp_als_qr, qr_config(2, 'branch-reuse', max_iterations=5)),
])
def test_exact_init_stops_after_one_sweep(low_rank_tensor, solver, cfg):
    x, truth = low_rank_tensor((6, 5, 4), 2)
    model, trace = solver(x, cfg, init=truth)
    assert len(trace) == 1
    assert trace[0].fitness == pytest.approx(1.0, abs=1e-6)
    np.testing.assert_allclose(reconstruct(model), x, atol=1e-9 * np.abs(x).max())


@pytest.mark.parametrize('cfg', [als_config(1, max_iterations=10), qr_config(1, max_iterations=10)])
def test_rank_one_recovery(low_rank_tensor, cfg):
    x, _ = low_rank_tensor((7, 6, 5), 1, positive=True)
    model, trace = decompose(x, cfg)
    assert trace[-1].fitness >= 0.9999
    assert fitness_direct(x, model) >= 0.9999


def test_initial_state_is_seeded_and_normalized(rng):
    x = rng.standard_normal((5, 4, 3))
    a = initial_state(x, als_config(3, seed=7))
    b = initial_state(x, als_config(3, seed=7))
    for fa, fb in zip(a.factors, b.factors):
        assert np.array_equal(fa, fb)
        np.testing.assert_allclose(np.linalg.norm(fa, axis=0), 1.0)
    assert a.qr is None and a.grams is not None
    qr = initial_state(x, qr_config(3, seed=7), with_qr=True)
    for f, (q, r) in zip(qr.factors, qr.qr):
        np.testing.assert_allclose(q @ r, f, atol=1e-12)


# ============================================================================
# MONOTONICITY AND Q0 STRUCTURE
# ============================================================================

@pytest.mark.parametrize('make_cfg', [
    lambda seed: als_config(5, max_iterations=30, tol=1.0, seed=seed),
    lambda seed: qr_config(5, 'naive', max_iterations=30, tol=1.0, seed=seed),
    lambda seed: qr_config(5, 'dim-tree', max_iterations=30, tol=1.0, seed=seed),
    lambda seed: qr_config(5, 'branch-reuse', max_iterations=30, tol=1.0, seed=seed),
], ids=['als', 'qr', 'qr-dt', 'qr-br'])
def test_fitness_never_decreases(make_cfg):
    for seed in range(10):
        x = np.random.default_rng(100 + seed).standard_normal((20, 20, 20))
        cfg = make_cfg(seed)
        _, trace = decompose(x, cfg)
        assert len(trace) == 30
        fitness = [row.fitness for row in trace]
        assert all(b >= a - 1e-9 for a, b in zip(fitness, fitness[1:]))
        if cfg.algorithm == 'als-qr':
            assert max(row.q0_defect for row in trace) <= 1e-12


def test_cumulative_counters(rng):
    x = rng.standard_normal((6, 5, 4))
    expected = {'naive': [3, 6, 9], 'dim-tree': [2, 4, 6], 'branch-reuse': [2, 3, 4]}
    for strategy, roots in expected.items():
        _, trace = cp_als_qr(x, qr_config(2, strategy, max_iterations=3, tol=1.0))
        assert [row.root_ttm_count for row in trace] == roots
        flops = [row.flops for row in trace]
        assert flops == sorted(flops) and flops[0] > 0


def test_update_order_is_recorded(rng):
    x = rng.standard_normal((6, 5, 4))
    _, trace = cp_als_qr(x, qr_config(2, 'branch-reuse', max_iterations=3, tol=1.0))
    assert [row.update_order for row in trace] == [(0, 1, 2), (0, 2, 1), (1, 2, 0)]
    _, trace = cp_als_qr(x, qr_config(2, 'dim-tree', max_iterations=2, tol=1.0))
    assert all(row.update_order == (0, 1, 2) for row in trace)


def test_phase_timing_is_reported(rng):
    x = rng.standard_normal((6, 5, 4))
    _, als_trace = cp_als(x, als_config(2, max_iterations=2, tol=1.0))
    assert {'mttkrp', 'gram', 'solve', 'other'} <= set(als_trace[0].phase_seconds)
    _, qr_trace = cp_als_qr(x, qr_config(2, max_iterations=2, tol=1.0))
    assert {'ttm', 'qr', 'q0_apply', 'solve', 'other'} <= set(qr_trace[0].phase_seconds)
    assert all(v >= 0.0 for v in qr_trace[0].phase_seconds.values())


# ============================================================================
# AGREEMENT BETWEEN SOLVERS
# ============================================================================

def test_one_sweep_als_and_qr_agree(make_model):
    for seed in range(10):
        rng = np.random.default_rng(seed)
        x = rng.standard_normal((8, 7, 6))
        init = make_model((8, 7, 6), 3)
        als_model, _ = cp_als(x, als_config(3, max_iterations=1), init=init)
        qr_model, _ = cp_als_qr(x, qr_config(3, max_iterations=1), init=init)
        for fa, fq in zip(als_model.factors, qr_model.factors):
            np.testing.assert_allclose(fq, fa, rtol=1e-8, atol=1e-8)
        np.testing.assert_allclose(qr_model.weights, als_model.weights, rtol=1e-8)


def test_naive_and_dim_tree_iterates_match(rng):
    x = rng.standard_normal((9, 8, 7))
    naive_model, naive_trace = cp_als_qr(x, qr_config(3, 'naive', max_iterations=5, tol=1.0))
    tree_model, tree_trace = cp_als_qr(x, qr_config(3, 'dim-tree', max_iterations=5, tol=1.0))
    for a, b in zip(naive_trace, tree_trace):
        assert b.fitness == pytest.approx(a.fitness, abs=1e-10)
    for fa, fb in zip(naive_model.factors, tree_model.factors):
        np.testing.assert_allclose(fb, fa, atol=1e-10)


def test_order_four_strategies_reach_same_fitness(rng):
    x = rng.standard_normal((6, 5, 4, 3))
    final = {
        s: cp_als_qr(x, qr_config(2, s, max_iterations=4, tol=1.0))[1][-1].fitness
        for s in ('naive', 'dim-tree')
    }
    assert final['dim-tree'] == pytest.approx(final['naive'], abs=1e-10)


def test_tracked_fitness_matches_direct_on_solver_states():
    for seed in range(20):
        rng = np.random.default_rng(500 + seed)
        shape = tuple(int(d) for d in rng.integers(4, 11, size=3))
        rank = int(rng.integers(2, 5))
        sweeps = int(rng.integers(1, 6))
        x = rng.standard_normal(shape)
        common = dict(max_iterations=sweeps, tol=1.0, seed=seed)
        cfg = (
            als_config(rank, **common),
            qr_config(rank, 'naive', **common),
            qr_config(rank, 'dim-tree', **common),
            qr_config(rank, 'branch-reuse', **common),
        )[seed % 4]
        model, trace = decompose(x, cfg)
        assert len(trace) == sweeps
        assert trace[-1].fitness == pytest.approx(fitness_direct(x, model), rel=1e-8)


@pytest.mark.parametrize('beta_override', [None, 0.05])
def test_extrapolated_fitness_matches_direct(beta_override):
    x, _ = assemble_noisy_tensor(SynthSpec((12, 11, 10), 4, (0.9,), l1=1.0, seed=8))
    cfg = qr_config(4, max_iterations=8, tol=1.0, seed=2, extrapolation_enabled=True,
                    activation_gap=1.0, beta_override=beta_override)
    model, trace = als_qr_bre(x, cfg)
    assert len(trace) == 8
    assert all(row.beta_used > 0.0 for row in trace[2:])
    assert trace[-1].raw_radicand > 0.0
    assert trace[-1].fitness == pytest.approx(fitness_direct(x, model), rel=1e-8)


def test_determinism(rng):
    x = rng.standard_normal((7, 6, 5))
    cfg = qr_config(3, 'branch-reuse', max_iterations=6, tol=1.0, seed=11)
    first, trace_a = cp_als_qr(x, cfg)
    second, trace_b = cp_als_qr(x, cfg)
    assert [r.fitness for r in trace_a] == [r.fitness for r in trace_b]
    for fa, fb in zip(first.factors, second.factors):
        assert np.array_equal(fa, fb)


# ============================================================================
# EXTRAPOLATION
# ============================================================================

def test_extrapolate_q0_known_values(rng):
    q = np.linalg.qr(rng.standard_normal((6, 3)))[0]
    assert extrapolate_q0(q, q * 2.0, 0.0, 0.1) is q
    np.testing.assert_allclose(extrapolate_q0(q, q, 0.5, 1.0), q, rtol=1e-15)
    beta = 1.0 / 500.0
    np.testing.assert_allclose(extrapolate_q0(q, q, beta, 0.1), (1.0 + 0.9 * beta) * q, rtol=1e-14)
    with pytest.raises(InvalidInputError):
        extrapolate_q0(q, q[:, :2], beta, 0.1)


@pytest.mark.parametrize('prev, now, expected', [
    (0.95, 0.955, 1.0 / 2000.0),
    (0.60, 0.80, None),
    (0.50, 0.51, 1.0 / 250.0),
    (0.80, 0.80, 1.0 / 500.0),
    (0.90, 0.90, 1.0 / 500.0),
    (0.70, 0.70, 1.0 / 500.0),
    (0.69, 0.69, 1.0 / 250.0),
    (1.20, 1.10, 1.0 / 2000.0),
])
def test_select_beta_table(prev, now, expected):
    assert select_beta(prev, now, 0.03) == expected


def test_beta_zero_reduces_to_branch_reuse(rng):
    x = rng.standard_normal((8, 7, 6))
    plain = qr_config(3, 'branch-reuse', max_iterations=8, tol=1.0, seed=3)
    zero = qr_config(3, 'branch-reuse', max_iterations=8, tol=1.0, seed=3,
                     extrapolation_enabled=True, beta_override=0.0, activation_gap=1.0)
    model_a, trace_a = cp_als_qr(x, plain)
    model_b, trace_b = als_qr_bre(x, zero)
    for a, b in zip(trace_a, trace_b):
        assert (a.fitness, a.raw_radicand, a.beta_used) == (b.fitness, b.raw_radicand, b.beta_used)
    for fa, fb in zip(model_a.factors, model_b.factors):
        assert np.array_equal(fa, fb)


def test_gate_never_opens(rng):
    x = rng.standard_normal((8, 7, 6))
    cfg = qr_config(3, max_iterations=6, tol=1.0, extrapolation_enabled=True, activation_gap=0.0)
    _, trace = als_qr_bre(x, cfg)
    assert all(row.beta_used == 0.0 for row in trace)


def test_beta_is_frozen_once_chosen(rng):
    x = rng.standard_normal((8, 7, 6))
    cfg = qr_config(3, max_iterations=6, tol=1.0, extrapolation_enabled=True, activation_gap=1.0)
    _, trace = als_qr_bre(x, cfg)
    assert trace[0].beta_used == 0.0 and trace[1].beta_used == 0.0
    assert trace[2].beta_used in (1.0 / 2000.0, 1.0 / 500.0, 1.0 / 250.0)
    assert len({row.beta_used for row in trace[2:]}) == 1


def test_beta_override_keeps_gate(rng):
    x = rng.standard_normal((8, 7, 6))
    cfg = qr_config(3, max_iterations=5, tol=1.0, extrapolation_enabled=True,
                    activation_gap=1.0, beta_override=0.01)
    _, trace = als_qr_bre(x, cfg)
    assert [row.beta_used for row in trace] == [0.0, 0.0, 0.01, 0.01, 0.01]


def test_decompose_dispatch(rng):
    x = rng.standard_normal((5, 4, 3))
    _, trace = decompose(x, qr_config(2, max_iterations=3, tol=1.0,
                                      extrapolation_enabled=True, activation_gap=1.0,
                                      beta_override=0.02))
    assert trace[-1].beta_used == 0.02
    assert trace[1].update_order == (0, 2, 1)


# ============================================================================
# INPUT ERRORS
# ============================================================================

def test_algorithm_mismatch_and_zero_tensor(rng):
    x = rng.standard_normal((4, 3, 2))
    with pytest.raises(InvalidInputError):
        cp_als(x, qr_config(2))
    with pytest.raises(InvalidInputError):
        cp_als_qr(x, als_config(2))
    with pytest.raises(InvalidInputError):
        cp_als(np.zeros((4, 3, 2)), als_config(2))


def test_qr_rank_larger_than_khatri_rao_rows(rng):
    with pytest.raises(InvalidInputError):
        cp_als_qr(rng.standard_normal((2, 2, 2)), qr_config(5))


def test_solver_config_validation():
    with pytest.raises(InvalidInputError):
        SolverConfig(rank=0)
    with pytest.raises(InvalidInputError):
        SolverConfig(rank=2, tol=1.5)
    with pytest.raises(InvalidInputError):
        SolverConfig(rank=2, strategy='tree')
    with pytest.raises(InvalidInputError):
        SolverConfig(rank=2, alpha=float('nan'))
    data = qr_config(3, 'dim-tree', beta_override=0.01).to_dict()
    assert (data['algorithm'], data['strategy'], data['beta_override']) == ('als-qr', 'dim-tree', 0.01)
    assert (data['alpha'], data['activation_gap']) == (0.1, 0.03)


# ============================================================================
# EXPERIMENTS
# ============================================================================

@pytest.mark.slow
def test_recovery_of_collinear_tensors():
    variants = {
        'als': lambda s: als_config(10, max_iterations=50, seed=s),
        'qr': lambda s: qr_config(10, 'naive', max_iterations=50, seed=s),
        'qr-dt': lambda s: qr_config(10, 'dim-tree', max_iterations=50, seed=s),
        'qr-br': lambda s: qr_config(10, 'branch-reuse', max_iterations=50, seed=s),
        'qr-bre': lambda s: qr_config(10, 'branch-reuse', max_iterations=50, seed=s,
                                      extrapolation_enabled=True),
    }
    successes = dict.fromkeys(variants, 0)
    for seed in range(10):
        x, _ = assemble_noisy_tensor(SynthSpec((50, 50, 50), 10, (0.5,), seed=seed))
        for name, make_cfg in variants.items():
            model, trace = decompose(x, make_cfg(seed))
            if fitness_direct(x, model) >= 0.99:
                successes[name] += 1
    assert all(count >= 7 for count in successes.values()), successes


@pytest.mark.slow
def test_branch_reuse_sweeps_are_fastest():
    x, _ = assemble_noisy_tensor(SynthSpec((200, 200, 200), 20, (0.5,), l1=0.01, seed=0))
    mean = {}
    for strategy in QR_STRATEGIES:
        cp_als_qr(x, qr_config(20, strategy, max_iterations=1, tol=1.0))
        started = time.perf_counter()
        _, trace = cp_als_qr(x, qr_config(20, strategy, max_iterations=10, tol=1.0))
        mean[strategy] = (time.perf_counter() - started) / len(trace)
    assert mean['branch-reuse'] < mean['dim-tree'] < mean['naive']
    assert mean['branch-reuse'] <= 0.8 * mean['naive']


@pytest.mark.slow
def test_extrapolation_against_plain_branch_reuse(record_property):
    spec_args = dict(dims=(120, 120, 120), true_rank=20, collinearity=(0.9,), l1=0.01)
    pairs = []
    for seed in range(10):
        x, _ = assemble_noisy_tensor(SynthSpec(seed=seed, **spec_args))
        plain_model, plain_trace = cp_als_qr(
            x, qr_config(20, 'branch-reuse', max_iterations=20, tol=1.0, seed=seed))
        extra_model, extra_trace = als_qr_bre(
            x, qr_config(20, max_iterations=20, tol=1.0, seed=seed, extrapolation_enabled=True))
        assert len(plain_trace) == len(extra_trace) == 20
        extra_direct = fitness_direct(x, extra_model)
        assert extra_trace[-1].fitness == pytest.approx(extra_direct, rel=1e-8)
        pairs.append((extra_direct, fitness_direct(x, plain_model)))
    wins = sum(1 for bre, br in pairs if bre >= br)
    # reported only; the comparison is an experiment outcome
    record_property('extrapolated_wins', wins)
    record_property('fitness_pairs', pairs)
    print(f'extrapolated >= plain in {wins}/10 seeds: {pairs}')
