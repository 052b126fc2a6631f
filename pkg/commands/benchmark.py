#!/usr/bin/env python3
"""
CP Toolkit - benchmark command
Average sweep time, per-phase shares and final fitness for several solvers
on the same tensor
"""

import logging
from collections import defaultdict

import click
import numpy as np

from commands import algorithm_list, solver_config
from utils.file_formats import load_tensor
from utils.solvers import decompose as run_solver

logger = logging.getLogger(__name__)

DEFAULT_ALGORITHMS = 'als,qr,qr-dt,qr-br,qr-bre'


def summarize(traces):
    """Mean sweep time, final fitness values and phase shares over repeated runs."""
    sweep_times = [row.wall_seconds for trace in traces for row in trace]
    phases = defaultdict(float)
    for trace in traces:
        for row in trace:
            for name, seconds in row.phase_seconds.items():
                phases[name] += seconds
    total = sum(phases.values()) or 1.0
    return {
        'mean_sweep_seconds': float(np.mean(sweep_times)),
        'final_fitness': [trace[-1].fitness for trace in traces],
        'phase_share': {name: seconds / total for name, seconds in sorted(phases.items())},
    }


@click.command('benchmark')
@click.option('-i', '--input', 'input_path', required=True, type=click.Path(dir_okay=False))
@click.option('--rank', type=int, required=True)
@click.option('--iters', type=int, default=20, show_default=True)
@click.option('--algs', callback=algorithm_list, default=DEFAULT_ALGORITHMS, show_default=True)
@click.option('--seed', type=int, default=None)
@click.option('--repeats', type=click.IntRange(min=1), default=3, show_default=True)
@click.option('--tol', type=float, default=1.0, show_default=True)
@click.pass_obj
def benchmark(config, input_path, rank, iters, algs, seed, repeats, tol):
    """Time the selected solvers over `repeats` seeds each."""
    seed = config.DEFAULT_SEED if seed is None else seed
    x = load_tensor(input_path)
    results = {}
    for alg in algs:
        traces = []
        for r in range(repeats):
            cfg = solver_config(alg, rank, iters, tol, seed + r, config.DEFAULT_ALPHA,
                                None, config.DEFAULT_ACTIVATION_GAP)
            traces.append(run_solver(x, cfg)[1])
        results[alg] = summarize(traces)
        logger.info('%s: %d runs done', alg, repeats)

    reference = results.get('qr')
    for alg, result in results.items():
        fitness = np.array(result['final_fitness'])
        line = (f'{alg:<7} sweep {result["mean_sweep_seconds"]:.4e}s  '
                f'fitness mean {fitness.mean():.6f} min {fitness.min():.6f} max {fitness.max():.6f}')
        if reference is not None and result['mean_sweep_seconds'] > 0.0:
            line += f'  speedup vs qr {reference["mean_sweep_seconds"] / result["mean_sweep_seconds"]:.2f}x'
        click.echo(line)
        shares = ', '.join(f'{name} {share:.0%}' for name, share in result['phase_share'].items())
        click.echo(f'        phases: {shares}')

    if 'qr-br' in results and 'qr-bre' in results:
        pairs = zip(results['qr-bre']['final_fitness'], results['qr-br']['final_fitness'])
        wins = sum(1 for bre, br in pairs if bre >= br)
        click.echo(f'qr-bre >= qr-br in {wins}/{repeats} seeds')
