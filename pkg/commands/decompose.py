#!/usr/bin/env python3
"""
CP Toolkit - decompose command
Runs one CP solver on a tensor file and writes the model and trace
"""

import logging

import click

from commands import ALGORITHMS, solver_config
from utils.file_formats import load_tensor, save_model, write_trace
from utils.kruskal import fitness_direct
from utils.solvers import decompose as run_solver

logger = logging.getLogger(__name__)

FITNESS_AGREEMENT_TOL = 1e-8


@click.command('decompose')
@click.option('-i', '--input', 'input_path', required=True,
              type=click.Path(dir_okay=False))
@click.option('--alg', type=click.Choice(list(ALGORITHMS)), default='als', show_default=True)
@click.option('--rank', type=int, required=True)
@click.option('--iters', type=int, default=None, help='Maximum number of sweeps.')
@click.option('--tol', type=float, default=None, help='Stop once fitness reaches this value.')
@click.option('--seed', type=int, default=None)
@click.option('--alpha', type=float, default=None, help='Weight of the previous Q0.')
@click.option('--beta', type=float, default=None, help='Fixed extrapolation step (0 disables).')
@click.option('--gap', type=float, default=None, help='Fitness change below which extrapolation starts.')
@click.option('--trace', 'trace_path', type=click.Path(dir_okay=False), default=None)
@click.option('--no-timing', is_flag=True, help='Write 0.0 in the seconds column.')
@click.option('-o', '--output', type=click.Path(dir_okay=False), default=None)
@click.pass_obj
def decompose(config, input_path, alg, rank, iters, tol, seed, alpha, beta, gap,
              trace_path, no_timing, output):
    """Fit a rank-R CP model and print its final fitness."""
    cfg = solver_config(
        alg,
        rank=rank,
        iterations=config.DEFAULT_MAX_ITERATIONS if iters is None else iters,
        tol=config.DEFAULT_TOL if tol is None else tol,
        seed=config.DEFAULT_SEED if seed is None else seed,
        alpha=config.DEFAULT_ALPHA if alpha is None else alpha,
        beta=beta,
        gap=config.DEFAULT_ACTIVATION_GAP if gap is None else gap,
    )
    x = load_tensor(input_path)
    model, trace = run_solver(x, cfg)

    if x.size <= config.DIRECT_FITNESS_MAX_ELEMENTS:
        direct, tracked = fitness_direct(x, model), trace[-1].fitness
        if abs(direct - tracked) > FITNESS_AGREEMENT_TOL:
            logger.warning('tracked fitness %.12f disagrees with direct fitness %.12f', tracked, direct)
        else:
            logger.info('direct fitness %.12f matches tracked fitness', direct)
    if trace_path:
        write_trace(trace_path, trace, timing=not no_timing)
    if output:
        save_model(output, model)

    click.echo(f'✅ {alg}: {len(trace)} sweeps, root TTMs {trace[-1].root_ttm_count}', err=True)
    click.echo(repr(trace[-1].fitness))
