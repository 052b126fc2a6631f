"""
CP Toolkit - Commands
Shared option parsing and the algorithm table used by every subcommand
"""

import click

from models import SolverConfig

# --alg name: (algorithm, strategy, extrapolation)
ALGORITHMS = {
    'als': ('als', 'naive', False),
    'qr': ('als-qr', 'naive', False),
    'qr-dt': ('als-qr', 'dim-tree', False),
    'qr-br': ('als-qr', 'branch-reuse', False),
    'qr-bre': ('als-qr', 'branch-reuse', True),
}


def _split(value):
    return [part.strip() for part in value.split(',') if part.strip()]


def int_list(ctx, param, value):
    """click callback: '500,500,500' -> (500, 500, 500)"""
    if value is None:
        return None
    try:
        return tuple(int(part) for part in _split(value))
    except ValueError:
        raise click.BadParameter(f'expected comma-separated integers, got {value!r}')


def float_list(ctx, param, value):
    """click callback: '0.9,0.9' -> (0.9, 0.9)"""
    if value is None:
        return None
    try:
        return tuple(float(part) for part in _split(value))
    except ValueError:
        raise click.BadParameter(f'expected comma-separated numbers, got {value!r}')


def algorithm_list(ctx, param, value):
    names = _split(value)
    unknown = [name for name in names if name not in ALGORITHMS]
    if unknown or not names:
        raise click.BadParameter(
            f'unknown algorithm(s) {unknown}; choose from {", ".join(ALGORITHMS)}'
        )
    return names


def solver_config(alg, rank, iterations, tol, seed, alpha, beta, gap):
    algorithm, strategy, extrapolate = ALGORITHMS[alg]
    return SolverConfig(
        rank=rank,
        max_iterations=iterations,
        tol=tol,
        algorithm=algorithm,
        strategy=strategy,
        extrapolation_enabled=extrapolate,
        alpha=alpha,
        beta_override=beta,
        activation_gap=gap,
        seed=seed,
    )
