#!/usr/bin/env python3
"""
CP Toolkit - counts command
Closed-form versus measured contraction costs of the first three iterations
"""

import click

from commands import int_list
from models import STRATEGIES
from utils.dim_tree import (
    EXPECTED_ROOT_COUNTS,
    build_schedule,
    closed_form_cost,
    leading_label,
    measured_cost,
    term_size,
)
from utils.errors import COUNTS_MISMATCH_EXIT, InvalidInputError

ITERATIONS = 3


@click.command('counts')
@click.option('--order', type=click.Choice(['3', '4']), required=True)
@click.option('--dims', callback=int_list, default=None, help='Extents; 100 per mode by default.')
@click.option('--rank', type=int, default=10, show_default=True)
@click.pass_context
def counts(ctx, order, dims, rank):
    """Print TTM tallies per strategy and check the root-TTM counts."""
    order = int(order)
    dims = dims or (100,) * order
    if len(dims) != order:
        raise InvalidInputError(f'{len(dims)} extents given for order {order}')

    mismatches = []
    leading = {}
    for strategy in STRATEGIES:
        closed = closed_form_cost(order, strategy, dims, rank)
        measured = measured_cost(build_schedule(order, strategy, ITERATIONS), dims, rank, ITERATIONS)
        expected_roots = EXPECTED_ROOT_COUNTS[order][strategy]
        leading[strategy] = closed.terms.get(leading_label(order), 0)

        click.echo(f'{strategy}: root TTMs {measured.root_ttm_count} (expected {expected_roots}) '
                   f'of {measured.ttm_count}, '
                   f'flops closed-form {closed.flops} measured {measured.total_flops}')
        for label in sorted(set(closed.terms) | set(measured.flops)):
            coefficient = measured.flops.get(label, 0) // term_size(label, dims, rank)
            click.echo(f'  {label:<12} closed {closed.terms.get(label, 0):>3}  '
                       f'measured {coefficient:>3}  ttms {measured.counts.get(label, 0)}')
        if measured.root_ttm_count != expected_roots:
            mismatches.append(strategy)

    if leading['dim-tree']:
        click.echo(f"leading term branch-reuse/dim-tree = "
                   f"{leading['branch-reuse']}/{leading['dim-tree']}")
    if mismatches:
        click.echo(f"❌ root TTM counts deviate for {', '.join(mismatches)}", err=True)
        ctx.exit(COUNTS_MISMATCH_EXIT)
    click.echo('✅ root TTM counts match', err=True)
