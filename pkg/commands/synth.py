#!/usr/bin/env python3
"""
CP Toolkit - synth command
Generates a collinear, noisy low-rank tensor and optionally its ground truth
"""

import logging

import click

from commands import float_list, int_list
from models import SynthSpec
from utils.errors import InvalidInputError
from utils.file_formats import save_model, save_tensor
from utils.synth import PRESETS, assemble_noisy_tensor, preset_spec

logger = logging.getLogger(__name__)


@click.command('synth')
@click.option('--preset', type=click.Choice([str(k) for k in PRESETS]), default=None,
              help='Start from a published configuration; other flags override it.')
@click.option('--dims', callback=int_list, default=None, help='Extents, e.g. 500,500,500.')
@click.option('--rank', type=int, default=None, help='True rank of the generated tensor.')
@click.option('--collinearity', callback=float_list, default=None,
              help='One value, or one per mode.')
@click.option('--l1', type=float, default=None, help='Homoscedastic noise level in percent.')
@click.option('--l2', type=float, default=None, help='Heteroscedastic noise level in percent.')
@click.option('--seed', type=int, default=None)
@click.option('-o', '--output', required=True, type=click.Path(dir_okay=False),
              help='Tensor file to write.')
@click.option('--truth', type=click.Path(dir_okay=False), default=None,
              help='Also write the ground-truth model here.')
@click.pass_obj
def synth(config, preset, dims, rank, collinearity, l1, l2, seed, output, truth):
    """Generate a synthetic tensor file."""
    seed = config.DEFAULT_SEED if seed is None else seed

    if preset is not None:
        base, fitted_rank = preset_spec(int(preset), dims, seed, rank)
        logger.info('preset %s: suggested fitted rank %d', preset, fitted_rank)
        spec = SynthSpec(
            dims=base.dims,
            true_rank=base.true_rank,
            collinearity=base.collinearity if collinearity is None else collinearity,
            l1=base.l1 if l1 is None else l1,
            l2=base.l2 if l2 is None else l2,
            seed=seed,
        )
    else:
        if dims is None or rank is None:
            raise InvalidInputError('--dims and --rank are required without --preset')
        spec = SynthSpec(
            dims=dims,
            true_rank=rank,
            collinearity=collinearity or (0.0,),
            l1=l1 or 0.0,
            l2=l2 or 0.0,
            seed=seed,
        )

    tensor, model = assemble_noisy_tensor(spec)
    save_tensor(output, tensor)
    if truth:
        save_model(truth, model)
    click.echo(f"✅ Wrote {'x'.join(map(str, spec.dims))} tensor to {output}", err=True)
