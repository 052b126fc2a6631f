#!/usr/bin/env python3
"""
CP Toolkit - info command
"""

import click

from utils.file_formats import read_header


@click.command('info')
@click.option('-i', '--input', 'input_path', required=True, type=click.Path(dir_okay=False))
def info(input_path):
    """Print the header of a tensor or model file."""
    header = read_header(input_path)
    for key, value in header.items():
        if key == 'shape':
            value = 'x'.join(map(str, value))
        click.echo(f'{key}: {value}')
