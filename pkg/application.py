#!/usr/bin/env python3
"""
CP Toolkit - Main Application
Command-line entry point: logging setup, error handling and command registration
"""

import logging
import os
from logging.handlers import RotatingFileHandler

import click

from commands.benchmark import benchmark
from commands.counts import counts
from commands.decompose import decompose
from commands.info import info
from commands.synth import synth
from config import get_config
from utils.errors import IO_ERROR_EXIT, IO_ERROR_SLUG, CPToolkitError

LOG_FORMAT = '%(asctime)s %(levelname)s: %(message)s [in %(pathname)s:%(lineno)d]'


# ============================================================================
# LOGGING
# ============================================================================

def configure_logging(config, level=None):
    """Stderr handler always; rotating file handler in production or when LOG_TO_FILE is set."""
    root = logging.getLogger()
    for handler in [h for h in root.handlers if getattr(h, '_cpkit', False)]:
        root.removeHandler(handler)
        handler.close()

    level = (level or config.LOG_LEVEL).upper()
    stream_handler = logging.StreamHandler()
    stream_handler.setFormatter(logging.Formatter('%(levelname)s %(name)s: %(message)s'))
    stream_handler._cpkit = True
    root.addHandler(stream_handler)

    if config.ENVIRONMENT == 'production' or config.LOG_TO_FILE:
        if not os.path.exists(config.LOG_DIR):
            os.makedirs(config.LOG_DIR)
        file_handler = RotatingFileHandler(
            os.path.join(config.LOG_DIR, f'{config.APP_NAME}.log'),
            maxBytes=config.LOG_FILE_MAX_BYTES,
            backupCount=config.LOG_BACKUP_COUNT,
        )
        file_handler.setFormatter(logging.Formatter(LOG_FORMAT))
        file_handler.setLevel(logging.INFO)
        file_handler._cpkit = True
        root.addHandler(file_handler)

    root.setLevel(level)
    logging.getLogger(__name__).info('%s %s startup (%s)',
                                     config.APP_NAME, config.APP_VERSION, config.ENVIRONMENT)


# ============================================================================
# ERROR HANDLING
# ============================================================================

class CPToolkitGroup(click.Group):
    """Turns toolkit and I/O errors into a one-line diagnostic and an exit code."""

    def invoke(self, ctx):
        try:
            return super().invoke(ctx)
        except CPToolkitError as e:
            logging.getLogger(__name__).debug('command failed', exc_info=True)
            click.echo(f'❌ {e.error}: {e}', err=True)
            ctx.exit(e.exit_code)
        except OSError as e:
            click.echo(f'❌ {IO_ERROR_SLUG}: {e}', err=True)
            ctx.exit(IO_ERROR_EXIT)


# ============================================================================
# APPLICATION FACTORY
# ============================================================================

def create_cli(config_name=None):
    """Create the command group"""
    config = get_config(config_name)

    @click.group(cls=CPToolkitGroup)
    @click.option('--log-level', default=None,
                  type=click.Choice(['DEBUG', 'INFO', 'WARNING', 'ERROR'], case_sensitive=False),
                  help='Override LOG_LEVEL for this run.')
    @click.version_option(config.APP_VERSION, prog_name=config.APP_NAME)
    @click.pass_context
    def cli(ctx, log_level):
        """Dense CP decomposition toolkit."""
        configure_logging(config, log_level)
        ctx.obj = config

    cli.add_command(synth)
    cli.add_command(decompose)
    cli.add_command(counts)
    cli.add_command(info)
    cli.add_command(benchmark)
    return cli


cli = create_cli()

if __name__ == '__main__':
    cli()
