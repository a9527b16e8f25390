"""Shared plumbing for every ``click`` job: common options, config echo, exit codes."""

import functools
import logging
import os
import sys

import click

from . import constants
from .config import load_config
from .exceptions import ConfigError, DataError, NumericalError
from .utils import ensure_dir, write_json

logger = logging.getLogger(__name__)


def run_options(func):
    """Attach ``--config/--set/--seed/--checkpoint/--out`` to a job command."""
    options = [
        click.option("--config", "config_path", type=str, default=None),
        click.option("--set", "overrides", multiple=True, help="key=value override"),
        click.option("--seed", type=int, default=None),
        click.option("--checkpoint", type=str, default=None),
        click.option("--out", "out_dir", type=str, default=None),
    ]
    for option in reversed(options):
        func = option(func)
    return func


def exit_code_for(err):
    if isinstance(err, ConfigError):
        return constants.EXIT_CONFIG
    if isinstance(err, NumericalError):
        return constants.EXIT_NUMERICAL
    if isinstance(err, (DataError, OSError)):
        return constants.EXIT_IO
    return 1


def job(func):
    """Resolve the run config, then run ``func(cfg, checkpoint, **rest)``.

    Configuration problems are reported before the job touches the disk.
    Known failures are logged and mapped to the documented exit codes.
    """

    @functools.wraps(func)
    def wrapper(config_path, overrides, seed, checkpoint, out_dir, **kwargs):
        try:
            cfg = load_config(config_path, overrides, seed=seed, out_dir=out_dir)
            result = func(cfg, checkpoint, **kwargs)
        except (ConfigError, NumericalError, DataError, OSError) as err:
            logger.error("{}: {}".format(type(err).__name__, err))
            sys.exit(exit_code_for(err))
        return result

    return wrapper


def echo_config(cfg, out_dir=None):
    """Write the full config echo into the run's output directory."""
    out_dir = ensure_dir(out_dir or cfg["paths.out_dir"])
    write_json(cfg.to_dict(), os.path.join(out_dir, constants.CONFIG_ECHO_FILE_NAME))
    return out_dir
