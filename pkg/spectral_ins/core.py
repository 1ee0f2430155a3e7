import json
import logging
import os
import shutil
import sys
from datetime import datetime

import click
from colorclass import Color
from deepdiff import DeepDiff

from spectral_ins import asset_helpers
from spectral_ins import config
from spectral_ins import config_utils
from spectral_ins import constants
from spectral_ins import errors
from spectral_ins.workflow import experiments
from spectral_ins.workflow import runner

logger = logging.getLogger()
logger.setLevel(logging.INFO)

IGNORED_WHEN_COMPARING = ["root['runtime']"]


def cli(info, info_line_numbers):
    if info:
        logging.basicConfig(
            format="%(levelname)s %(threadName)s %(message)s", level=logging.INFO
        )
    if info_line_numbers:
        logging.basicConfig(
            format="%(levelname)s %(threadName)s [%(filename)s:%(lineno)d] %(message)s",
            datefmt="%Y-%m-%d:%H:%M:%S",
            level=logging.INFO,
        )


def invalid_config(error):
    click.echo(Color("{red}" + str(error) + "{/red}"), err=True)
    sys.exit(constants.EXIT_INVALID_CONFIG)


def load(config_file=None, mode=None, seed=None, output=None):
    """The validated config: the file (or only the defaults) with the command line flags on top."""
    try:
        if config_file is None:
            return config.load_defaults(mode, seed, output)
        return config.load_config(config_file, mode, seed, output)
    except errors.ConfigError as e:
        invalid_config(e)


def get_cache_invalidator():
    return datetime.now().strftime("%Y%m%d%H%M%S%f")


def run(config_file, mode, seed, output, jobs):
    cfg = load(config_file, mode, seed, output)
    click.echo(f"running {cfg.mode} with seed {cfg.seed} into {cfg.output_dir}")
    task = experiments.RunExperimentTask(
        config_json=cfg.to_json(),
        source=cfg.source,
        cache_invalidator=get_cache_invalidator(),
    )
    sys.exit(runner.run_tasks([task], jobs, cfg.output_dir))


def sweep(config_file, parameter, values, mode, seed, output, jobs):
    cfg = load(config_file, mode, seed, output)
    if not values:
        invalid_config(errors.ConfigError("empty values list", field=parameter))
    parsed = [config_utils.parse_value(value) for value in values]
    try:
        for value in parsed:
            cfg.with_value(parameter, value)
    except errors.ConfigError as e:
        invalid_config(e)

    click.echo(f"sweeping {parameter} over {parsed} for {cfg.mode} into {cfg.output_dir}")
    task = experiments.SweepTask(
        config_json=cfg.to_json(),
        source=cfg.source,
        parameter=parameter,
        values=parsed,
        cache_invalidator=get_cache_invalidator(),
    )
    sys.exit(runner.run_tasks([task], jobs, cfg.output_dir))


def validate(config_file):
    logger.info(f"Validating {config_file}")
    load(config_file)
    click.echo(f"Finished validating: {config_file}")
    click.echo("Finished validating: OK")


def read_diagnostics(directory):
    path = os.path.join(directory, constants.DIAGNOSTICS_JSON)
    if not os.path.exists(path):
        raise click.ClickException(f"{path} does not exist")
    with open(path, "r") as f:
        return json.loads(f.read())


def compare(first, second):
    ddiff = DeepDiff(
        read_diagnostics(first),
        read_diagnostics(second),
        exclude_paths=IGNORED_WHEN_COMPARING,
    )
    if ddiff:
        click.echo(Color("{red}diagnostics differ{/red}"))
        click.echo(json.dumps(dict(ddiff), indent=4, default=str))
        sys.exit(constants.EXIT_SUITE_FAILURE)
    click.echo(Color("{green}diagnostics identical{/green}"))


def seed(mode, p):
    try:
        config.get_experiment_text(mode)
    except errors.ConfigError as e:
        invalid_config(e)
    target = os.path.sep.join([p, f"{mode}.properties"])
    shutil.copy2(
        asset_helpers.resolve_from_site_packages(
            os.path.sep.join([constants.EXPERIMENTS_DIRECTORY, f"{mode}.properties"])
        ),
        target,
    )
    click.echo(f"wrote {target}")


def version():
    click.echo(f"cli version: {constants.get_version()}")
