import click

from spectral_ins import core


def experiment_options(f):
    for option in reversed(
        [
            click.option("--config", "config_file", type=click.Path(), default=None),
            click.option("--mode", default=None),
            click.option("--output", default=None),
            click.option("--seed", default=None, type=int),
            click.option("--jobs", default=1, type=click.IntRange(min=1)),
        ]
    ):
        f = option(f)
    return f


@click.group()
@click.option("--info/--no-info", default=False)
@click.option("--info-line-numbers/--no-info-line-numbers", default=False)
def cli(info, info_line_numbers):
    """cli for spectral critical-space experiments"""
    core.cli(info, info_line_numbers)


@cli.command()
@experiment_options
def run(config_file, mode, output, seed, jobs):
    core.run(config_file, mode, seed, output, jobs)


@cli.command()
@click.argument("parameter")
@click.argument("values", nargs=-1)
@experiment_options
def sweep(parameter, values, config_file, mode, output, seed, jobs):
    core.sweep(config_file, parameter, list(values), mode, seed, output, jobs)


@cli.command()
@click.argument("f", type=click.Path())
def validate(f):
    core.validate(f)


@cli.command()
@click.argument("first", type=click.Path(exists=True, file_okay=False))
@click.argument("second", type=click.Path(exists=True, file_okay=False))
def compare(first, second):
    core.compare(first, second)


@cli.command()
@click.argument("mode")
@click.argument("p", type=click.Path(exists=True))
def seed(mode, p):
    core.seed(mode, p)


@cli.command()
def version():
    core.version()


if __name__ == "__main__":
    cli()
