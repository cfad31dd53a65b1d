import logging

import click

from fuzzy_l1 import __version__
from fuzzy_l1.commands import (
    create_compare_command,
    create_simulate_command,
    create_tune_command,
)


@click.group(help="Fuzzy-scheduled L1 adaptive control experiments")
@click.version_option(__version__)
@click.option("-v",
              "--verbose",
              is_flag=True,
              default=False,
              help="Log debug output")
def cli(verbose: bool) -> None:
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.INFO,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s")


for create_command in (create_simulate_command, create_tune_command,
                       create_compare_command):
    create_command(cli)
