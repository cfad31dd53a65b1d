import os
import unittest
from typing import Callable, List, Sequence

import click
from click.testing import CliRunner, Result


class TestData:
    def __init__(self, path: str) -> None:
        self.directory = os.path.dirname(os.path.abspath(path))

    def get_path(self, rel_path: str) -> str:
        return os.path.join(self.directory, "data-files", rel_path)


test_data = TestData(__file__)


class CliTestCase(unittest.TestCase):
    """Runs commands registered on a fresh click group."""
    def create_subcommand_functions(
            self) -> List[Callable[[click.Group], click.Command]]:
        return []

    def setUp(self) -> None:
        @click.group()
        def cli() -> None:
            pass

        for create in self.create_subcommand_functions():
            create(cli)
        self.cli = cli

    def run_command(self, cmd: Sequence[str]) -> Result:
        runner = CliRunner()
        return runner.invoke(self.cli, list(cmd), catch_exceptions=True)
