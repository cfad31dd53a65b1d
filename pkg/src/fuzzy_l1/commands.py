import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from typing import Any, Dict, Optional, Tuple

import click

from fuzzy_l1 import constants, utils
from fuzzy_l1.config import RunConfig, load_config
from fuzzy_l1.errors import ConfigError
from fuzzy_l1.pso import run_pso
from fuzzy_l1.simulation import (
    SimulationResult,
    make_gain_source,
    simulate,
    summarize,
)

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG_ERROR = 1
EXIT_DIVERGED = 2

OutputParams = Optional[Dict[str, Tuple[float, float, float]]]


def _output_params(config: RunConfig, mode: str) -> OutputParams:
    if mode != "fuzzy" or config.tuner_file is None:
        return None
    return utils.load_tuner_file(config.tuner_file)


def _run_mode(config: RunConfig, mode: str) -> SimulationResult:
    scenario = config.build_scenario()
    gain_source = make_gain_source(mode, scenario,
                                   _output_params(config, mode),
                                   config.input_params())
    logger.info(f"Running {scenario.name} in {mode} mode for "
                f"{config.duration} s")
    return simulate(scenario, gain_source, config.grid(), config.reference)


def trajectory_file(mode: Optional[str] = None) -> str:
    if mode is None:
        return constants.TRAJECTORY_FILE
    stem, ext = os.path.splitext(constants.TRAJECTORY_FILE)
    return f"{stem}_{mode}{ext}"


def cmd_simulate(config: RunConfig) -> int:
    """Run one controller on one scenario and write its trajectory.

    Writes ``trajectory.csv`` and ``status.json`` into ``config.out_dir``.

    Returns:
        int: 0 on completion, 1 on a configuration error, 2 on divergence.
    """
    try:
        result = _run_mode(config, config.mode)
    except ConfigError as e:
        logger.error(str(e))
        return EXIT_CONFIG_ERROR
    out_dir = utils.ensure_dir(config.out_dir)
    utils.write_trajectory_csv(os.path.join(out_dir, trajectory_file()),
                               result.trajectory)
    utils.write_json(os.path.join(out_dir, constants.STATUS_FILE),
                     utils.status_record(result))
    if result.diverged:
        logger.info(f"Diverged at t={result.t_fail}")
        return EXIT_DIVERGED
    logger.info(f"Completed {len(result.trajectory)} samples")
    return EXIT_OK


def cmd_tune(config: RunConfig) -> int:
    """Tune the output membership functions on the configured scenario.

    Writes ``tuning.json`` and ``convergence.csv`` into ``config.out_dir``.
    """
    try:
        scenario = config.build_scenario()
    except ConfigError as e:
        logger.error(str(e))
        return EXIT_CONFIG_ERROR
    grid = config.tuning_grid()
    result = run_pso(config.swarm,
                     scenario,
                     grid,
                     reference=config.reference,
                     input_params=config.input_params())
    out_dir = utils.ensure_dir(config.out_dir)
    utils.write_json(
        os.path.join(out_dir, constants.TUNING_FILE),
        utils.tuning_record(result, config.swarm, scenario.name, grid))
    utils.write_convergence_csv(
        os.path.join(out_dir, constants.CONVERGENCE_FILE), result.history)
    logger.info(f"Best objective {result.best_value:.6g}")
    return EXIT_OK


def cmd_compare(config: RunConfig) -> int:
    """Run the constant and fuzzy controllers side by side.

    Writes one trajectory per mode and ``summary.json``. A constant-gain
    divergence on case3 is tolerated and still exits 0.
    """
    modes = constants.CONTROLLER_MODES
    try:
        config.build_scenario()
        for mode in modes:
            _output_params(config, mode)
    except ConfigError as e:
        logger.error(str(e))
        return EXIT_CONFIG_ERROR
    with ThreadPoolExecutor(max_workers=len(modes)) as executor:
        results = dict(
            zip(modes,
                executor.map(lambda mode: _run_mode(config, mode), modes)))
    out_dir = utils.ensure_dir(config.out_dir)
    summary: Dict[str, Any] = {"scenario": config.scenario}
    for mode, result in results.items():
        path = os.path.join(out_dir, trajectory_file(mode))
        utils.write_trajectory_csv(path, result.trajectory)
        summary[mode] = summarize(result)
    utils.write_json(os.path.join(out_dir, constants.SUMMARY_FILE), summary)

    expected = config.scenario == "case3"
    if results["fuzzy"].diverged or (results["constant"].diverged
                                     and not expected):
        return EXIT_DIVERGED
    return EXIT_OK


def _with_cli_options(config: RunConfig, seed: Optional[int],
                      out_dir: Optional[str]) -> RunConfig:
    if seed is not None:
        config = replace(config, seed=seed, swarm=replace(config.swarm,
                                                          seed=seed))
    if out_dir is not None:
        config = replace(config, out_dir=out_dir)
    return config


def _config_option(function: Any) -> Any:
    function = click.option(
        "-o",
        "--out-dir",
        help="Directory for result files, overriding the config",
    )(function)
    function = click.option(
        "-s",
        "--seed",
        type=int,
        help="RNG seed, overriding the config",
    )(function)
    return click.option(
        "-c",
        "--config",
        "config_path",
        required=True,
        help="Path to the JSON run configuration",
    )(function)


def _load(config_path: str, seed: Optional[int],
          out_dir: Optional[str]) -> RunConfig:
    ctx = click.get_current_context()
    try:
        config = load_config(config_path)
    except ConfigError as e:
        click.echo(f"Invalid configuration: {e}", err=True)
        ctx.exit(EXIT_CONFIG_ERROR)
    return _with_cli_options(config, seed, out_dir)


def create_simulate_command(cli: click.Group) -> click.Command:
    """Creates the simulate command."""
    @cli.command("simulate",
                 short_help="Simulate one controller on a benchmark plant")
    @_config_option
    def simulate_command(config_path: str, seed: Optional[int],
                         out_dir: Optional[str]) -> None:
        """Simulate the closed loop and write trajectory.csv.

        Args:
            config_path (str): JSON run configuration
            seed (int, optional): RNG seed override
            out_dir (str, optional): Output directory override
        """
        click.get_current_context().exit(
            simulate_command_fn(config_path, seed, out_dir))

    def simulate_command_fn(config_path: str, seed: Optional[int],
                            out_dir: Optional[str]) -> int:
        return cmd_simulate(_load(config_path, seed, out_dir))

    return simulate_command


def create_tune_command(cli: click.Group) -> click.Command:
    """Creates the tune command."""
    @cli.command("tune",
                 short_help="Tune the fuzzy output sets with a particle swarm")
    @_config_option
    def tune_command(config_path: str, seed: Optional[int],
                     out_dir: Optional[str]) -> None:
        """Run the swarm and write tuning.json and convergence.csv.

        Args:
            config_path (str): JSON run configuration
            seed (int, optional): RNG seed override
            out_dir (str, optional): Output directory override
        """
        click.get_current_context().exit(
            tune_command_fn(config_path, seed, out_dir))

    def tune_command_fn(config_path: str, seed: Optional[int],
                        out_dir: Optional[str]) -> int:
        return cmd_tune(_load(config_path, seed, out_dir))

    return tune_command


def create_compare_command(cli: click.Group) -> click.Command:
    """Creates the compare command."""
    @cli.command("compare",
                 short_help="Compare constant and fuzzy feedback gains")
    @_config_option
    def compare_command(config_path: str, seed: Optional[int],
                        out_dir: Optional[str]) -> None:
        """Run both controllers and write their trajectories and summary.json.

        Args:
            config_path (str): JSON run configuration
            seed (int, optional): RNG seed override
            out_dir (str, optional): Output directory override
        """
        click.get_current_context().exit(
            compare_command_fn(config_path, seed, out_dir))

    def compare_command_fn(config_path: str, seed: Optional[int],
                           out_dir: Optional[str]) -> int:
        return cmd_compare(_load(config_path, seed, out_dir))

    return compare_command
