import json
import logging
import os
from typing import Any, Dict, List, Sequence, Tuple

import numpy as np

from fuzzy_l1 import constants
from fuzzy_l1.errors import ConfigError
from fuzzy_l1.fuzzy import MFSet
from fuzzy_l1.pso import PSOResult, SwarmConfig, decode
from fuzzy_l1.simulation import SimulationResult, TimeGrid, Trajectory

logger = logging.getLogger(__name__)

CSV_FORMAT = "%.17g"


def write_trajectory_csv(path: str, trajectory: Trajectory) -> None:
    np.savetxt(path,
               trajectory.table().reshape(-1,
                                          len(constants.TRAJECTORY_COLUMNS)),
               fmt=CSV_FORMAT,
               delimiter=",",
               header=",".join(constants.TRAJECTORY_COLUMNS),
               comments="")
    logger.debug(f"Wrote {len(trajectory)} rows to {path}")


def read_trajectory_csv(path: str) -> Trajectory:
    with open(path) as f:
        header = f.readline().strip().split(",")
    if header != constants.TRAJECTORY_COLUMNS:
        raise ValueError(f"{path} does not start with the trajectory header")
    table = np.loadtxt(path,
                       delimiter=",",
                       skiprows=1,
                       ndmin=2,
                       dtype=float)
    return Trajectory.from_table(
        table.reshape(-1, len(constants.TRAJECTORY_COLUMNS)))


def write_json(path: str, data: Dict[str, Any]) -> None:
    with open(path, "w") as f:
        json.dump(data, f, indent=2)
        f.write("\n")


def read_json(path: str) -> Dict[str, Any]:
    with open(path) as f:
        data = json.load(f)
    if not isinstance(data, dict):
        raise ValueError(f"{path} does not hold a JSON object")
    return data


def status_record(result: SimulationResult) -> Dict[str, Any]:
    return {"diverged": result.diverged, "t_fail": result.t_fail}


def write_convergence_csv(path: str, history: Sequence[float]) -> None:
    table = np.column_stack(
        [np.arange(len(history), dtype=float),
         np.asarray(history, dtype=float)])
    np.savetxt(path,
               table,
               fmt=["%d", CSV_FORMAT],
               delimiter=",",
               header=",".join(constants.CONVERGENCE_COLUMNS),
               comments="")


def read_convergence_csv(path: str) -> Tuple[np.ndarray, np.ndarray]:
    table = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return table[:, 0].astype(int), table[:, 1]


def tuning_record(result: PSOResult, config: SwarmConfig, scenario: str,
                  grid: TimeGrid) -> Dict[str, Any]:
    """JSON-ready record of a swarm run."""
    return {
        "seed": config.seed,
        "scenario": scenario,
        "config": {
            "population": config.population,
            "generations": config.generations,
            "c1": config.c1,
            "c2": config.c2,
            "inertia": config.inertia,
            "inertia_schedule": config.inertia_schedule,
            "lambda": config.lam,
            "per_dimension_random": config.per_dimension_random,
            "gamma1": config.gamma1,
            "gamma2": config.gamma2,
            "duration": grid.tf - grid.t0,
            "dt": grid.dt,
        },
        "fields": list(constants.PARTICLE_FIELDS),
        "best": [float(v) for v in result.best],
        "best_value": result.best_value,
        "decoded": {
            label: [float(v) for v in triple]
            for label, triple in result.decoded.items()
        },
        "repaired": result.repaired,
        "history": [float(v) for v in result.history],
    }


def load_tuner_file(path: str) -> Dict[str, Tuple[float, float, float]]:
    """Output MF parameters from a tuning result file.

    The ``decoded`` triples are used when present, otherwise the ``best``
    free parameters are decoded. Either way the triples must form valid
    triangles inside the output universe.

    Raises:
        ConfigError: If the file holds neither, or its triangles are invalid.
    """
    try:
        data = read_json(path)
    except (OSError, ValueError) as e:
        logger.error(f"Could not read tuner file {path}")
        raise ConfigError("tuner_file", str(e)) from e
    if not isinstance(data, dict):
        raise ConfigError("tuner_file", f"{path} is not a JSON object")
    if "decoded" in data:
        decoded = data["decoded"]
        try:
            params = {
                label: (float(decoded[label][0]), float(decoded[label][1]),
                        float(decoded[label][2]))
                for label in constants.LABELS
            }
        except (KeyError, IndexError, TypeError, ValueError) as e:
            raise ConfigError("tuner_file",
                              f"malformed decoded parameters: {e}") from e
    else:
        best: List[Any] = data.get("best", [])
        if len(best) != len(constants.PARTICLE_FIELDS):
            raise ConfigError(
                "tuner_file",
                f"{path} has neither decoded parameters nor a best particle")
        try:
            params, _ = decode([float(v) for v in best])
        except (TypeError, ValueError) as e:
            raise ConfigError("tuner_file",
                              f"malformed best particle: {e}") from e
    _check_output_params(path, params)
    return params


def _check_output_params(path: str,
                         params: Dict[str, Tuple[float, float,
                                                 float]]) -> None:
    low, high = constants.OUTPUT_UNIVERSE
    try:
        MFSet.from_params(params,
                          constants.OUTPUT_UNIVERSE,
                          check_order=False,
                          check_coverage=False)
    except ValueError as e:
        raise ConfigError("tuner_file", f"{path}: {e}") from e
    for label, triple in params.items():
        if not all(low <= v <= high for v in triple):
            raise ConfigError(
                "tuner_file",
                f"{path}: {label} {triple} leaves the output universe "
                f"[{low}, {high}]")


def ensure_dir(path: str) -> str:
    os.makedirs(path, exist_ok=True)
    return path
