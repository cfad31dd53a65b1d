import json
import logging
import os
import re
from dataclasses import dataclass, field
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple

from fuzzy_l1 import constants, utils
from fuzzy_l1.adaptive import AdaptiveEstimates, ProjectionBounds
from fuzzy_l1.errors import ConfigError
from fuzzy_l1.fuzzy import MFSet
from fuzzy_l1.plant import PlantScenario, actuator_model, benchmark_scenario
from fuzzy_l1.pso import SwarmConfig
from fuzzy_l1.simulation import ReferenceSignal, TimeGrid

logger = logging.getLogger(__name__)

TOP_LEVEL_KEYS = ("scenario", "mode", "duration", "dt", "reference",
                  "out_dir", "tuner_file", "seed", "swarm", "overrides")
REFERENCE_KEYS = ("kind", "amplitude", "frequency")
SWARM_KEYS = ("population", "generations", "c1", "c2", "inertia",
              "inertia_schedule", "lambda", "per_dimension_random", "gamma1",
              "gamma2", "workers", "duration")
OVERRIDE_KEYS = ("gain", "adaptation_gain", "poles", "output_matrix",
                 "initial_state", "initial_estimates", "omega_bounds",
                 "theta_bound", "sigma_bound", "projection_margin", "k_p",
                 "k_d", "k_e", "divergence_threshold", "substeps",
                 "actuator_pole", "input_mf", "adaptation_scheme")


@dataclass(frozen=True)
class RunConfig:
    """One experiment as described by a JSON config file."""

    scenario: str
    mode: str = "fuzzy"
    duration: float = constants.SIM_DURATION
    dt: float = constants.DT
    reference: ReferenceSignal = field(default_factory=ReferenceSignal)
    out_dir: str = "."
    tuner_file: Optional[str] = None
    seed: int = 0
    swarm: SwarmConfig = field(default_factory=SwarmConfig)
    tuning_duration: float = constants.TUNING_DURATION
    overrides: Mapping[str, Any] = field(default_factory=dict)

    def grid(self) -> TimeGrid:
        return TimeGrid(0.0, self.duration, self.dt)

    def tuning_grid(self) -> TimeGrid:
        return TimeGrid(0.0, self.tuning_duration, self.dt)

    def build_scenario(self, case_id: Optional[str] = None) -> PlantScenario:
        """Benchmark scenario with the configured overrides applied.

        Raises:
            ConfigError: If an override is rejected by the scenario.
        """
        try:
            kwargs = scenario_overrides(self.overrides)
            return benchmark_scenario(case_id or self.scenario, **kwargs)
        except ValueError as e:
            raise ConfigError("overrides", str(e)) from e

    def input_params(self) -> Optional[Dict[str, Tuple[float, float, float]]]:
        input_mf = self.overrides.get("input_mf")
        if input_mf is None:
            return None
        return {
            label: (float(v[0]), float(v[1]), float(v[2]))
            for label, v in input_mf.items()
        }


class _Source:
    """Raw config text, used to point errors at the line of a key."""
    def __init__(self, text: str) -> None:
        self.text = text

    def line_of(self, key: str) -> Optional[int]:
        name = key.rsplit(".", 1)[-1]
        match = re.search(r'"' + re.escape(name) + r'"\s*:', self.text)
        if match is None:
            return None
        return self.text.count("\n", 0, match.start()) + 1

    def error(self, key: str, message: str) -> ConfigError:
        return ConfigError(key, message, self.line_of(key))


def _check_keys(source: _Source, data: Any, allowed: Sequence[str],
                prefix: str) -> Dict[str, Any]:
    if not isinstance(data, dict):
        raise source.error(prefix or "config", "expected a JSON object")
    for key in data:
        if key not in allowed:
            dotted = f"{prefix}.{key}" if prefix else key
            raise source.error(dotted, "unknown key")
    return data


def _number(source: _Source, key: str, value: Any) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise source.error(key, f"expected a number, got {value!r}")
    return float(value)


def _positive(source: _Source, key: str, value: Any) -> float:
    number = _number(source, key, value)
    if number <= 0:
        raise source.error(key, f"must be positive, got {value!r}")
    return number


def _integer(source: _Source, key: str, value: Any) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise source.error(key, f"expected an integer, got {value!r}")
    return value


def _choice(source: _Source, key: str, value: Any,
            choices: Sequence[str]) -> str:
    if value not in choices:
        raise source.error(
            key, f"expected one of {', '.join(choices)}, got {value!r}")
    return str(value)


def _vector(source: _Source, key: str, value: Any,
            size: int) -> List[float]:
    if not isinstance(value, list) or len(value) != size:
        raise source.error(key, f"expected a list of {size} numbers")
    return [_number(source, key, v) for v in value]


def _parse_reference(source: _Source, data: Any) -> ReferenceSignal:
    data = _check_keys(source, data, REFERENCE_KEYS, "reference")
    kind = _choice(source, "reference.kind", data.get("kind", "cos"),
                   ("cos", "step"))
    amplitude = _number(source, "reference.amplitude",
                        data.get("amplitude", constants.REFERENCE_AMPLITUDE))
    frequency = _number(source, "reference.frequency",
                        data.get("frequency", constants.REFERENCE_FREQUENCY))
    return ReferenceSignal(kind, amplitude, frequency)


def _parse_swarm(source: _Source, data: Any,
                 seed: int) -> Tuple[SwarmConfig, float]:
    data = _check_keys(source, data, SWARM_KEYS, "swarm")
    population = _integer(source, "swarm.population",
                          data.get("population", constants.SWARM_POPULATION))
    if population < 2:
        raise source.error("swarm.population", "must be at least 2")
    generations = _integer(
        source, "swarm.generations",
        data.get("generations", constants.SWARM_GENERATIONS))
    if generations < 1:
        raise source.error("swarm.generations", "must be at least 1")
    workers = _integer(source, "swarm.workers", data.get("workers", 1))
    if workers < 1:
        raise source.error("swarm.workers", "must be at least 1")
    per_dimension = data.get("per_dimension_random", False)
    if not isinstance(per_dimension, bool):
        raise source.error("swarm.per_dimension_random",
                           "expected true or false")
    try:
        swarm = SwarmConfig(
            population=population,
            generations=generations,
            c1=_number(source, "swarm.c1", data.get("c1",
                                                    constants.SWARM_C1)),
            c2=_number(source, "swarm.c2", data.get("c2",
                                                    constants.SWARM_C2)),
            inertia=_number(source, "swarm.inertia",
                            data.get("inertia", constants.SWARM_INERTIA)),
            inertia_schedule=_choice(
                source, "swarm.inertia_schedule",
                data.get("inertia_schedule", "exponential"),
                ("exponential", "constant")),
            lam=_number(source, "swarm.lambda",
                        data.get("lambda", constants.SWARM_LAMBDA)),
            seed=seed,
            gamma1=_number(source, "swarm.gamma1",
                           data.get("gamma1", constants.OBJECTIVE_GAMMA1)),
            gamma2=_number(source, "swarm.gamma2",
                           data.get("gamma2", constants.OBJECTIVE_GAMMA2)),
            per_dimension_random=per_dimension,
            workers=workers,
        )
    except ValueError as e:
        raise source.error("swarm", str(e)) from e
    duration = _positive(source, "swarm.duration",
                         data.get("duration", constants.TUNING_DURATION))
    return swarm, duration


def _parse_overrides(source: _Source, data: Any) -> Dict[str, Any]:
    data = _check_keys(source, data, OVERRIDE_KEYS, "overrides")
    parsed: Dict[str, Any] = {}
    for key, value in data.items():
        dotted = f"overrides.{key}"
        if key in ("gain", "adaptation_gain", "theta_bound", "sigma_bound",
                   "projection_margin", "k_p", "k_d", "k_e",
                   "divergence_threshold"):
            parsed[key] = _positive(source, dotted, value)
        elif key == "substeps":
            parsed[key] = _integer(source, dotted, value)
            if parsed[key] < 1:
                raise source.error(dotted, "must be at least 1")
        elif key == "adaptation_scheme":
            parsed[key] = _choice(source, dotted, value,
                                  constants.ADAPTATION_SCHEMES)
        elif key == "actuator_pole":
            parsed[key] = (None if value is None else _positive(
                source, dotted, value))
        elif key == "poles":
            if not isinstance(value, list) or len(value) != 2:
                raise source.error(dotted,
                                   "expected two [real, imag] pairs")
            parsed[key] = [_vector(source, dotted, p, 2) for p in value]
        elif key in ("output_matrix", "initial_state"):
            parsed[key] = _vector(source, dotted, value, 2)
        elif key == "initial_estimates":
            parsed[key] = _vector(source, dotted, value, 3)
        elif key == "omega_bounds":
            parsed[key] = _vector(source, dotted, value, 2)
        elif key == "input_mf":
            mf = _check_keys(source, value, constants.LABELS, dotted)
            if set(mf) != set(constants.LABELS):
                raise source.error(
                    dotted, f"expected labels {', '.join(constants.LABELS)}")
            parsed[key] = {
                label: _vector(source, f"{dotted}.{label}", mf[label], 3)
                for label in constants.LABELS
            }
    return parsed


def scenario_overrides(overrides: Mapping[str, Any]) -> Dict[str, Any]:
    """Translate config overrides into ``benchmark_scenario`` keywords."""
    kwargs: Dict[str, Any] = {}
    for key in ("gain", "adaptation_gain", "k_p", "k_d", "k_e",
                "divergence_threshold", "substeps", "adaptation_scheme"):
        if key in overrides:
            kwargs[key] = overrides[key]
    if "poles" in overrides:
        kwargs["poles"] = tuple(complex(re_, im) for re_, im in
                                overrides["poles"])
    if "output_matrix" in overrides:
        kwargs["C"] = list(overrides["output_matrix"])
    if "initial_state" in overrides:
        kwargs["initial_state"] = list(overrides["initial_state"])
    if "initial_estimates" in overrides:
        kwargs["initial_estimates"] = AdaptiveEstimates(
            *overrides["initial_estimates"])
    if any(k in overrides for k in ("omega_bounds", "theta_bound",
                                    "sigma_bound", "projection_margin")):
        omega = overrides.get("omega_bounds", constants.OMEGA_BOUNDS)
        kwargs["bounds"] = ProjectionBounds(
            omega[0], omega[1],
            overrides.get("theta_bound", constants.THETA_BOUND),
            overrides.get("sigma_bound", constants.SIGMA_BOUND),
            overrides.get("projection_margin", constants.PROJECTION_MARGIN))
    if "actuator_pole" in overrides:
        pole = overrides["actuator_pole"]
        kwargs["actuator"] = None if pole is None else actuator_model(pole)
    return kwargs


def parse_config(text: str, base_dir: str = ".") -> RunConfig:
    """Parse and validate config text.

    Args:
        text (str): JSON document.
        base_dir (str): Directory relative ``tuner_file`` paths resolve
            against.

    Returns:
        RunConfig: The validated configuration.

    Raises:
        ConfigError: Naming the offending key, and its line when known.
    """
    source = _Source(text)
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError("config", e.msg, e.lineno) from e
    data = _check_keys(source, data, TOP_LEVEL_KEYS, "")
    if "scenario" not in data:
        raise ConfigError("scenario", "required key is missing")
    scenario = _choice(source, "scenario", data["scenario"],
                       constants.SCENARIO_IDS)
    mode = _choice(source, "mode", data.get("mode", "fuzzy"),
                   constants.CONTROLLER_MODES)
    duration = _positive(source, "duration",
                         data.get("duration", constants.SIM_DURATION))
    dt = _positive(source, "dt", data.get("dt", constants.DT))
    seed = _integer(source, "seed", data.get("seed", 0))
    out_dir = data.get("out_dir", ".")
    if not isinstance(out_dir, str):
        raise source.error("out_dir", "expected a path string")
    tuner_file = data.get("tuner_file")
    if tuner_file is not None:
        if not isinstance(tuner_file, str):
            raise source.error("tuner_file", "expected a path string")
        if not os.path.isabs(tuner_file):
            tuner_file = os.path.join(base_dir, tuner_file)
        if not os.path.exists(tuner_file):
            raise source.error("tuner_file", f"{tuner_file} does not exist")
        try:
            utils.load_tuner_file(tuner_file)
        except ConfigError as e:
            raise source.error("tuner_file", e.message) from e
    reference = _parse_reference(source, data.get("reference", {}))
    swarm, tuning_duration = _parse_swarm(source, data.get("swarm", {}), seed)
    overrides = _parse_overrides(source, data.get("overrides", {}))

    config = RunConfig(scenario=scenario,
                       mode=mode,
                       duration=duration,
                       dt=dt,
                       reference=reference,
                       out_dir=out_dir,
                       tuner_file=tuner_file,
                       seed=seed,
                       swarm=swarm,
                       tuning_duration=tuning_duration,
                       overrides=overrides)
    for key, make_grid in (("duration", config.grid),
                           ("swarm.duration", config.tuning_grid)):
        try:
            make_grid()
        except ValueError as e:
            raise source.error(key, str(e)) from e
    try:
        config.build_scenario()
    except ConfigError as e:
        raise source.error("overrides", str(e.__cause__ or e)) from e
    input_params = config.input_params()
    if input_params is not None:
        try:
            MFSet.from_params(input_params, constants.INPUT_UNIVERSE)
        except ValueError as e:
            raise source.error("overrides.input_mf", str(e)) from e
    return config


def load_config(path: str) -> RunConfig:
    """Read a RunConfig from a JSON file.

    Raises:
        ConfigError: If the file is missing or invalid.
    """
    if not os.path.exists(path):
        raise ConfigError("config", f"{path} does not exist")
    with open(path) as f:
        text = f.read()
    config = parse_config(text, os.path.dirname(os.path.abspath(path)))
    logger.debug(f"Loaded config {path}: {config.scenario}/{config.mode}")
    return config
