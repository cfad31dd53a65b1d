"""Particle swarm search over the free output membership parameters.

Every candidate is scored by a closed-loop rollout of the fuzzy-scheduled
controller. Random draws happen only in the coordinating loop, in particle
order, and fitness values are gathered in particle order, so a fixed seed
gives the same swarm whatever the number of workers.
"""
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import partial
from typing import (
    Callable,
    Dict,
    List,
    Mapping,
    Optional,
    Sequence,
    Tuple,
    Union,
)

import numpy as np

from fuzzy_l1 import constants
from fuzzy_l1.plant import PlantScenario
from fuzzy_l1.simulation import (
    ReferenceSignal,
    TimeGrid,
    Trajectory,
    make_gain_source,
    simulate,
)

logger = logging.getLogger(__name__)

Objective = Callable[[np.ndarray], float]
MFParams = Dict[str, Tuple[float, float, float]]

INERTIA_SCHEDULES = ("exponential", "constant")


@dataclass(frozen=True, eq=False)
class ParticleEncoding:
    """Box constraints of the nine free output parameters."""

    lower: np.ndarray = field(
        default_factory=lambda: constants.PARTICLE_LOWER.copy())
    upper: np.ndarray = field(
        default_factory=lambda: constants.PARTICLE_UPPER.copy())
    fields: Tuple[str, ...] = tuple(constants.PARTICLE_FIELDS)

    def __post_init__(self) -> None:
        lower = np.asarray(self.lower, dtype=float)
        upper = np.asarray(self.upper, dtype=float)
        if lower.shape != (len(self.fields), ) or upper.shape != lower.shape:
            raise ValueError(
                f"Bounds must have {len(self.fields)} entries each")
        if np.any(lower > upper):
            raise ValueError("Every lower bound must not exceed its upper")
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)

    @property
    def dimension(self) -> int:
        return len(self.fields)

    @property
    def width(self) -> np.ndarray:
        return self.upper - self.lower

    def clamp(self, p: np.ndarray) -> np.ndarray:
        return np.minimum(np.maximum(p, self.lower), self.upper)

    def contains(self, p: np.ndarray) -> bool:
        return bool(np.all(p >= self.lower) and np.all(p <= self.upper))


def _widen(triple: Tuple[float, float, float]) -> Tuple[float, float, float]:
    """Give a zero-support triple MIN_SUPPORT of width inside the universe."""
    low, center, high = triple
    floor, ceiling = constants.OUTPUT_UNIVERSE
    if high - low >= constants.MIN_SUPPORT:
        return triple
    low = max(floor, high - constants.MIN_SUPPORT)
    high = min(ceiling, low + constants.MIN_SUPPORT)
    return (low, min(max(center, low), high), high)


def decode(p: Sequence[float]) -> Tuple[MFParams, bool]:
    """Expand the nine free values into the five output triangles.

    Tied breakpoints: VL_h = VL_c, S_h = VL_l, VS_h = L_l, Z_h = S_l, with
    Z_l = Z_c = 0 pinned. A triple that comes out of order is sorted, and
    one whose support collapses (VL at VL_l = VL_c) is opened to
    MIN_SUPPORT on its left.

    Returns:
        Tuple[dict, bool]: (l, c, h) by label, and whether any triple was
        repaired.
    """
    vl_l, vl_c, l_l, l_c, l_h, s_l, s_c, vs_l, vs_c = (float(v) for v in p)
    raw = {
        "Z": (0.0, 0.0, s_l),
        "VS": (vs_l, vs_c, l_l),
        "S": (s_l, s_c, vl_l),
        "L": (l_l, l_c, l_h),
        "VL": (vl_l, vl_c, vl_c),
    }
    params: MFParams = {}
    repaired = False
    for label in constants.LABELS:
        triple = raw[label]
        ordered = tuple(sorted(triple))
        fixed = _widen((ordered[0], ordered[1], ordered[2]))
        if fixed != triple:
            repaired = True
            logger.debug(f"Repaired {label} breakpoints {triple} -> {fixed}")
        params[label] = fixed
    return params, repaired


def encode(params: Mapping[str, Sequence[float]]) -> np.ndarray:
    """Read the nine free values back out of decoded output triangles."""
    return np.array([
        params["VL"][0], params["VL"][1], params["L"][0], params["L"][1],
        params["L"][2], params["S"][0], params["S"][1], params["VS"][0],
        params["VS"][1]
    ],
                    dtype=float)


@dataclass(frozen=True)
class SwarmConfig:
    """Swarm settings.

    ``lam`` is carried through to the tuning record and has no effect on the
    search.
    """

    population: int = constants.SWARM_POPULATION
    generations: int = constants.SWARM_GENERATIONS
    c1: float = constants.SWARM_C1
    c2: float = constants.SWARM_C2
    inertia: float = constants.SWARM_INERTIA
    inertia_schedule: str = "exponential"
    lam: float = constants.SWARM_LAMBDA
    seed: int = 0
    gamma1: float = constants.OBJECTIVE_GAMMA1
    gamma2: float = constants.OBJECTIVE_GAMMA2
    per_dimension_random: bool = False
    workers: int = 1

    def __post_init__(self) -> None:
        if self.population < 2:
            raise ValueError(
                f"population must be >= 2, got {self.population}")
        if self.generations < 1:
            raise ValueError(
                f"generations must be >= 1, got {self.generations}")
        if self.c1 < 0 or self.c2 < 0:
            raise ValueError("c1 and c2 must be non-negative")
        if not 0 < self.inertia <= 1:
            raise ValueError(
                f"inertia must lie in (0, 1], got {self.inertia}")
        if self.inertia_schedule not in INERTIA_SCHEDULES:
            raise ValueError(
                f"Unknown inertia schedule {self.inertia_schedule!r}")
        if self.gamma1 < 0 or self.gamma2 < 0:
            raise ValueError("Objective weights must be non-negative")
        if self.workers < 1:
            raise ValueError(f"workers must be >= 1, got {self.workers}")

    def inertia_at(self, generation: int) -> float:
        if self.inertia_schedule == "constant":
            return self.inertia
        return float(self.inertia**generation)


@dataclass
class SwarmState:
    positions: np.ndarray
    velocities: np.ndarray
    best_positions: np.ndarray
    best_values: np.ndarray
    global_best: np.ndarray
    global_best_value: float = float("inf")
    generation: int = 0
    history: List[float] = field(default_factory=list)

    @classmethod
    def initial(cls, config: SwarmConfig, encoding: ParticleEncoding,
                rng: np.random.Generator) -> "SwarmState":
        """Uniform positions in the box, small random velocities."""
        shape = (config.population, encoding.dimension)
        positions = encoding.lower + rng.uniform(size=shape) * encoding.width
        spread = 0.1 * encoding.width
        velocities = rng.uniform(-spread, spread, size=shape)
        return cls(positions=positions,
                   velocities=velocities,
                   best_positions=positions.copy(),
                   best_values=np.full(config.population, np.inf),
                   global_best=positions[0].copy())

    def record(self, values: np.ndarray) -> None:
        """Fold one generation of fitness values into the bests."""
        improved = values < self.best_values
        self.best_values = np.where(improved, values, self.best_values)
        self.best_positions[improved] = self.positions[improved]
        index = int(np.argmin(self.best_values))
        self.global_best = self.best_positions[index].copy()
        self.global_best_value = float(self.best_values[index])
        self.history.append(self.global_best_value)


def velocity_update(v: np.ndarray,
                    x: np.ndarray,
                    x_local_best: np.ndarray,
                    x_global_best: np.ndarray,
                    inertia: float,
                    c1: float,
                    c2: float,
                    r1: Union[float, np.ndarray],
                    r2: Union[float, np.ndarray],
                    v_max: Optional[np.ndarray] = None) -> np.ndarray:
    v_next = (inertia * v + c1 * r1 * (x_local_best - x) + c2 * r2 *
              (x_global_best - x))
    if v_max is not None:
        v_next = np.clip(v_next, -v_max, v_max)
    return v_next


def position_update(x: np.ndarray,
                    v: np.ndarray,
                    encoding: Optional[ParticleEncoding] = None
                    ) -> np.ndarray:
    encoding = encoding or ParticleEncoding()
    return encoding.clamp(x + v)


def tracking_cost(trajectory: Trajectory, gamma1: float,
                  gamma2: float) -> float:
    """Sum of gamma1 e^2 + gamma2 u^2 over every recorded sample."""
    return float(
        np.sum(gamma1 * trajectory.e**2 + gamma2 * trajectory.u**2))


def divergence_penalty(grid: TimeGrid, t_fail: Optional[float]) -> float:
    t_fail = grid.t0 if t_fail is None else t_fail
    return constants.DIVERGENCE_PENALTY + (grid.tf - t_fail)


def evaluate_objective(
        p: np.ndarray,
        scenario: PlantScenario,
        grid: TimeGrid,
        gamma1: float = constants.OBJECTIVE_GAMMA1,
        gamma2: float = constants.OBJECTIVE_GAMMA2,
        reference: Optional[ReferenceSignal] = None,
        input_params: Optional[Mapping[str, Sequence[float]]] = None
) -> float:
    """Score one particle by a fuzzy-mode rollout.

    Diverging rollouts score DIVERGENCE_PENALTY plus the time left on the
    grid, which ranks them below every completing rollout. A particle whose
    output sets are still rejected after decoding scores the full penalty.
    """
    params, _ = decode(p)
    try:
        gain_source = make_gain_source("fuzzy",
                                       scenario,
                                       output_params=params,
                                       input_params=input_params)
    except ValueError as e:
        logger.warning(f"Particle {np.round(p, 4).tolist()} rejected: {e}")
        return divergence_penalty(grid, None)
    result = simulate(scenario, gain_source, grid, reference)
    if result.diverged:
        value = divergence_penalty(grid, result.t_fail)
    else:
        value = tracking_cost(result.trajectory, gamma1, gamma2)
    logger.debug(f"Particle {np.round(p, 4).tolist()} -> {value:.6g}")
    return value


@dataclass(frozen=True)
class PSOResult:
    best: np.ndarray
    best_value: float
    history: List[float]
    decoded: MFParams
    repaired: bool
    state: SwarmState = field(repr=False)


def _evaluate(objective: Objective, positions: np.ndarray,
              executor: Optional[ProcessPoolExecutor]) -> np.ndarray:
    if executor is None:
        values = [objective(p) for p in positions]
    else:
        values = list(executor.map(objective, list(positions)))
    return np.asarray(values, dtype=float)


def run_pso(config: SwarmConfig,
            scenario: Optional[PlantScenario] = None,
            grid: Optional[TimeGrid] = None,
            objective: Optional[Objective] = None,
            encoding: Optional[ParticleEncoding] = None,
            reference: Optional[ReferenceSignal] = None,
            input_params: Optional[Mapping[str, Sequence[float]]] = None
            ) -> PSOResult:
    """Minimize the rollout objective over the output MF box.

    Args:
        config (SwarmConfig): Swarm settings, seed included.
        scenario (PlantScenario, optional): Plant used by the default
            objective.
        grid (TimeGrid, optional): Rollout grid for the default objective.
        objective (Callable, optional): Replaces the rollout objective. It
            must be picklable when ``config.workers > 1``.
        encoding (ParticleEncoding, optional): Search box.

    Returns:
        PSOResult: Best particle, its value, one history entry per
        generation, and the decoded output parameters.
    """
    encoding = encoding or ParticleEncoding()
    tuning_grid = TimeGrid(tf=constants.TUNING_DURATION)
    if objective is None:
        if scenario is None:
            raise ValueError("A scenario is needed for the rollout objective")
        objective = partial(evaluate_objective,
                            scenario=scenario,
                            grid=grid or tuning_grid,
                            gamma1=config.gamma1,
                            gamma2=config.gamma2,
                            reference=reference,
                            input_params=input_params)
    rng = np.random.default_rng(config.seed)
    state = SwarmState.initial(config, encoding, rng)
    v_max = encoding.width
    logger.info(f"Swarm of {config.population} particles, "
                f"{config.generations} generations, seed {config.seed}")

    draw = (encoding.dimension, ) if config.per_dimension_random else None
    executor = (ProcessPoolExecutor(max_workers=config.workers)
                if config.workers > 1 else None)
    try:
        for g in range(config.generations):
            state.generation = g
            values = _evaluate(objective, state.positions, executor)
            state.record(values)
            logger.info(f"Generation {g + 1}/{config.generations}: "
                        f"best {state.global_best_value:.6g}")
            if g == config.generations - 1:
                break
            inertia = config.inertia_at(g)
            for i in range(config.population):
                r1 = rng.uniform(size=draw)
                r2 = rng.uniform(size=draw)
                state.velocities[i] = velocity_update(
                    state.velocities[i], state.positions[i],
                    state.best_positions[i], state.global_best, inertia,
                    config.c1, config.c2, r1, r2, v_max)
                state.positions[i] = position_update(state.positions[i],
                                                     state.velocities[i],
                                                     encoding)
            assert all(encoding.contains(p) for p in state.positions)
    finally:
        if executor is not None:
            executor.shutdown()

    decoded, repaired = decode(state.global_best)
    return PSOResult(best=state.global_best.copy(),
                     best_value=state.global_best_value,
                     history=list(state.history),
                     decoded=decoded,
                     repaired=repaired,
                     state=state)


def decode_repair_rate(samples: int, seed: int = 0) -> float:
    """Fraction of uniform in-box particles whose decoding needs a repair."""
    encoding = ParticleEncoding()
    rng = np.random.default_rng(seed)
    points = encoding.lower + rng.uniform(
        size=(samples, encoding.dimension)) * encoding.width
    rate = float(np.mean([decode(p)[1] for p in points]))
    logger.info(f"Decode repair rate over {samples} particles: {rate:.4f}")
    return rate
