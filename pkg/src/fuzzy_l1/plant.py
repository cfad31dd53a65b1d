import logging
import math
from dataclasses import dataclass, field, replace
from typing import Any, Optional, Tuple

import numpy as np

from fuzzy_l1 import constants
from fuzzy_l1.adaptive import AdaptiveEstimates, ProjectionBounds
from fuzzy_l1.errors import DivergenceError, IntegrationFault
from fuzzy_l1.linalg import (
    StateSpaceModel,
    feedforward_gain,
    lyapunov_solve,
    place_poles,
    realize_siso_tf,
    rk4_step,
)

logger = logging.getLogger(__name__)

NONLINEARITIES = ("case1", "case2", "linear")


def f_case1(x: np.ndarray) -> float:
    x1, x2 = float(x[0]), float(x[1])
    return (2.0 * x1**2 + 2.0 * x2**2 + x1 * math.sin(x1**2) +
            x2 * math.cos(x2**2))


@dataclass(frozen=True)
class Case2Coefficients:
    """Values of the time-varying case2 envelopes at one instant.

    f = x1_sq x1^2 + x2_sq x2^2 + x1_sin x1 sin(x1^2) + bias
        + x2_cos x2 cos(x2^2 + x2_phase) + z_sq z^2
    """

    x1_sq: float
    x2_sq: float
    x1_sin: float
    bias: float
    x2_cos: float
    x2_phase: float
    z_sq: float

    @classmethod
    def at(cls, t: float) -> "Case2Coefficients":
        # The cosine term is read as 0.5 x2 cos(x2^2 + 0.5 cos(0.3 t)).
        return cls(x1_sq=math.sin(0.4 * t) + 1.0,
                   x2_sq=2.0 * math.cos(0.35 * t) + 0.5,
                   x1_sin=math.sin(0.3 * t) + 0.3,
                   bias=math.sin(0.35 * t) * math.cos(0.4 * t),
                   x2_cos=0.5,
                   x2_phase=0.5 * math.cos(0.3 * t),
                   z_sq=math.sin(0.3 * t) * math.cos(0.4 * t))

    @classmethod
    def case1(cls) -> "Case2Coefficients":
        """The constant envelopes under which case2 is case1."""
        return cls(x1_sq=2.0,
                   x2_sq=2.0,
                   x1_sin=1.0,
                   bias=0.0,
                   x2_cos=1.0,
                   x2_phase=0.0,
                   z_sq=0.0)


def case2_terms(x: np.ndarray, z: float,
                coefficients: Case2Coefficients) -> float:
    x1, x2 = float(x[0]), float(x[1])
    c = coefficients
    return (c.x1_sq * x1**2 + c.x2_sq * x2**2 +
            c.x1_sin * x1 * math.sin(x1**2) + c.bias +
            c.x2_cos * x2 * math.cos(x2**2 + c.x2_phase) + c.z_sq * z**2)


def f_case2(x: np.ndarray, z: float, t: float) -> float:
    """Time-varying nonlinearity with the unmodeled-dynamics output z."""
    return case2_terms(x, z, Case2Coefficients.at(t))


def disturbance_input(x: np.ndarray, t: float) -> float:
    """v(t) = x1 sin(0.2 t) + x2, the signal driving z(s)."""
    return float(x[0]) * math.sin(0.2 * t) + float(x[1])


@dataclass(frozen=True, eq=False)
class PlantScenario:
    """One benchmark plant together with the controller constants used on it.

    The plant is x' = A_m x + B (w_out + f(x, z, t)), y = C x, where
    A_m = A - B K places ``poles`` and w_out is the output of the actuator lag
    driven by u (or ``input_gain * u`` when ``actuator`` is None).
    """

    name: str
    nonlinearity: str
    poles: Tuple[complex, complex]
    A: np.ndarray = field(default_factory=lambda: constants.BASE_A.copy())
    B: np.ndarray = field(default_factory=lambda: constants.BASE_B.copy())
    C: np.ndarray = field(
        default_factory=lambda: constants.DEFAULT_OUTPUT_MATRIX.copy())
    actuator: Optional[StateSpaceModel] = None
    input_gain: float = 1.0
    disturbance: Optional[StateSpaceModel] = None
    gain: float = constants.CONSTANT_GAIN
    adaptation_gain: float = constants.ADAPTATION_GAIN
    Q: np.ndarray = field(default_factory=lambda: constants.Q_MATRIX.copy())
    bounds: ProjectionBounds = field(default_factory=lambda: ProjectionBounds(
        *constants.OMEGA_BOUNDS, constants.THETA_BOUND, constants.
        SIGMA_BOUND, constants.PROJECTION_MARGIN))
    initial_estimates: AdaptiveEstimates = AdaptiveEstimates(
        *constants.INITIAL_ESTIMATES)
    initial_state: np.ndarray = field(default_factory=lambda: np.zeros(2))
    k_p: float = constants.K_P
    k_d: float = constants.K_D
    k_e: float = constants.K_E
    divergence_threshold: float = constants.DIVERGENCE_THRESHOLD
    substeps: int = 1
    adaptation_scheme: str = "implicit"
    K: np.ndarray = field(init=False, repr=False)
    A_m: np.ndarray = field(init=False, repr=False)
    P: np.ndarray = field(init=False, repr=False)
    k_g: float = field(init=False)

    def __post_init__(self) -> None:
        if self.nonlinearity not in NONLINEARITIES:
            raise ValueError(f"Unknown nonlinearity {self.nonlinearity!r}")
        if self.gain <= 0:
            raise ValueError(f"Feedback gain must be positive, got "
                             f"{self.gain}")
        if self.adaptation_gain <= 0:
            raise ValueError(f"Adaptation gain must be positive, got "
                             f"{self.adaptation_gain}")
        if self.substeps < 1:
            raise ValueError(f"substeps must be >= 1, got {self.substeps}")
        if self.adaptation_scheme not in constants.ADAPTATION_SCHEMES:
            raise ValueError(
                f"Unknown adaptation scheme {self.adaptation_scheme!r}")
        for name in ("k_p", "k_d", "k_e"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        for name in ("A", "B", "C", "Q", "initial_state"):
            object.__setattr__(self, name,
                               np.asarray(getattr(self, name), dtype=float))
        K, A_m = place_poles(self.A, self.B, self.poles)
        object.__setattr__(self, "K", K)
        object.__setattr__(self, "A_m", A_m)
        object.__setattr__(self, "P", lyapunov_solve(A_m, self.Q))
        object.__setattr__(self, "k_g", feedforward_gain(A_m, self.B, self.C))

    @property
    def actuator_order(self) -> int:
        return self.actuator.order if self.actuator is not None else 0

    @property
    def disturbance_order(self) -> int:
        return self.disturbance.order if self.disturbance is not None else 0

    def with_overrides(self, **changes: Any) -> "PlantScenario":
        return replace(self, **changes)


@dataclass(frozen=True)
class PlantState:
    x: np.ndarray
    x_act: np.ndarray
    x_dist: np.ndarray

    @classmethod
    def initial(cls, scenario: PlantScenario) -> "PlantState":
        return cls(x=scenario.initial_state.copy(),
                   x_act=np.zeros(scenario.actuator_order),
                   x_dist=np.zeros(scenario.disturbance_order))

    def vector(self) -> np.ndarray:
        return np.concatenate([self.x, self.x_act, self.x_dist])

    @classmethod
    def from_vector(cls, scenario: PlantScenario,
                    values: np.ndarray) -> "PlantState":
        n_act = scenario.actuator_order
        return cls(x=values[:2].copy(),
                   x_act=values[2:2 + n_act].copy(),
                   x_dist=values[2 + n_act:].copy())


def nonlinearity(scenario: PlantScenario, x: np.ndarray, z: float,
                 t: float) -> float:
    if scenario.nonlinearity == "case1":
        return f_case1(x)
    if scenario.nonlinearity == "case2":
        return f_case2(x, z, t)
    return 0.0


def plant_step(scenario: PlantScenario, state: PlantState, u: float, t: float,
               dt: float) -> Tuple[PlantState, float]:
    """Advance plant, actuator lag and disturbance filter by one RK4 step.

    Args:
        scenario (PlantScenario): Plant description.
        state (PlantState): State at time t.
        u (float): Control signal, held over the step.
        t (float): Current time in seconds.
        dt (float): Step length in seconds.

    Returns:
        Tuple[PlantState, float]: State and output y at t + dt.

    Raises:
        DivergenceError: If |x|_inf exceeds the scenario threshold or the
            integration produced non-finite values.
    """
    n_act = scenario.actuator_order
    actuator = scenario.actuator
    disturbance = scenario.disturbance

    def deriv(s: np.ndarray, tau: float) -> np.ndarray:
        x = s[:2]
        if actuator is not None:
            x_act = s[2:2 + n_act]
            w_out = actuator.output(x_act)
            d_act = actuator.derivative(x_act, u)
        else:
            w_out = scenario.input_gain * u
            d_act = s[2:2]
        if disturbance is not None:
            x_dist = s[2 + n_act:]
            z = disturbance.output(x_dist)
            d_dist = disturbance.derivative(x_dist,
                                            disturbance_input(x, tau))
        else:
            z = 0.0
            d_dist = s[2 + n_act:2 + n_act]
        f = nonlinearity(scenario, x, z, tau)
        dx = scenario.A_m @ x + scenario.B * (w_out + f)
        return np.concatenate([dx, d_act, d_dist])

    try:
        values = rk4_step(deriv, state.vector(), t, dt)
    except (IntegrationFault, OverflowError) as e:
        raise DivergenceError(getattr(e, "t", t), math.inf) from e
    new_state = PlantState.from_vector(scenario, values)
    norm = float(np.max(np.abs(new_state.x)))
    if not math.isfinite(norm) or norm > scenario.divergence_threshold:
        raise DivergenceError(t + dt, norm)
    return new_state, float(scenario.C @ new_state.x)


def actuator_model(pole: float = constants.ACTUATOR_POLE) -> StateSpaceModel:
    """Realization of w(s) = pole / (s + pole)."""
    return realize_siso_tf([pole], [1.0, pole])


def disturbance_model() -> StateSpaceModel:
    return realize_siso_tf(constants.DISTURBANCE_NUM,
                           constants.DISTURBANCE_DEN)


def benchmark_scenario(case_id: str, **overrides: Any) -> PlantScenario:
    """Build one of the three benchmark scenarios.

    case1 is the static nonlinearity, case2 adds time-varying uncertainty and
    the unmodeled-dynamics channel z(s), case3 is case2 with the faster
    desired poles.
    """
    if case_id not in constants.SCENARIO_IDS:
        raise ValueError(f"Unknown scenario {case_id!r}, expected one of "
                         f"{', '.join(constants.SCENARIO_IDS)}")
    settings: dict = dict(
        name=case_id,
        nonlinearity="case1" if case_id == "case1" else "case2",
        poles=constants.FAST_POLES
        if case_id == "case3" else constants.NOMINAL_POLES,
        actuator=actuator_model(),
        disturbance=None if case_id == "case1" else disturbance_model(),
    )
    settings.update(overrides)
    logger.debug(f"Building scenario {case_id} with overrides "
                 f"{sorted(overrides)}")
    return PlantScenario(**settings)
