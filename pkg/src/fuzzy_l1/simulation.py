import logging
import math
from dataclasses import dataclass, replace
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from fuzzy_l1 import constants
from fuzzy_l1.adaptive import (
    ConstantGain,
    GainSource,
    L1State,
    adaptation_step,
    control_step,
    eta_hat,
    implicit_adaptation_step,
    predictor_step,
)
from fuzzy_l1.errors import DivergenceError, IntegrationFault
from fuzzy_l1.fuzzy import FuzzyGainTuner, MFSet
from fuzzy_l1.plant import PlantScenario, PlantState, plant_step

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class TimeGrid:
    t0: float = 0.0
    tf: float = constants.SIM_DURATION
    dt: float = constants.DT

    def __post_init__(self) -> None:
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if not self.tf > self.t0:
            raise ValueError(
                f"tf must exceed t0, got t0={self.t0}, tf={self.tf}")
        ratio = (self.tf - self.t0) / self.dt
        if abs(ratio - round(ratio)) > 1e-9 * max(1.0, ratio):
            raise ValueError(
                f"Duration {self.tf - self.t0} is not a whole number of "
                f"dt={self.dt} steps")

    @property
    def steps(self) -> int:
        return int(round((self.tf - self.t0) / self.dt))

    def times(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(self.steps + 1)

    def time(self, k: int) -> float:
        return self.t0 + k * self.dt


@dataclass(frozen=True)
class ReferenceSignal:
    """r(t) = amplitude cos(frequency t), or a constant step of amplitude."""

    kind: str = "cos"
    amplitude: float = constants.REFERENCE_AMPLITUDE
    frequency: float = constants.REFERENCE_FREQUENCY

    def __post_init__(self) -> None:
        if self.kind not in ("cos", "step"):
            raise ValueError(f"Unknown reference kind {self.kind!r}")

    def __call__(self, t: float) -> float:
        if self.kind == "step":
            return self.amplitude
        return self.amplitude * math.cos(self.frequency * t)


@dataclass(frozen=True)
class StepRecord:
    t: float
    r: float
    y: float
    u: float
    e: float
    k_f: float
    omega_hat: float
    theta_hat: float
    sigma_hat: float
    x: np.ndarray
    x_hat: np.ndarray


@dataclass(frozen=True)
class Trajectory:
    """Column arrays of a rollout; every array has one entry per sample."""

    t: np.ndarray
    r: np.ndarray
    y: np.ndarray
    u: np.ndarray
    e: np.ndarray
    k_f: np.ndarray
    omega_hat: np.ndarray
    theta_hat: np.ndarray
    sigma_hat: np.ndarray
    x: np.ndarray
    x_hat: np.ndarray

    def __len__(self) -> int:
        return int(self.t.shape[0])

    @classmethod
    def from_records(cls, records: Sequence[StepRecord]) -> "Trajectory":
        def column(name: str) -> np.ndarray:
            return np.array([getattr(rec, name) for rec in records],
                            dtype=float)

        def states(name: str) -> np.ndarray:
            if not records:
                return np.zeros((0, 2))
            return np.vstack([getattr(rec, name) for rec in records])

        return cls(t=column("t"),
                   r=column("r"),
                   y=column("y"),
                   u=column("u"),
                   e=column("e"),
                   k_f=column("k_f"),
                   omega_hat=column("omega_hat"),
                   theta_hat=column("theta_hat"),
                   sigma_hat=column("sigma_hat"),
                   x=states("x"),
                   x_hat=states("x_hat"))

    def table(self) -> np.ndarray:
        """Rows in ``TRAJECTORY_COLUMNS`` order."""
        return np.column_stack([
            self.t, self.r, self.y, self.u, self.e, self.k_f, self.omega_hat,
            self.theta_hat, self.sigma_hat, self.x[:, 0], self.x[:, 1]
        ])

    @classmethod
    def from_table(cls, table: np.ndarray) -> "Trajectory":
        """Inverse of :meth:`table`; the predictor state is not stored."""
        table = np.atleast_2d(np.asarray(table, dtype=float))
        cols = {
            name: table[:, i]
            for i, name in enumerate(constants.TRAJECTORY_COLUMNS)
        }
        return cls(t=cols["t"],
                   r=cols["r"],
                   y=cols["y"],
                   u=cols["u"],
                   e=cols["e"],
                   k_f=cols["k_f"],
                   omega_hat=cols["omega_hat"],
                   theta_hat=cols["theta_hat"],
                   sigma_hat=cols["sigma_hat"],
                   x=np.column_stack([cols["x1"], cols["x2"]]),
                   x_hat=np.full((table.shape[0], 2), np.nan))


@dataclass(frozen=True)
class SimulationResult:
    trajectory: Trajectory
    diverged: bool = False
    t_fail: Optional[float] = None

    @property
    def completed(self) -> bool:
        return not self.diverged


def initial_l1_state(scenario: PlantScenario) -> L1State:
    """Controller state at t0: predictor on the plant, integrator at rest."""
    return L1State(x_hat=scenario.initial_state.copy(),
                   u_int=0.0,
                   estimates=scenario.initial_estimates,
                   P=scenario.P,
                   k_g=scenario.k_g,
                   gamma=scenario.adaptation_gain)


def _observe(scenario: PlantScenario, plant: PlantState, l1: L1State,
             gain_source: GainSource, r: float, t: float,
             dt: float) -> Tuple[StepRecord, float, float]:
    y = float(scenario.C @ plant.x)
    e = r - y
    e_rate = 0.0 if l1.e_prev is None else (e - l1.e_prev) / dt
    k_active = gain_source.gain(e, e_rate)
    est = l1.estimates
    record = StepRecord(t=t,
                        r=r,
                        y=y,
                        u=l1.u_int,
                        e=e,
                        k_f=k_active,
                        omega_hat=est.omega,
                        theta_hat=est.theta,
                        sigma_hat=est.sigma,
                        x=plant.x.copy(),
                        x_hat=l1.x_hat.copy())
    return record, e, k_active


def l1_closed_loop_step(
        scenario: PlantScenario, plant: PlantState, l1: L1State,
        gain_source: GainSource, r: float, t: float,
        dt: float) -> Tuple[PlantState, L1State, StepRecord]:
    """One synchronized step of plant, predictor, adaptation and control law.

    The returned record holds the signals at ``t``; plant and controller
    states are advanced to ``t + dt``. The plant moves first under the held
    control signal. With the ``implicit`` adaptation scheme the estimates
    and the predictor are then solved against the plant state at ``t + dt``
    and the control law integrates with the new estimates. The ``explicit``
    scheme holds everything measured at ``t`` over the step.

    Raises:
        DivergenceError: If the plant state leaves the detector envelope.
    """
    record, e, k_active = _observe(scenario, plant, l1, gain_source, r, t, dt)
    x = plant.x
    u = l1.u_int
    est = l1.estimates

    next_plant, _ = plant_step(scenario, plant, u, t, dt)
    if scenario.adaptation_scheme == "implicit":
        next_est, next_x_hat = implicit_adaptation_step(
            est, l1.x_hat, x, next_plant.x, u, scenario.A_m, l1.P,
            scenario.B, l1.gamma, scenario.bounds, dt)
        eta = eta_hat(next_est, next_plant.x, u)
        input_gain = next_est.omega
    else:
        next_est = adaptation_step(est, l1.x_hat - x, x, u, l1.P, scenario.B,
                                   l1.gamma, scenario.bounds, dt)
        next_x_hat = predictor_step(l1.x_hat, x, u, est, scenario.A_m,
                                    scenario.B, dt)
        eta = eta_hat(est, x, u)
        input_gain = est.omega
    next_u, _ = control_step(u,
                             eta,
                             r,
                             l1.k_g,
                             k_active,
                             dt,
                             input_gain=input_gain)
    next_l1 = replace(l1,
                      x_hat=next_x_hat,
                      u_int=next_u,
                      estimates=next_est,
                      e_prev=e)
    return next_plant, next_l1, record


def simulate(scenario: PlantScenario,
             gain_source: GainSource,
             grid: TimeGrid,
             reference: Optional[ReferenceSignal] = None) -> SimulationResult:
    """Run the closed loop over ``grid``.

    One record is kept per grid sample, so a completed run has
    ``grid.steps + 1`` rows. With ``scenario.substeps > 1`` each grid step is
    integrated in that many equal closed-loop steps. A divergence ends the
    run early and is reported on the result instead of raised.
    """
    reference = reference or ReferenceSignal()
    substeps = scenario.substeps
    h = grid.dt / substeps
    plant = PlantState.initial(scenario)
    l1 = initial_l1_state(scenario)
    records: List[StepRecord] = []
    logger.debug(f"Simulating {scenario.name} for {grid.steps} steps "
                 f"(dt={grid.dt}, substeps={substeps})")
    t = grid.t0
    try:
        for k in range(grid.steps):
            for j in range(substeps):
                t = grid.time(k) + j * h
                plant, l1, record = l1_closed_loop_step(
                    scenario, plant, l1, gain_source, reference(t), t, h)
                if j == 0:
                    records.append(record)
        t = grid.tf
        final, _, _ = _observe(scenario, plant, l1, gain_source,
                               reference(t), t, h)
        records.append(final)
    except (DivergenceError, IntegrationFault) as e:
        logger.info(f"{scenario.name}: {e}")
        return SimulationResult(Trajectory.from_records(records),
                                diverged=True,
                                t_fail=e.t)
    return SimulationResult(Trajectory.from_records(records))


def make_gain_source(
    mode: str,
    scenario: PlantScenario,
    output_params: Optional[Mapping[str, Sequence[float]]] = None,
    input_params: Optional[Mapping[str, Sequence[float]]] = None
) -> GainSource:
    """Gain source for a controller mode.

    Args:
        mode (str): ``constant`` or ``fuzzy``.
        scenario (PlantScenario): Supplies k and the fuzzy input weights.
        output_params (dict, optional): Output MF triples by label. Defaults
            to the decoded midpoint of the constraint box.
        input_params (dict, optional): Input MF triples by label, used for
            both e and de.
    """
    if mode == "constant":
        return ConstantGain(scenario.gain)
    if mode != "fuzzy":
        raise ValueError(f"Unknown controller mode {mode!r}")
    if output_params is None:
        from fuzzy_l1.pso import decode
        output_params, _ = decode(constants.DEFAULT_PARTICLE)
    kwargs: Dict[str, object] = {}
    if input_params is not None:
        input_set = MFSet.from_params(input_params, constants.INPUT_UNIVERSE)
        kwargs.update(e_set=input_set, de_set=input_set)
    return FuzzyGainTuner.from_output_params(output_params,
                                             k_p=scenario.k_p,
                                             k_d=scenario.k_d,
                                             k_e=scenario.k_e,
                                             k_const=scenario.gain,
                                             **kwargs)


def summarize(result: SimulationResult) -> Dict[str, object]:
    """Comparison metrics over the analysis windows.

    rms_error is taken over t >= RMS_WINDOW_START, max_abs_u over
    t >= CONTROL_WINDOW_START and max_abs_e over the whole record. A
    completed run that ends before a window opens is measured over its
    whole record instead; the window starts actually used are reported.
    """
    traj = result.trajectory

    def window(values: np.ndarray,
               start: float) -> Tuple[np.ndarray, Optional[float]]:
        if not len(traj):
            return values, None
        if result.completed and traj.t[-1] < start - 1e-9:
            start = float(traj.t[0])
        selected = values[traj.t >= start - 1e-9]
        return selected, (start if selected.size else None)

    errors, rms_start = window(traj.e, constants.RMS_WINDOW_START)
    controls, control_start = window(traj.u, constants.CONTROL_WINDOW_START)
    return {
        "rms_error":
        float(np.sqrt(np.mean(errors**2))) if errors.size else None,
        "max_abs_u":
        float(np.max(np.abs(controls))) if controls.size else None,
        "max_abs_e": float(np.max(np.abs(traj.e))) if len(traj) else None,
        "diverged": result.diverged,
        "t_fail": result.t_fail,
        "rms_window_start": rms_start,
        "control_window_start": control_start,
    }
