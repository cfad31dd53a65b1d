"""L1 adaptive controller blocks: state predictor, projection-based
adaptation of (omega_hat, theta_hat, sigma_hat) and the filtered control law
u(s) = -k D(s) (eta_hat(s) - k_g r(s)) with D(s) = 1/s.

The feedback gain k is supplied every step by a :class:`GainSource`, so the
constant-gain and the fuzzy-scheduled controllers share all of this code.
"""
import logging
import math
from dataclasses import dataclass
from typing import Optional, Protocol, Tuple

import numpy as np

from fuzzy_l1.linalg import rk4_step

logger = logging.getLogger(__name__)

Interval = Tuple[float, float]


@dataclass(frozen=True)
class ProjectionBounds:
    """Compact sets the projection operator keeps the estimates in.

    ``margin`` is the smooth-projection tolerance: an estimate may enter the
    band between the nominal set and the set inflated by sqrt(1 + margin)
    around its center, never beyond.
    """

    omega_lower: float
    omega_upper: float
    theta_bound: float
    sigma_bound: float
    margin: float = 0.1

    def __post_init__(self) -> None:
        if not 0 < self.omega_lower < self.omega_upper:
            raise ValueError(
                f"Input gain bounds must satisfy 0 < lower < upper, got "
                f"[{self.omega_lower}, {self.omega_upper}]")
        if self.theta_bound <= 0 or self.sigma_bound <= 0:
            raise ValueError("theta_bound and sigma_bound must be positive")
        if not 0 < self.margin <= 0.5:
            raise ValueError(
                f"Projection margin must lie in (0, 0.5], got {self.margin}")
        low, _ = self.inflated(self.omega)
        if low <= 0:
            raise ValueError(
                f"Input gain set inflated by the projection margin reaches "
                f"{low:.4g}; raise the lower bound so it stays positive")

    @property
    def omega(self) -> Interval:
        return (self.omega_lower, self.omega_upper)

    @property
    def theta(self) -> Interval:
        return (-self.theta_bound, self.theta_bound)

    @property
    def sigma(self) -> Interval:
        return (-self.sigma_bound, self.sigma_bound)

    def intervals(self) -> Tuple[Interval, Interval, Interval]:
        return (self.omega, self.theta, self.sigma)

    def inflated(self, bound: Interval) -> Interval:
        center, half_width = _center_radius(bound)
        reach = half_width * math.sqrt(1.0 + self.margin)
        return (center - reach, center + reach)


@dataclass(frozen=True)
class AdaptiveEstimates:
    omega: float
    theta: float
    sigma: float

    def as_array(self) -> np.ndarray:
        return np.array([self.omega, self.theta, self.sigma])

    @classmethod
    def from_array(cls, values: np.ndarray) -> "AdaptiveEstimates":
        return cls(float(values[0]), float(values[1]), float(values[2]))

    def within(self, bounds: ProjectionBounds) -> bool:
        for value, bound in zip(self.as_array(), bounds.intervals()):
            low, high = bounds.inflated(bound)
            if not low <= value <= high:
                return False
        return True


@dataclass(frozen=True)
class L1State:
    """Controller-side state of one rollout."""

    x_hat: np.ndarray
    u_int: float
    estimates: AdaptiveEstimates
    P: np.ndarray
    k_g: float
    gamma: float
    # Previous tracking error, for the backward-difference error rate.
    e_prev: Optional[float] = None


class GainSource(Protocol):
    """Anything that can supply the active feedback gain for one step."""
    def gain(self, e: float, e_rate: float) -> float:
        ...


@dataclass(frozen=True)
class ConstantGain:
    k: float

    def __post_init__(self) -> None:
        if self.k <= 0:
            raise ValueError(f"Feedback gain must be positive, got {self.k}")

    def gain(self, e: float, e_rate: float) -> float:
        return self.k


def _center_radius(bound: Interval) -> Tuple[float, float]:
    low, high = bound
    return (low + high) / 2.0, (high - low) / 2.0


def projection(theta: float, drive: float, bound: Interval,
               margin: float) -> float:
    """Smooth projection of an adaptation drive onto a convex interval.

    The boundary function f(theta) = ((theta - c)^2 - r^2) / (margin r^2) is
    non-positive inside the nominal interval and reaches 1 on the interval
    inflated by sqrt(1 + margin). Outward drives are scaled by 1 - f there.

    Args:
        theta (float): Current estimate.
        drive (float): Raw adaptation drive.
        bound (Tuple[float, float]): Nominal interval (lower, upper).
        margin (float): Smooth-projection tolerance.

    Returns:
        float: The projected drive.
    """
    center, radius = _center_radius(bound)
    offset = theta - center
    f = (offset * offset - radius * radius) / (margin * radius * radius)
    if f <= 0.0 or offset * drive <= 0.0:
        return drive
    return drive * (1.0 - f)


def adaptation_step(est: AdaptiveEstimates, x_tilde: np.ndarray,
                    x: np.ndarray, u: float, P: np.ndarray, b: np.ndarray,
                    gamma: float, bounds: ProjectionBounds,
                    dt: float) -> AdaptiveEstimates:
    """Integrate the projected adaptation laws over one step.

    The drives -x_tilde' P b [u, |x|_inf, 1] are held over the step; the
    projection is re-evaluated at every RK4 stage and the result is clipped
    onto the inflated sets.
    """
    error_gain = float(x_tilde @ P @ b)
    drives = -error_gain * np.array([u, float(np.max(np.abs(x))), 1.0])
    intervals = bounds.intervals()

    def deriv(values: np.ndarray, t: float) -> np.ndarray:
        return gamma * np.array([
            projection(values[i], drives[i], intervals[i], bounds.margin)
            for i in range(3)
        ])

    values = rk4_step(deriv, est.as_array(), 0.0, dt)
    for i, bound in enumerate(intervals):
        low, high = bounds.inflated(bound)
        values[i] = min(max(values[i], low), high)
    return AdaptiveEstimates.from_array(values)


def eta_hat(est: AdaptiveEstimates, x: np.ndarray, u: float) -> float:
    return est.omega * u + est.theta * float(np.max(np.abs(x))) + est.sigma


def predictor_step(x_hat: np.ndarray, x: np.ndarray, u: float,
                   est: AdaptiveEstimates, A_m: np.ndarray, b: np.ndarray,
                   dt: float) -> np.ndarray:
    """Advance the state predictor with (x, u, estimates) held over dt."""
    drive = eta_hat(est, x, u)

    def deriv(xh: np.ndarray, t: float) -> np.ndarray:
        return A_m @ xh + b * drive

    return rk4_step(deriv, x_hat, 0.0, dt)


def implicit_adaptation_step(
        est: AdaptiveEstimates, x_hat: np.ndarray, x: np.ndarray,
        x_next: np.ndarray, u: float, A_m: np.ndarray, P: np.ndarray,
        b: np.ndarray, gamma: float, bounds: ProjectionBounds,
        dt: float) -> Tuple[AdaptiveEstimates, np.ndarray]:
    """Advance the estimates and the predictor together over one step.

    The adaptation laws are taken backward-Euler: the update is driven by the
    prediction error at the end of the step, x_hat(t + dt) - x(t + dt), and
    the new estimates drive the predictor across the step. The regressor
    [u, |x|_inf, 1] is held, so the predictor is affine in the new eta_hat
    and the step reduces to one scalar equation. An estimate that would leave
    its inflated set is held on the edge and the equation is solved again
    over the remaining ones.

    Unlike :func:`adaptation_step` this stays stable for any
    ``gamma * dt``.

    Args:
        est (AdaptiveEstimates): Estimates at t.
        x_hat (np.ndarray): Predictor state at t.
        x (np.ndarray): Measured plant state at t.
        x_next (np.ndarray): Measured plant state at t + dt.
        u (float): Control signal held over the step.
        A_m (np.ndarray): Desired closed-loop matrix.
        P (np.ndarray): Lyapunov solution for A_m.
        b (np.ndarray): Input vector.
        gamma (float): Adaptation gain.
        bounds (ProjectionBounds): Estimate sets.
        dt (float): Step length in seconds.

    Returns:
        Tuple[AdaptiveEstimates, np.ndarray]: Estimates and predictor state
        at t + dt.
    """
    regressor = np.array([u, float(np.max(np.abs(x))), 1.0])
    pb = P @ b
    unforced = predictor_step(x_hat, x, u, AdaptiveEstimates(0.0, 0.0, 0.0),
                              A_m, b, dt)
    unit = predictor_step(np.zeros_like(x_hat), x, u,
                          AdaptiveEstimates(0.0, 0.0, 1.0), A_m, b, dt)
    # Weighted end-of-step error is offset + slope * eta_hat(t + dt).
    offset = float((unforced - x_next) @ pb)
    slope = float(unit @ pb)

    current = est.as_array()
    values = current.copy()
    free = np.ones(3, dtype=bool)
    edges = [bounds.inflated(bound) for bound in bounds.intervals()]
    while True:
        step_gain = dt * gamma * float(regressor[free] @ regressor[free])
        eta_next = ((float(regressor @ values) - step_gain * offset) /
                    (1.0 + step_gain * slope))
        error_gain = offset + slope * eta_next
        candidate = values.copy()
        candidate[free] = (current[free] -
                           dt * gamma * regressor[free] * error_gain)
        clamped = False
        for i, (low, high) in enumerate(edges):
            if free[i] and not low <= candidate[i] <= high:
                values[i] = min(max(candidate[i], low), high)
                free[i] = False
                clamped = True
        if not clamped:
            values = candidate
            break
        if not free.any():
            break

    next_est = AdaptiveEstimates.from_array(values)
    return next_est, predictor_step(x_hat, x, u, next_est, A_m, b, dt)


def control_step(u_int: float,
                 eta: float,
                 r: float,
                 k_g: float,
                 k_active: float,
                 dt: float,
                 input_gain: float = 0.0) -> Tuple[float, float]:
    """Advance the control-law integrator u' = -k (eta_hat - k_g r).

    ``eta`` is eta_hat evaluated at ``u_int``. With a non-zero ``input_gain``
    (omega_hat) its dependence on u is kept inside the RK4 stages, otherwise
    eta_hat is held over the step.

    Returns:
        Tuple[float, float]: Updated integrator state and control signal.
    """
    if k_active <= 0:
        raise ValueError(f"Active feedback gain must be positive, got "
                         f"{k_active}")

    def deriv(v: np.ndarray, t: float) -> np.ndarray:
        return -k_active * (eta + input_gain * (v - u_int) - k_g * r)

    u_next = float(rk4_step(deriv, np.array([u_int]), 0.0, dt)[0])
    return u_next, u_next
