import logging
from dataclasses import dataclass
from typing import Callable, Sequence, Tuple

import numpy as np
from scipy.linalg import solve_continuous_lyapunov
from scipy.signal import place_poles as scipy_place_poles
from scipy.signal import tf2ss

from fuzzy_l1.errors import (
    ControllabilityError,
    IntegrationFault,
    ProperTransferFunctionError,
    SingularFeedforwardError,
    StabilityPreconditionError,
)

logger = logging.getLogger(__name__)

Derivative = Callable[[np.ndarray, float], np.ndarray]


@dataclass(frozen=True)
class StateSpaceModel:
    """Linear SISO realization x' = A x + b u, y = c x."""

    A: np.ndarray
    b: np.ndarray
    c: np.ndarray

    def __post_init__(self) -> None:
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        b = np.asarray(self.b, dtype=float).reshape(-1)
        c = np.asarray(self.c, dtype=float).reshape(-1)
        n = A.shape[0]
        if A.shape != (n, n):
            raise ValueError(f"A must be square, got shape {A.shape}")
        if b.shape != (n, ) or c.shape != (n, ):
            raise ValueError(
                f"b and c must have {n} entries, got {b.shape} and {c.shape}")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "c", c)

    @property
    def order(self) -> int:
        return int(self.A.shape[0])

    def derivative(self, x: np.ndarray, u: float) -> np.ndarray:
        return self.A @ x + self.b * u

    def output(self, x: np.ndarray) -> float:
        return float(self.c @ x)

    def dc_gain(self) -> float:
        return float(-self.c @ np.linalg.solve(self.A, self.b))


def rk4_step(deriv: Derivative, x: np.ndarray, t: float,
             dt: float) -> np.ndarray:
    """Advance x by one classical fourth-order Runge-Kutta step.

    Args:
        deriv (Callable): State derivative as a function of (x, t).
        x (np.ndarray): State at time t.
        t (float): Current time in seconds.
        dt (float): Step length in seconds.

    Returns:
        np.ndarray: State at t + dt.

    Raises:
        IntegrationFault: If any stage derivative is not finite.
    """
    if dt <= 0:
        raise ValueError(f"dt must be positive, got {dt}")
    x = np.asarray(x, dtype=float)
    half = dt / 2.0
    k1 = _checked(deriv(x, t), t)
    k2 = _checked(deriv(x + half * k1, t + half), t + half)
    k3 = _checked(deriv(x + half * k2, t + half), t + half)
    k4 = _checked(deriv(x + dt * k3, t + dt), t + dt)
    return x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _checked(dx: np.ndarray, t: float) -> np.ndarray:
    dx = np.asarray(dx, dtype=float)
    if not np.all(np.isfinite(dx)):
        raise IntegrationFault(t)
    return dx


def is_hurwitz(A: np.ndarray) -> bool:
    A = np.atleast_2d(A)
    if A.shape == (2, 2):
        return bool(np.trace(A) < 0 and np.linalg.det(A) > 0)
    return bool(np.all(np.linalg.eigvals(A).real < 0))


def controllability_matrix(A: np.ndarray, b: np.ndarray) -> np.ndarray:
    n = A.shape[0]
    columns = [b]
    for _ in range(n - 1):
        columns.append(A @ columns[-1])
    return np.column_stack(columns)


def place_poles(A: np.ndarray, b: np.ndarray,
                poles: Sequence[complex]) -> Tuple[np.ndarray, np.ndarray]:
    """Compute the state feedback K placing the spectrum of A - b K.

    Args:
        A (np.ndarray): Open-loop n x n matrix.
        b (np.ndarray): Input vector with n entries.
        poles (Sequence[complex]): Desired closed-loop poles, closed under
            complex conjugation.

    Returns:
        Tuple[np.ndarray, np.ndarray]: Gain row K and A_m = A - b K.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    b = np.asarray(b, dtype=float).reshape(-1)
    poles = np.asarray(poles, dtype=complex).reshape(-1)
    n = A.shape[0]
    if poles.size != n:
        raise ValueError(f"Expected {n} poles, got {poles.size}")
    if not np.allclose(np.sort_complex(poles),
                       np.sort_complex(poles.conj())):
        raise ValueError("Poles must be closed under complex conjugation")
    ctrb = controllability_matrix(A, b)
    if np.linalg.matrix_rank(ctrb) < n:
        raise ControllabilityError(
            "(A, b) is not controllable; the requested poles cannot be placed")
    if n == 1:
        # scipy needs at least as many states as inputs plus a full-rank B
        K = np.array([(A[0, 0] - poles[0].real) / b[0]])
    else:
        result = scipy_place_poles(A, b.reshape(n, 1), poles)
        K = np.asarray(result.gain_matrix, dtype=float).reshape(-1)
    A_m = A - np.outer(b, K)
    logger.debug(f"Placed poles {poles.tolist()} with K={K.tolist()}")
    return K, A_m


def lyapunov_solve(A_m: np.ndarray, Q: np.ndarray) -> np.ndarray:
    """Solve A_m^T P + P A_m = -Q for the symmetric positive-definite P.

    Args:
        A_m (np.ndarray): Hurwitz matrix.
        Q (np.ndarray): Symmetric positive-definite weight.

    Returns:
        np.ndarray: Symmetric P.

    Raises:
        StabilityPreconditionError: If A_m is not Hurwitz.
    """
    A_m = np.atleast_2d(np.asarray(A_m, dtype=float))
    Q = np.atleast_2d(np.asarray(Q, dtype=float))
    if not is_hurwitz(A_m):
        raise StabilityPreconditionError(
            f"A_m is not Hurwitz (eigenvalues {np.linalg.eigvals(A_m)})")
    if not np.allclose(Q, Q.T) or np.any(np.linalg.eigvalsh(Q) <= 0):
        raise ValueError("Q must be symmetric positive-definite")
    P = solve_continuous_lyapunov(A_m.T, -Q)
    return (P + P.T) / 2.0


def feedforward_gain(A_m: np.ndarray, b: np.ndarray, c: np.ndarray) -> float:
    """Reference gain k_g = -1 / (c A_m^-1 b) giving unity DC gain."""
    A_m = np.atleast_2d(np.asarray(A_m, dtype=float))
    b = np.asarray(b, dtype=float).reshape(-1)
    c = np.asarray(c, dtype=float).reshape(-1)
    dc = float(c @ np.linalg.solve(A_m, b))
    if abs(dc) < 1e-12:
        raise SingularFeedforwardError(
            f"c A_m^-1 b = {dc:.3g}; output row {c.tolist()} has no DC path "
            "from the input")
    return -1.0 / dc


def realize_siso_tf(num: Sequence[float],
                    den: Sequence[float]) -> StateSpaceModel:
    """Controllable-canonical realization of a strictly proper num/den."""
    num_arr = np.trim_zeros(np.atleast_1d(np.asarray(num, dtype=float)), "f")
    den_arr = np.atleast_1d(np.asarray(den, dtype=float))
    if den_arr.size == 0 or den_arr[0] == 0:
        raise ProperTransferFunctionError(
            "Leading denominator coefficient must be non-zero")
    if num_arr.size == 0:
        num_arr = np.zeros(1)
    if num_arr.size >= den_arr.size:
        raise ProperTransferFunctionError(
            f"Transfer function is not strictly proper: numerator degree "
            f"{num_arr.size - 1}, denominator degree {den_arr.size - 1}")
    A, B, C, _ = tf2ss(num_arr, den_arr)
    return StateSpaceModel(A=A + 0.0, b=B.reshape(-1), c=C.reshape(-1))
