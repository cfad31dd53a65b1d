"""Mamdani fuzzy scheduler for the feedback gain.

Inputs are the normalized magnitudes k_p|e| and k_d|e'| on [0, 1]; the output
universe is [0, 12]. Rules fire with min, aggregate with max and are
defuzzified by the centroid of the aggregate on a discretized universe.
"""
import logging
from dataclasses import dataclass, field
from typing import Any, Dict, Iterable, Mapping, Optional, Sequence, Tuple

import numpy as np
import skfuzzy as fuzz

from fuzzy_l1 import constants
from fuzzy_l1.errors import NoRuleFiredError

logger = logging.getLogger(__name__)

Activations = Dict[str, float]


@dataclass(frozen=True)
class TriangularMF:
    l: float  # noqa: E741
    c: float
    h: float

    def __post_init__(self) -> None:
        if not self.l <= self.c <= self.h:
            raise ValueError(
                f"Breakpoints must satisfy l <= c <= h, got {self.as_tuple()}")
        if not self.l < self.h:
            raise ValueError(
                f"Degenerate membership function {self.as_tuple()}")

    def as_tuple(self) -> Tuple[float, float, float]:
        return (self.l, self.c, self.h)

    def curve(self, universe: np.ndarray) -> np.ndarray:
        return fuzz.trimf(universe, list(self.as_tuple()))


def mf_eval(mf: TriangularMF, x: float) -> float:
    """Degree of membership of x; 1 at a coincident edge, 0 off the support."""
    knots = np.unique(mf.as_tuple())
    return float(
        fuzz.interp_membership(knots, mf.curve(knots), float(x)))


@dataclass(frozen=True)
class MFSet:
    """Five labeled triangles over one universe.

    Input sets must keep the label centers strictly ordered and cover the
    universe. Output sets decoded from a particle are built with both checks
    off: corners of the constraint box can put S_c above L_c, and gaps
    between supports only lower the aggregate there.
    """

    mfs: Mapping[str, TriangularMF]
    universe: Tuple[float, float]
    check_order: bool = True
    check_coverage: bool = True

    def __post_init__(self) -> None:
        if tuple(self.mfs) != constants.LABELS:
            if set(self.mfs) != set(constants.LABELS):
                raise ValueError(
                    f"Expected labels {constants.LABELS}, got "
                    f"{tuple(self.mfs)}")
            object.__setattr__(self, "mfs",
                               {k: self.mfs[k]
                                for k in constants.LABELS})
        low, high = self.universe
        if not low < high:
            raise ValueError(f"Empty universe {self.universe}")
        if self.check_order:
            centers = [self.mfs[k].c for k in constants.LABELS]
            if any(a >= b for a, b in zip(centers, centers[1:])):
                raise ValueError(
                    f"Label centers must increase Z < VS < S < L < VL, got "
                    f"{centers}")
        if self.check_coverage:
            gap = self.uncovered_point()
            if gap is not None:
                raise ValueError(
                    f"Membership functions leave {gap:.6g} uncovered")

    def __getitem__(self, label: str) -> TriangularMF:
        return self.mfs[label]

    def degrees(self, x: float) -> Activations:
        return {label: mf_eval(mf, x) for label, mf in self.mfs.items()}

    def uncovered_point(self, samples: int = 2001) -> Optional[float]:
        low, high = self.universe
        knots = [v for mf in self.mfs.values() for v in mf.as_tuple()]
        xs = np.union1d(np.linspace(low, high, samples),
                        np.clip(knots, low, high))
        cover = np.max([mf.curve(xs) for mf in self.mfs.values()], axis=0)
        empty = np.nonzero(cover <= 0.0)[0]
        return float(xs[empty[0]]) if empty.size else None

    def params(self) -> Dict[str, Tuple[float, float, float]]:
        return {label: mf.as_tuple() for label, mf in self.mfs.items()}

    @classmethod
    def from_params(cls,
                    params: Mapping[str, Sequence[float]],
                    universe: Tuple[float, float],
                    check_order: bool = True,
                    check_coverage: bool = True) -> "MFSet":
        return cls(
            {
                label: TriangularMF(*(float(v) for v in params[label]))
                for label in constants.LABELS
            },
            universe,
            check_order=check_order,
            check_coverage=check_coverage,
        )


@dataclass(frozen=True)
class RuleBase:
    """table[de_label][e_label] -> output label, all 25 cells filled."""

    table: Mapping[str, Mapping[str, str]] = field(
        default_factory=lambda: constants.RULE_TABLE)

    def __post_init__(self) -> None:
        labels = set(constants.LABELS)
        if set(self.table) != labels or any(
                set(row) != labels or not set(row.values()) <= labels
                for row in self.table.values()):
            raise ValueError("Rule base must map every (e, de) label pair "
                             "to a known output label")

    def output(self, e_label: str, de_label: str) -> str:
        return self.table[de_label][e_label]

    def cells(self) -> Iterable[Tuple[str, str, str]]:
        for de_label in constants.LABELS:
            for e_label in constants.LABELS:
                yield e_label, de_label, self.table[de_label][e_label]


def default_input_set() -> MFSet:
    return MFSet.from_params(constants.INPUT_MF, constants.INPUT_UNIVERSE)


def output_universe(resolution: float = constants.OUTPUT_RESOLUTION
                    ) -> np.ndarray:
    low, high = constants.OUTPUT_UNIVERSE
    count = int(round((high - low) / resolution)) + 1
    return np.linspace(low, high, count)


@dataclass(frozen=True, eq=False)
class FuzzyGainTuner:
    """Fuzzy feedback-gain source.

    Args:
        output_set (MFSet): Output membership functions on [0, 12].
        k_p (float): Weight normalizing |e|.
        k_d (float): Weight normalizing |e'|.
        k_e (float): Error magnitude above which the fuzzy gain is used.
        k_const (float): Gain used at or below ``k_e``.
    """

    output_set: MFSet
    k_p: float = constants.K_P
    k_d: float = constants.K_D
    k_e: float = constants.K_E
    k_const: float = constants.CONSTANT_GAIN
    e_set: MFSet = field(default_factory=default_input_set)
    de_set: MFSet = field(default_factory=default_input_set)
    rules: RuleBase = field(default_factory=RuleBase)
    resolution: float = constants.OUTPUT_RESOLUTION
    _universe: np.ndarray = field(init=False, repr=False)
    _curves: Dict[str, np.ndarray] = field(init=False, repr=False)

    def __post_init__(self) -> None:
        for name in ("k_p", "k_d", "k_e", "k_const", "resolution"):
            if getattr(self, name) <= 0:
                raise ValueError(
                    f"{name} must be positive, got {getattr(self, name)}")
        universe = output_universe(self.resolution)
        object.__setattr__(self, "_universe", universe)
        object.__setattr__(
            self, "_curves",
            {label: mf.curve(universe)
             for label, mf in self.output_set.mfs.items()})

    def gain(self, e: float, e_rate: float) -> float:
        return select_gain(self, e, e_rate)

    def normalize(self, e: float, e_rate: float) -> Tuple[float, float]:
        e_norm = min(max(self.k_p * abs(e), 0.0), 1.0)
        de_norm = min(max(self.k_d * abs(e_rate), 0.0), 1.0)
        return e_norm, de_norm

    def fuzzy_output(self, e_norm: float, de_norm: float) -> float:
        activations = infer(self, e_norm, de_norm)
        return _centroid(self._universe, self._curves, activations)

    @classmethod
    def from_output_params(cls, params: Mapping[str, Sequence[float]],
                           **kwargs: Any) -> "FuzzyGainTuner":
        output_set = MFSet.from_params(params,
                                       constants.OUTPUT_UNIVERSE,
                                       check_order=False,
                                       check_coverage=False)
        return cls(output_set, **kwargs)


def infer(tuner: FuzzyGainTuner, e_norm: float,
          de_norm: float) -> Activations:
    """Fire all rules with min and aggregate each output label with max."""
    e_degrees = tuner.e_set.degrees(e_norm)
    de_degrees = tuner.de_set.degrees(de_norm)
    activations = {label: 0.0 for label in constants.LABELS}
    for e_label, de_label, out_label in tuner.rules.cells():
        strength = min(e_degrees[e_label], de_degrees[de_label])
        if strength > activations[out_label]:
            activations[out_label] = strength
    return activations


def defuzzify_centroid(output_set: MFSet,
                       activations: Mapping[str, float],
                       resolution: float = constants.OUTPUT_RESOLUTION
                       ) -> float:
    """Centroid of the max of the clipped output sets.

    Raises:
        NoRuleFiredError: If no output label is active.
    """
    universe = output_universe(resolution)
    curves = {
        label: mf.curve(universe)
        for label, mf in output_set.mfs.items()
    }
    return _centroid(universe, curves, activations)


def _centroid(universe: np.ndarray, curves: Mapping[str, np.ndarray],
              activations: Mapping[str, float]) -> float:
    if not any(activations[label] > 0.0 for label in curves):
        raise NoRuleFiredError("No fuzzy rule fired")
    aggregate = np.zeros_like(universe)
    for label, curve in curves.items():
        level = activations[label]
        if level > 0.0:
            np.maximum(aggregate, np.minimum(curve, level), out=aggregate)
    if not np.any(aggregate > 0.0):
        raise NoRuleFiredError("Aggregated output set has zero area")
    # Samples on straight runs of the aggregate do not move its centroid.
    bends = np.nonzero(np.abs(np.diff(aggregate, 2)) > 1e-12)[0] + 1
    keep = np.concatenate(([0], bends, [universe.size - 1]))
    return float(fuzz.defuzz(universe[keep], aggregate[keep], "centroid"))


def select_gain(tuner: FuzzyGainTuner, e: float, e_rate: float) -> float:
    """Fuzzy gain when |e| > k_e, otherwise the constant fallback."""
    if abs(e) <= tuner.k_e:
        return tuner.k_const
    e_norm, de_norm = tuner.normalize(e, e_rate)
    return tuner.fuzzy_output(e_norm, de_norm)
