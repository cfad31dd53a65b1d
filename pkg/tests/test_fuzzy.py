import unittest
from typing import Dict, Tuple

import numpy as np

from fuzzy_l1 import constants
from fuzzy_l1.errors import NoRuleFiredError
from fuzzy_l1.fuzzy import (
    FuzzyGainTuner,
    MFSet,
    RuleBase,
    TriangularMF,
    default_input_set,
    defuzzify_centroid,
    infer,
    mf_eval,
    output_universe,
    select_gain,
)
from fuzzy_l1.pso import ParticleEncoding, decode

FAR = {
    "Z": (0.0, 0.0, 0.3),
    "VS": (0.0, 0.5, 1.0),
    "S": (1.0, 2.0, 3.0),
    "L": (3.0, 4.0, 5.0),
    "VL": (4.0, 8.0, 12.0),
}


def _output_set(params: Dict[str, Tuple[float, float, float]]) -> MFSet:
    return MFSet.from_params(params,
                             constants.OUTPUT_UNIVERSE,
                             check_order=False,
                             check_coverage=False)


def _tri(x: np.ndarray, lo: float, c: float, hi: float) -> np.ndarray:
    y = np.zeros_like(x)
    if lo < c:
        rising = (x > lo) & (x < c)
        y[rising] = (x[rising] - lo) / (c - lo)
    if c < hi:
        falling = (x > c) & (x < hi)
        y[falling] = (hi - x[falling]) / (hi - c)
    y[x == c] = 1.0
    return y


def _brute_force(tuner: FuzzyGainTuner, e_norm: float,
                 de_norm: float) -> float:
    """Enumerate all 25 rules, aggregate and take the centroid by hand."""
    universe = output_universe(tuner.resolution)
    curves = {
        label: _tri(universe, *tuner.output_set[label].as_tuple())
        for label in constants.LABELS
    }
    aggregate = np.zeros_like(universe)
    for e_label in constants.LABELS:
        for de_label in constants.LABELS:
            mu_e = _tri(np.array([e_norm]),
                        *tuner.e_set[e_label].as_tuple())[0]
            mu_de = _tri(np.array([de_norm]),
                         *tuner.de_set[de_label].as_tuple())[0]
            strength = min(mu_e, mu_de)
            out = constants.RULE_TABLE[de_label][e_label]
            aggregate = np.maximum(aggregate,
                                   np.minimum(curves[out], strength))
    # Exact moments of the piecewise-linear aggregate, segment by segment.
    x1, x2 = universe[:-1], universe[1:]
    y1, y2 = aggregate[:-1], aggregate[1:]
    dx = x2 - x1
    area = np.sum(dx * (y1 + y2) / 2.0)
    moment = np.sum(dx * (x1 * (2.0 * y1 + y2) + x2 * (y1 + 2.0 * y2)) / 6.0)
    return float(moment / area)


class MembershipTest(unittest.TestCase):
    def test_mf_eval(self):
        mf = TriangularMF(1.0, 2.0, 4.0)
        self.assertEqual(mf_eval(mf, 2.0), 1.0)
        self.assertAlmostEqual(mf_eval(mf, 1.5), 0.5)
        self.assertAlmostEqual(mf_eval(mf, 3.0), 0.5)
        self.assertEqual(mf_eval(mf, 0.0), 0.0)
        self.assertEqual(mf_eval(mf, 1.0), 0.0)
        self.assertEqual(mf_eval(mf, 4.0), 0.0)

    def test_coincident_edge(self):
        self.assertEqual(mf_eval(TriangularMF(0.0, 0.0, 1.0), 0.0), 1.0)
        self.assertEqual(mf_eval(TriangularMF(0.0, 1.0, 1.0), 1.0), 1.0)

    def test_invalid_triangle(self):
        with self.assertRaises(ValueError):
            TriangularMF(2.0, 1.0, 3.0)
        with self.assertRaises(ValueError):
            TriangularMF(1.0, 1.0, 1.0)


class MFSetTest(unittest.TestCase):
    def test_default_input_set_covers_universe(self):
        input_set = default_input_set()
        self.assertIsNone(input_set.uncovered_point())
        for x in np.linspace(0.0, 1.0, 101):
            self.assertGreater(max(input_set.degrees(x).values()), 0.0)

    def test_unordered_centers(self):
        params = dict(constants.INPUT_MF)
        params["S"], params["L"] = params["L"], params["S"]
        with self.assertRaises(ValueError):
            MFSet.from_params(params, constants.INPUT_UNIVERSE)

    def test_coverage_gap(self):
        params = dict(constants.INPUT_MF)
        params["Z"] = (0.0, 0.0, 0.05)
        params["VS"] = (0.06, 0.08, 0.31)
        with self.assertRaises(ValueError):
            MFSet.from_params(params, constants.INPUT_UNIVERSE)

    def test_missing_label(self):
        mfs = {
            label: TriangularMF(*constants.INPUT_MF[label])
            for label in ("Z", "VS", "S", "L")
        }
        with self.assertRaises(ValueError):
            MFSet(mfs, constants.INPUT_UNIVERSE)

    def test_params_round_trip(self):
        input_set = default_input_set()
        self.assertEqual(input_set.params(), constants.INPUT_MF)


class RuleBaseTest(unittest.TestCase):
    def test_cells(self):
        rules = RuleBase()
        self.assertEqual(len(list(rules.cells())), 25)
        self.assertEqual(rules.output("Z", "Z"), "Z")
        self.assertEqual(rules.output("VL", "VL"), "VL")
        self.assertEqual(rules.output("VL", "Z"), "L")

    def test_incomplete_table(self):
        table = {k: dict(v) for k, v in constants.RULE_TABLE.items()}
        del table["S"]["L"]
        with self.assertRaises(ValueError):
            RuleBase(table)


class InferenceTest(unittest.TestCase):
    def setUp(self):
        params, _ = decode(constants.DEFAULT_PARTICLE)
        self.tuner = FuzzyGainTuner.from_output_params(params)

    def test_saturated_inputs_fire_very_large_only(self):
        activations = infer(self.tuner, 1.0, 1.0)
        self.assertEqual(activations["VL"], 1.0)
        self.assertEqual(
            sum(v for k, v in activations.items() if k != "VL"), 0.0)

    def test_zero_inputs_fire_zero_only(self):
        activations = infer(self.tuner, 0.0, 0.0)
        self.assertEqual(activations["Z"], 1.0)
        self.assertEqual(
            sum(v for k, v in activations.items() if k != "Z"), 0.0)

    def test_matches_brute_force_enumeration(self):
        encoding = ParticleEncoding()
        rng = np.random.default_rng(2)
        grid = np.linspace(0.0, 1.0, 50)
        for _ in range(20):
            p = encoding.lower + rng.uniform(size=9) * encoding.width
            params, _ = decode(p)
            tuner = FuzzyGainTuner.from_output_params(params)
            for e_norm in grid:
                for de_norm in grid:
                    self.assertAlmostEqual(tuner.fuzzy_output(e_norm, de_norm),
                                           _brute_force(
                                               tuner, e_norm, de_norm),
                                           delta=1e-9)

    def test_bounded_on_dense_grid(self):
        grid = np.linspace(0.0, 1.0, 200)
        outputs = np.array([[self.tuner.fuzzy_output(e, de) for de in grid]
                            for e in grid])
        self.assertTrue(np.all(np.isfinite(outputs)))
        self.assertGreaterEqual(outputs.min(), 0.0)
        self.assertLessEqual(outputs.max(), 12.0)
        # Equal input sets and a symmetric rule table.
        np.testing.assert_allclose(outputs, outputs.T, rtol=0, atol=1e-12)

    def test_gain_grows_across_label_centers(self):
        centers = [constants.INPUT_MF[label][1] for label in constants.LABELS]
        outputs = np.array([[self.tuner.fuzzy_output(e, de)
                             for de in centers] for e in centers])
        self.assertTrue(np.all(np.diff(outputs, axis=0) >= 0.0))
        self.assertTrue(np.all(np.diff(outputs, axis=1) >= 0.0))
        self.assertLess(outputs[0, 0], outputs[-1, -1])

    def test_saturated_error_dominates(self):
        for x in np.linspace(0.0, 1.0, 200):
            self.assertGreaterEqual(self.tuner.fuzzy_output(1.0, x),
                                    self.tuner.fuzzy_output(0.0, x))
            self.assertGreaterEqual(self.tuner.fuzzy_output(x, 1.0),
                                    self.tuner.fuzzy_output(x, 0.0))

    def test_straddling_inputs(self):
        self.assertAlmostEqual(self.tuner.fuzzy_output(0.5, 0.5),
                               _brute_force(self.tuner, 0.5, 0.5),
                               delta=1e-9)


class CentroidTest(unittest.TestCase):
    def test_symmetric_triangle(self):
        output_set = _output_set(FAR)
        activations = {label: 0.0 for label in constants.LABELS}
        activations["VL"] = 1.0
        self.assertAlmostEqual(defuzzify_centroid(output_set, activations),
                               8.0,
                               delta=constants.OUTPUT_RESOLUTION)

    def test_right_triangle(self):
        output_set = _output_set(FAR)
        activations = {label: 0.0 for label in constants.LABELS}
        activations["Z"] = 1.0
        self.assertAlmostEqual(defuzzify_centroid(output_set, activations),
                               0.1,
                               delta=constants.OUTPUT_RESOLUTION)

    def test_two_symmetric_triangles(self):
        output_set = _output_set(FAR)
        activations = {label: 0.0 for label in constants.LABELS}
        activations["S"] = 1.0
        activations["L"] = 1.0
        self.assertAlmostEqual(defuzzify_centroid(output_set, activations),
                               3.0,
                               delta=constants.OUTPUT_RESOLUTION)

    def test_nothing_fired(self):
        output_set = _output_set(FAR)
        with self.assertRaises(NoRuleFiredError):
            defuzzify_centroid(output_set,
                               {label: 0.0
                                for label in constants.LABELS})


class SelectGainTest(unittest.TestCase):
    def setUp(self):
        params, _ = decode(constants.DEFAULT_PARTICLE)
        self.params = params
        self.tuner = FuzzyGainTuner.from_output_params(params)

    def test_fallback_inside_threshold(self):
        self.assertEqual(select_gain(self.tuner, 0.05, 100.0), 20.0)
        self.assertEqual(select_gain(self.tuner, -0.1, 0.0), 20.0)
        self.assertEqual(self.tuner.gain(0.0, 0.0), 20.0)

    def test_normalized_inputs(self):
        self.assertEqual(self.tuner.normalize(5.0, 10.0), (0.5, 0.5))
        self.assertEqual(self.tuner.normalize(-1e6, 1e6), (1.0, 1.0))
        self.assertEqual(select_gain(self.tuner, 5.0, 10.0),
                         self.tuner.fuzzy_output(0.5, 0.5))

    def test_saturation(self):
        activations = {label: 0.0 for label in constants.LABELS}
        activations["VL"] = 1.0
        expected = defuzzify_centroid(self.tuner.output_set, activations)
        self.assertAlmostEqual(select_gain(self.tuner, 1e6, 1e6),
                               expected,
                               places=12)

    def test_bounded_and_sign_symmetric(self):
        rng = np.random.default_rng(4)
        for _ in range(200):
            e, e_rate = rng.normal(scale=10.0, size=2)
            k = select_gain(self.tuner, e, e_rate)
            self.assertGreaterEqual(k, 0.0)
            self.assertLessEqual(k, 12.0 if abs(e) > 0.1 else 20.0)
            self.assertEqual(k, select_gain(self.tuner, -e, -e_rate))
            self.assertEqual(k, select_gain(self.tuner, e, -e_rate))

    def test_resolution_convergence(self):
        fine = FuzzyGainTuner.from_output_params(self.params,
                                                 resolution=0.0025)
        for e_norm in np.linspace(0.0, 1.0, 9):
            for de_norm in np.linspace(0.0, 1.0, 9):
                self.assertLess(
                    abs(fine.fuzzy_output(e_norm, de_norm) -
                        self.tuner.fuzzy_output(e_norm, de_norm)), 1e-3)

    def test_invalid_weights(self):
        with self.assertRaises(ValueError):
            FuzzyGainTuner.from_output_params(self.params, k_p=0.0)
