import unittest

import numpy as np

from fuzzy_l1 import constants
from fuzzy_l1.fuzzy import FuzzyGainTuner
from fuzzy_l1.plant import benchmark_scenario
from fuzzy_l1.pso import (
    ParticleEncoding,
    SwarmConfig,
    decode,
    decode_repair_rate,
    divergence_penalty,
    encode,
    evaluate_objective,
    position_update,
    run_pso,
    tracking_cost,
    velocity_update,
)
from fuzzy_l1.simulation import ReferenceSignal, TimeGrid, Trajectory


def sphere(p: np.ndarray) -> float:
    return float(np.sum((p - constants.DEFAULT_PARTICLE)**2))


def _trajectory(e: float, u: float, samples: int) -> Trajectory:
    ones = np.ones(samples)
    return Trajectory(t=np.arange(samples) * 0.01,
                      r=ones,
                      y=ones,
                      u=u * ones,
                      e=e * ones,
                      k_f=ones,
                      omega_hat=ones,
                      theta_hat=ones,
                      sigma_hat=ones,
                      x=np.zeros((samples, 2)),
                      x_hat=np.zeros((samples, 2)))


class DecodeTest(unittest.TestCase):
    def test_lower_corner(self):
        params, repaired = decode(constants.PARTICLE_LOWER)
        self.assertFalse(repaired)
        self.assertEqual(params["Z"], (0.0, 0.0, 0.3))
        self.assertEqual(params["VS"], (0.0, 0.5, 1.5))
        self.assertEqual(params["S"], (0.3, 1.5, 4.0))
        self.assertEqual(params["L"], (1.5, 3.0, 6.0))
        self.assertEqual(params["VL"], (4.0, 8.0, 8.0))

    def test_upper_corner(self):
        params, repaired = decode(constants.PARTICLE_UPPER)
        self.assertFalse(repaired)
        self.assertEqual(params["Z"], (0.0, 0.0, 1.5))
        self.assertEqual(params["VS"], (0.5, 1.5, 3.0))
        self.assertEqual(params["S"], (1.5, 4.0, 8.0))
        self.assertEqual(params["L"], (3.0, 6.0, 10.0))
        self.assertEqual(params["VL"], (8.0, 12.0, 12.0))

    def test_collapsed_very_large_set_is_opened(self):
        p = constants.PARTICLE_LOWER.copy()
        p[0] = 8.0
        params, repaired = decode(p)
        self.assertTrue(repaired)
        low, center, high = params["VL"]
        self.assertLess(low, high)
        self.assertLessEqual(low, center)
        self.assertLessEqual(center, high)
        self.assertAlmostEqual(high, 8.0, places=12)
        self.assertAlmostEqual(high - low, constants.MIN_SUPPORT, places=12)
        self.assertEqual(params["S"], (0.3, 1.5, 8.0))
        tuner = FuzzyGainTuner.from_output_params(params)
        self.assertGreater(tuner.fuzzy_output(1.0, 1.0), 7.99)

    def test_encode_inverts_decode_in_box(self):
        encoding = ParticleEncoding()
        rng = np.random.default_rng(0)
        for _ in range(50):
            p = encoding.lower + rng.uniform(size=9) * encoding.width
            params, repaired = decode(p)
            self.assertFalse(repaired)
            np.testing.assert_array_equal(encode(params), p)

    def test_out_of_order_triple_is_sorted(self):
        p = constants.DEFAULT_PARTICLE.copy()
        p[8] = 5.0
        params, repaired = decode(p)
        self.assertTrue(repaired)
        self.assertEqual(params["VS"], (0.25, 2.25, 5.0))

    def test_no_repairs_inside_box(self):
        self.assertEqual(decode_repair_rate(1000, seed=3), 0.0)


class UpdateTest(unittest.TestCase):
    def test_velocity_update(self):
        v = velocity_update(np.array([1.0]), np.array([0.0]), np.array([1.0]),
                            np.array([2.0]), 0.5, 2.0, 2.0, 0.5, 0.5)
        np.testing.assert_allclose(v, [3.5])

    def test_velocity_clamp(self):
        v = velocity_update(np.array([1.0]), np.array([0.0]), np.array([1.0]),
                            np.array([2.0]), 0.5, 2.0, 2.0, 0.5, 0.5,
                            v_max=np.array([2.0]))
        np.testing.assert_allclose(v, [2.0])

    def test_position_stays_in_box(self):
        encoding = ParticleEncoding()
        x = position_update(encoding.upper, np.ones(9), encoding)
        np.testing.assert_array_equal(x, encoding.upper)
        x = position_update(encoding.lower, -np.ones(9))
        np.testing.assert_array_equal(x, encoding.lower)

    def test_invalid_encoding(self):
        with self.assertRaises(ValueError):
            ParticleEncoding(lower=np.zeros(3), upper=np.ones(3))
        with self.assertRaises(ValueError):
            ParticleEncoding(lower=constants.PARTICLE_UPPER,
                             upper=constants.PARTICLE_LOWER)


class ObjectiveTest(unittest.TestCase):
    def test_tracking_cost(self):
        self.assertEqual(tracking_cost(_trajectory(1.0, 0.0, 801), 1.0, 0.01),
                         801.0)
        self.assertAlmostEqual(
            tracking_cost(_trajectory(1.0, 10.0, 801), 1.0, 0.01), 1602.0)

    def test_penalty_dominates(self):
        grid = TimeGrid(tf=8.0)
        self.assertEqual(divergence_penalty(grid, 2.0), 1e12 + 6.0)
        self.assertEqual(divergence_penalty(grid, None), 1e12 + 8.0)
        self.assertGreater(divergence_penalty(grid, 2.0),
                           divergence_penalty(grid, 7.0))
        self.assertGreater(divergence_penalty(grid, 8.0),
                           tracking_cost(_trajectory(100.0, 100.0, 801), 1.0,
                                         0.01))

    def test_rollout_objective(self):
        scenario = benchmark_scenario("case1")
        grid = TimeGrid(tf=0.1)
        still = ReferenceSignal(amplitude=0.0)
        self.assertEqual(
            evaluate_objective(constants.DEFAULT_PARTICLE, scenario, grid,
                               reference=still), 0.0)
        first = evaluate_objective(constants.DEFAULT_PARTICLE, scenario, grid)
        second = evaluate_objective(constants.DEFAULT_PARTICLE, scenario, grid)
        self.assertEqual(first, second)

    def test_collapsed_corner_is_scored(self):
        p = constants.PARTICLE_LOWER.copy()
        p[0] = 8.0
        value = evaluate_objective(p, benchmark_scenario("case1"),
                                   TimeGrid(tf=0.2))
        self.assertTrue(np.isfinite(value))
        self.assertLess(value, constants.DIVERGENCE_PENALTY)

    def test_diverging_rollout_is_penalized(self):
        scenario = benchmark_scenario("case1", divergence_threshold=1e-6)
        value = evaluate_objective(constants.DEFAULT_PARTICLE, scenario,
                                   TimeGrid(tf=0.5))
        self.assertGreater(value, constants.DIVERGENCE_PENALTY)


class SwarmConfigTest(unittest.TestCase):
    def test_invalid(self):
        invalid = [
            dict(population=1),
            dict(generations=0),
            dict(inertia=0.0),
            dict(inertia_schedule="linear"),
            dict(workers=0),
            dict(c1=-1.0),
        ]
        for kwargs in invalid:
            with self.assertRaises(ValueError, msg=str(kwargs)):
                SwarmConfig(**kwargs)

    def test_inertia_schedule(self):
        self.assertEqual(SwarmConfig().inertia_at(0), 1.0)
        self.assertAlmostEqual(SwarmConfig().inertia_at(2), 0.9801)
        constant = SwarmConfig(inertia=0.7, inertia_schedule="constant")
        self.assertEqual(constant.inertia_at(5), 0.7)


class RunPSOTest(unittest.TestCase):
    def test_history_is_monotone(self):
        config = SwarmConfig(population=12, generations=15, seed=4)
        result = run_pso(config, objective=sphere)
        self.assertEqual(len(result.history), 15)
        self.assertTrue(
            all(b <= a for a, b in zip(result.history, result.history[1:])))
        self.assertEqual(result.best_value, result.history[-1])
        self.assertAlmostEqual(sphere(result.best), result.best_value)
        self.assertTrue(ParticleEncoding().contains(result.best))
        self.assertLess(result.history[-1], result.history[0])

    def test_deterministic(self):
        config = SwarmConfig(population=6, generations=5, seed=9)
        first = run_pso(config, objective=sphere)
        second = run_pso(config, objective=sphere)
        np.testing.assert_array_equal(first.best, second.best)
        self.assertEqual(first.history, second.history)

    def test_workers_do_not_change_result(self):
        serial = run_pso(SwarmConfig(population=6, generations=4, seed=2),
                         objective=sphere)
        parallel = run_pso(SwarmConfig(population=6,
                                       generations=4,
                                       seed=2,
                                       workers=2),
                           objective=sphere)
        np.testing.assert_array_equal(serial.best, parallel.best)
        self.assertEqual(serial.history, parallel.history)

    def test_per_dimension_random(self):
        config = SwarmConfig(population=6,
                             generations=5,
                             seed=2,
                             per_dimension_random=True)
        result = run_pso(config, objective=sphere)
        self.assertEqual(len(result.history), 5)
        self.assertTrue(ParticleEncoding().contains(result.best))

    def test_single_generation(self):
        result = run_pso(SwarmConfig(population=2, generations=1, seed=0),
                         objective=sphere)
        self.assertEqual(len(result.history), 1)
        initial = result.state.positions
        self.assertTrue(
            any(np.array_equal(result.best, p) for p in initial))
        self.assertEqual(result.decoded, decode(result.best)[0])

    def test_rollout_needs_scenario(self):
        with self.assertRaises(ValueError):
            run_pso(SwarmConfig(population=2, generations=1))
