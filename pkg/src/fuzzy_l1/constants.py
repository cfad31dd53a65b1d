# flake8: noqa

from typing import Dict, List, Tuple

import numpy as np

# Double-integrator backbone shared by all benchmark cases.
BASE_A = np.array([[0.0, 1.0], [0.0, 0.0]])
BASE_B = np.array([0.0, 1.0])
# With C = [0 1] k_g is singular, so the measured output is x1.
DEFAULT_OUTPUT_MATRIX = np.array([1.0, 0.0])

NOMINAL_POLES = (complex(-21.0, 0.743), complex(-21.0, -0.743))
FAST_POLES = (complex(-84.0, 0.743), complex(-84.0, -0.743))

CONSTANT_GAIN = 20.0
ADAPTATION_GAIN = 1.0e6
# Heavy x1 weight: the slow prediction-error mode decays at
# a1 q1 / (a0 q2 + q1).
Q_MATRIX = np.diag([1000.0, 1.0])
# implicit: backward-Euler adaptation solved jointly with the predictor.
# explicit: held-drive RK4 adaptation, stable only for small gamma dt.
ADAPTATION_SCHEMES = ("implicit", "explicit")

# Lower edge stays positive after inflation by sqrt(1 + margin).
OMEGA_BOUNDS = (0.5, 10.0)
THETA_BOUND = 10.0
SIGMA_BOUND = 100.0
PROJECTION_MARGIN = 0.1
INITIAL_ESTIMATES = (1.0, 0.0, 0.0)

# w(s) = 75 / (s + 75)
ACTUATOR_POLE = 75.0
# z(s) = (s - 1) / (s^2 + 3s + 2)
DISTURBANCE_NUM = [1.0, -1.0]
DISTURBANCE_DEN = [1.0, 3.0, 2.0]

DIVERGENCE_THRESHOLD = 1.0e3

K_P = 0.1
K_D = 0.05
K_E = 0.1

SIM_DURATION = 40.0
TUNING_DURATION = 8.0
DT = 0.01
REFERENCE_AMPLITUDE = 1.0
REFERENCE_FREQUENCY = 0.5

SCENARIO_IDS = ("case1", "case2", "case3")
CONTROLLER_MODES = ("constant", "fuzzy")

# Fuzzy sets, ordered from smallest to largest.
LABELS = ("Z", "VS", "S", "L", "VL")

INPUT_UNIVERSE = (0.0, 1.0)
OUTPUT_UNIVERSE = (0.0, 12.0)
OUTPUT_RESOLUTION = 0.005

# Laddered cover of [0, 1], knee at 0.08; shared by e and de.
INPUT_MF: Dict[str, Tuple[float, float, float]] = {
    "Z": (0.0, 0.0, 0.08),
    "VS": (0.0, 0.08, 0.31),
    "S": (0.08, 0.31, 0.54),
    "L": (0.31, 0.54, 1.0),
    "VL": (0.54, 1.0, 1.0),
}

# RULE_TABLE[de_label][e_label] -> output label
RULE_TABLE: Dict[str, Dict[str, str]] = {
    "VL": {"VL": "VL", "L": "VL", "S": "VL", "VS": "VL", "Z": "L"},
    "L": {"VL": "VL", "L": "VL", "S": "VL", "VS": "L", "Z": "S"},
    "S": {"VL": "VL", "L": "VL", "S": "L", "VS": "S", "Z": "VS"},
    "VS": {"VL": "VL", "L": "L", "S": "S", "VS": "VS", "Z": "VS"},
    "Z": {"VL": "L", "L": "S", "S": "VS", "VS": "VS", "Z": "Z"},
}

# Free output-MF parameters searched by the swarm, in particle order.
PARTICLE_FIELDS: List[str] = [
    "VL_l", "VL_c", "L_l", "L_c", "L_h", "S_l", "S_c", "VS_l", "VS_c"
]
PARTICLE_LOWER = np.array([4.0, 8.0, 1.5, 3.0, 6.0, 0.3, 1.5, 0.0, 0.5])
PARTICLE_UPPER = np.array([8.0, 12.0, 3.0, 6.0, 10.0, 1.5, 4.0, 0.5, 1.5])
# Narrowest output support decode leaves a triangle with.
MIN_SUPPORT = 1.0e-3
# Midpoint of the constraint box; used when no tuning result is supplied.
DEFAULT_PARTICLE = (PARTICLE_LOWER + PARTICLE_UPPER) / 2.0

SWARM_POPULATION = 150
SWARM_GENERATIONS = 100
SWARM_C1 = 2.0
SWARM_C2 = 2.0
SWARM_INERTIA = 0.99
SWARM_LAMBDA = 10.0
OBJECTIVE_GAMMA1 = 1.0
OBJECTIVE_GAMMA2 = 0.01
DIVERGENCE_PENALTY = 1.0e12

TRAJECTORY_COLUMNS = [
    "t", "r", "y", "u", "e", "k_f", "omega_hat", "theta_hat", "sigma_hat",
    "x1", "x2"
]
CONVERGENCE_COLUMNS = ["generation", "best_value"]

TRAJECTORY_FILE = "trajectory.csv"
STATUS_FILE = "status.json"
TUNING_FILE = "tuning.json"
CONVERGENCE_FILE = "convergence.csv"
SUMMARY_FILE = "summary.json"

# Analysis windows for the comparison summary.
RMS_WINDOW_START = 5.0
CONTROL_WINDOW_START = 1.0
