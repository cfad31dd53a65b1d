from fuzzy_l1.plant import PlantScenario, benchmark_scenario
from fuzzy_l1.pso import SwarmConfig, run_pso
from fuzzy_l1.simulation import TimeGrid, make_gain_source, simulate

__all__ = [
    PlantScenario.__name__,
    benchmark_scenario.__name__,
    SwarmConfig.__name__,
    run_pso.__name__,
    TimeGrid.__name__,
    make_gain_source.__name__,
    simulate.__name__,
]

__version__ = '0.1.0'
