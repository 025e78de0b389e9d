"""Joint beamforming and movable-antenna placement under interference caps."""

from .core import (Apv, ApvError, Beamformer, ChannelError, ConfigError, PathSet,
                   ScenarioConfig, SolveReport, dbm_to_watt, load_config, seeded_rng,
                   watt_to_dbm)
from .channel import Scenario, channel_matrix, channel_vector, generate_scenario
from .ao import SCHEMES, ao_solve, run_scheme

__version__ = "0.1.0"

__all__ = [
    "Apv", "ApvError", "Beamformer", "ChannelError", "ConfigError", "PathSet",
    "ScenarioConfig", "SolveReport", "Scenario", "SCHEMES", "ao_solve", "run_scheme",
    "channel_matrix", "channel_vector", "generate_scenario", "dbm_to_watt",
    "watt_to_dbm", "load_config", "seeded_rng",
]
