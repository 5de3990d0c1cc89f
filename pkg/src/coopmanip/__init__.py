"""Planar cooperative pushing: adaptive object control, contact force allocation and agent MPC."""

__version__ = "0.1.0"

from .dynamics import ObjectParams, ObjectState, Wrench
from .scenario import ScenarioConfig, builtin_scenario, load_scenario
from .sim import RunLog, SimulationDiverged, run_scenario

__all__ = ["ObjectParams", "ObjectState", "Wrench", "ScenarioConfig", "builtin_scenario", "load_scenario",
           "RunLog", "SimulationDiverged", "run_scenario", "__version__"]
