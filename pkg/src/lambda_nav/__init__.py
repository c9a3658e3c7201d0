"""Risk-aware navigation on a Lambda-Field: mapping, expected-risk evaluation,
risk-constrained receding-horizon planning, and a closed-loop simulator."""

from .config import ScenarioConfig, dump_config, load_config
from .dem import ElevationMap, Outcome
from .errors import (ConfigError, EmptyReference, InvalidSteering, LambdaNavError, NonPositiveRadius,
                     OutOfGrid, ParseError, UnobservedCell, ValidationError)
from .grid import CellIndex, GridSpec, cell_center, raster_path, transverse_cells, world_to_cell
from .lambda_field import LambdaField
from .planner import ControlInput, PlannerConfig, VehicleState, plan, rollout, step_model
from .risk import RiskProfile, WheelModel, collision_energy, expected_path_risk
from .sim import ScenarioResult, TraceRecord, run_scenario

__version__ = "0.1.0"

__all__ = [
    "CellIndex", "ConfigError", "ControlInput", "ElevationMap", "EmptyReference", "GridSpec",
    "InvalidSteering", "LambdaField", "LambdaNavError", "NonPositiveRadius", "OutOfGrid", "Outcome",
    "ParseError", "PlannerConfig", "RiskProfile", "ScenarioConfig", "ScenarioResult", "TraceRecord",
    "UnobservedCell", "ValidationError", "VehicleState", "WheelModel", "cell_center", "collision_energy",
    "dump_config", "expected_path_risk", "load_config", "plan", "raster_path", "rollout", "run_scenario",
    "step_model", "transverse_cells", "world_to_cell",
]
