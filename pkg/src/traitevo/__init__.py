"""Trait-structured eco-evolutionary models with the infinitesimal reproduction operator."""

from .config import ScenarioConfig, load_config, parse_config
from .experiments import RunResult, execute
from .grid import DensityState, Grid1D
from .models import PredatorPreySpec, SingleSpeciesSpec
from .reproduction import SegregationKernel, reproduce_fast, reproduce_reference
from .stepper import SchemeConfig, run_to_horizon

__version__ = "0.1.0"

__all__ = [
    "DensityState", "Grid1D", "PredatorPreySpec", "RunResult", "ScenarioConfig",
    "SchemeConfig", "SegregationKernel", "SingleSpeciesSpec", "execute", "load_config",
    "parse_config", "reproduce_fast", "reproduce_reference", "run_to_horizon",
]
