"""Microgrid energy management with a grid-friendly tie-line.

A rolling-horizon mixed-integer dispatch schedules generators, storage and
grid exchange every 15 minutes; a 4-second storage controller then holds
the tie-line at its scheduled value against forecast error.
"""

from .engine import SimulationResult, simulate
from .lp import LinearProgram, LpSolution, Row, solve_lp
from .milp import MipSolution, MixedProgram, solve_mip
from .model import ConfigError, EnergyStorage, Generator, GridLink, MicrogridModel, load_model, load_model_file
from .scenario import ForecastSeries, Scenario, load_forecast, make_scenario

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "EnergyStorage",
    "ForecastSeries",
    "Generator",
    "GridLink",
    "LinearProgram",
    "LpSolution",
    "MicrogridModel",
    "MipSolution",
    "MixedProgram",
    "Row",
    "Scenario",
    "SimulationResult",
    "load_forecast",
    "load_model",
    "load_model_file",
    "make_scenario",
    "simulate",
    "solve_lp",
    "solve_mip",
]
