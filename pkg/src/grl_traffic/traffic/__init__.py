"""Microscopic traffic simulation: IDM car following, lane changes, two scenarios."""

from .core import FIGURE_EIGHT, HIGHWAY, Intention, Kind, ScenarioConfig, SimEvents, VehicleState
from .sim import FigureEightSim, HighwaySim

__all__ = ["FIGURE_EIGHT", "HIGHWAY", "Intention", "Kind", "ScenarioConfig", "SimEvents",
           "VehicleState", "FigureEightSim", "HighwaySim"]
