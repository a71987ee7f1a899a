"""Discrete-event simulator for dense 802.11 WLAN deployments with analytic cross-checks."""
from .engine import EventEngine, EventKind, RandomStream
from .network import Simulation, simulate
from .phy import PhyMacParams
from .scenario import ScenarioConfig, StatsReport, parse_scenario

__all__ = ["EventEngine", "EventKind", "RandomStream", "Simulation", "simulate",
           "PhyMacParams", "ScenarioConfig", "StatsReport", "parse_scenario"]
