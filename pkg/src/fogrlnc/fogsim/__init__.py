"""City-scale offloading simulator: vehicles, RSUs, fog orchestrators."""

from .montecarlo import GLOBAL, MetricsReport, ReportError, emit_report, run_monte_carlo, summary_table
from .scenario import (
    Scenario,
    ScenarioError,
    Trajectory,
    VehicleSpec,
    bundled_scenario_path,
    load_scenario,
    parse_scenario,
)
from .world import CloudSink, FogOrchestrator, RecoveryEvent, World, fo_ingest, step

__all__ = [
    "GLOBAL",
    "CloudSink",
    "FogOrchestrator",
    "MetricsReport",
    "RecoveryEvent",
    "ReportError",
    "Scenario",
    "ScenarioError",
    "Trajectory",
    "VehicleSpec",
    "World",
    "bundled_scenario_path",
    "emit_report",
    "fo_ingest",
    "load_scenario",
    "parse_scenario",
    "run_monte_carlo",
    "step",
    "summary_table",
]
