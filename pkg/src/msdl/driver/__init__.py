"""Configuration, stage recursion, reports and the command line."""

from .config import RunConfig, build_config, load_config
from .pipeline import HomotopyPrinciple, RunResult, StageReport, run_homotopy_principle
from .report import export_mesh, export_report, load_report

__all__ = [
    "RunConfig",
    "build_config",
    "load_config",
    "HomotopyPrinciple",
    "RunResult",
    "StageReport",
    "run_homotopy_principle",
    "export_mesh",
    "export_report",
    "load_report",
]
