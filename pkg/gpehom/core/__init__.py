"""Core subpackage: engine, models, validate, config."""

from .models import ProblemSpec, TraceConfig, RunConfig, RunReport, PathSummary, CheckSummary
from .validate import ReportValidator, validate_report, ValidationResult
from .config import ConfigError, GpehomSettings
from .engine import GPEHomotopyEngine

__all__ = [
    "GPEHomotopyEngine",
    "ReportValidator",
    "validate_report",
    "ValidationResult",
    "ConfigError",
    "GpehomSettings",
    "ProblemSpec",
    "TraceConfig",
    "RunConfig",
    "RunReport",
    "PathSummary",
    "CheckSummary",
]
