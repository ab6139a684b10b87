"""Configuration, scenarios, verification checks, reports and the CLI."""

from ..stats import slope_regress
from .checks import CHECKS, CheckResult, CheckRow, run_check
from .config import DEFAULTS, Config, ConfigError, load_config, parse_config
from .report import CSV_COLUMNS, VerificationReport, read_report, run_verification_suite
from .scenarios import FAMILIES, ScenarioSpec, forcing_tensor, generate_initial_data

__all__ = [
    "CHECKS", "CSV_COLUMNS", "CheckResult", "CheckRow", "Config", "ConfigError", "DEFAULTS",
    "FAMILIES", "ScenarioSpec", "VerificationReport", "forcing_tensor",
    "generate_initial_data", "load_config", "parse_config", "read_report", "run_check",
    "run_verification_suite", "slope_regress",
]
