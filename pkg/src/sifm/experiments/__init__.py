"""Scenario configuration, simulation worlds, metrics and the experiment runner."""

from .config import (
    Architecture,
    ConfigError,
    MobilityMode,
    MoverPlan,
    PolicyName,
    ScenarioConfig,
    map_offload_to_movers,
    offload_budget_bps,
)
from .metrics import CSV_COLUMNS, SummaryRow, compute_handover_delay, rows_to_csv, summarize
from .runner import DEFAULT_REPEATS, ScenarioResult, expand_grid, load_grid, run_scenario, sweep

__all__ = [
    "Architecture", "ConfigError", "MobilityMode", "MoverPlan", "PolicyName", "ScenarioConfig",
    "map_offload_to_movers", "offload_budget_bps", "CSV_COLUMNS", "SummaryRow",
    "compute_handover_delay", "rows_to_csv", "summarize", "DEFAULT_REPEATS", "ScenarioResult",
    "expand_grid", "load_grid", "run_scenario", "sweep",
]
