"""Python access to the simulation core."""

import json as _json

from ._core import (
    ConfigError,
    SimulationError,
    expected_costs,
    fit_workload,
    makespan,
    partition_sizes,
    report,
    report_time,
    schedule_greedy,
    select_clients,
    uniform_division,
)
from ._core import run_experiment as _run_experiment


def run_experiment(spec, out_dir):
    """Run one experiment. `spec` is a dict or JSON text; returns the summary dict."""
    text = spec if isinstance(spec, str) else _json.dumps(spec)
    return _json.loads(_run_experiment(text, str(out_dir)))


__all__ = [
    "ConfigError",
    "SimulationError",
    "expected_costs",
    "fit_workload",
    "makespan",
    "partition_sizes",
    "report",
    "report_time",
    "run_experiment",
    "schedule_greedy",
    "select_clients",
    "uniform_division",
]
