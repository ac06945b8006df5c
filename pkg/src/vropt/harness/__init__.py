"""Experiment harness: configs, runner, presets, tuning, plotting, CLI."""

from .config import (
    ConfigError,
    ExperimentConfig,
    GridSpec,
    StopRule,
    compute_reference,
    make_multiblock,
    parse_config,
    problem_from_spec,
)
from .plot import TraceSeries, emit_plot, series_from_csv
from .runner import DivergedError, preset, run, run_solver, trace_to_csv, tune_grid, write_trace

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "GridSpec",
    "StopRule",
    "parse_config",
    "problem_from_spec",
    "make_multiblock",
    "compute_reference",
    "run",
    "run_solver",
    "tune_grid",
    "preset",
    "trace_to_csv",
    "write_trace",
    "DivergedError",
    "TraceSeries",
    "emit_plot",
    "series_from_csv",
]
