"""Iterative solvers and their convergence traces."""

from .arcd import SeparableBlockProblem, choose_elimination, run_arcd_eliminated
from .baselines import AgdEngine, run_agd, run_saga, run_svrg
from .katyusha import FiniteSumEstimator, KatyushaConfig, KatyushaEngine, run_katyusha
from .ssnm import (
    SsnmConfig,
    SsnmEngine,
    lyapunov_diagnostics,
    run_ssnm,
    run_uniform_ssnm,
    ssnm_parameters,
    uniform_ssnm_parameters,
)
from .trace import ConvergenceTrace, Recorder, TRACE_COLUMNS

__all__ = [
    "ConvergenceTrace",
    "Recorder",
    "TRACE_COLUMNS",
    "SsnmConfig",
    "SsnmEngine",
    "ssnm_parameters",
    "uniform_ssnm_parameters",
    "lyapunov_diagnostics",
    "run_ssnm",
    "run_uniform_ssnm",
    "KatyushaConfig",
    "KatyushaEngine",
    "FiniteSumEstimator",
    "run_katyusha",
    "run_saga",
    "run_svrg",
    "run_agd",
    "AgdEngine",
    "SeparableBlockProblem",
    "choose_elimination",
    "run_arcd_eliminated",
]
