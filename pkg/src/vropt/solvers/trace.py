"""Convergence traces, metric recording, and stop rules shared by all solvers.

A trace records one row per effective pass (m component-gradient calls).
Metric evaluations (objective, distance, infeasibility) never touch the
oracle counters, so the ``grad_calls`` column reconciles exactly with the
per-component ledger.  Wall time is kept on the in-memory trace only; the
harness omits it from CSV output so repeated seeded runs stay byte-identical.
"""

from __future__ import annotations

import math
import time

import numpy as np

TRACE_COLUMNS = ("iteration", "grad_calls", "value_calls", "passes", "gap", "dist", "infeas")

DIVERGENCE_FACTOR = 10.0
HARD_DIVERGENCE_FACTOR = 1e6


class ConvergenceTrace:
    """Time series of oracle counts and optimality metrics for one run."""

    def __init__(self, solver: str, seed: int, params: dict | None = None):
        self.solver = solver
        self.seed = seed
        self.params = dict(params or {})
        self.rows: list[dict] = []
        self.flags = {"reached_tol": False, "budget_exhausted": False, "diverged": False}
        self.final_x: np.ndarray | None = None

    def append(self, row: dict) -> None:
        if self.rows and row["grad_calls"] < self.rows[-1]["grad_calls"]:
            raise ValueError("gradient-call count must be nondecreasing")
        self.rows.append(row)

    def column(self, name: str) -> np.ndarray:
        return np.array([r.get(name, math.nan) for r in self.rows], dtype=np.float64)

    @property
    def last(self) -> dict:
        return self.rows[-1]

    def passes_to_gap(self, tol: float) -> float:
        """Effective passes at the first record with gap <= tol (inf if never)."""
        for r in self.rows:
            g = r.get("gap")
            if g is not None and not math.isnan(g) and g <= tol:
                return r["passes"]
        return math.inf


class Recorder:
    """Appends per-pass rows, tracks divergence, and evaluates stop rules."""

    def __init__(
        self,
        trace: ConvergenceTrace,
        problem,
        *,
        f_star: float | None = None,
        x_star: np.ndarray | None = None,
        gap_tol: float | None = None,
        dist_tol: float | None = None,
        max_passes: float = math.inf,
        extra_metrics=None,
    ):
        self.trace = trace
        self.problem = problem
        self.f_star = f_star
        self.x_star = x_star
        self.gap_tol = gap_tol
        self.dist_tol = dist_tol
        self.max_passes = max_passes
        self.extra_metrics = extra_metrics
        self._t0 = time.perf_counter()
        self._gap0: float | None = None
        # audit support: small problems keep iterate copies and per-component
        # call snapshots on every row so lower-bound floors can be replayed
        self.keep_iterates = problem.m <= 64 and getattr(problem, "dim", 1 << 30) <= 4096

    def record(self, iteration: int, x: np.ndarray, objective: float | None = None) -> dict:
        c = self.problem.counter
        obj = self.problem.objective(x) if objective is None else objective
        gap = obj - self.f_star if self.f_star is not None else math.nan
        dist = float(np.linalg.norm(x - self.x_star)) if self.x_star is not None else math.nan
        row = {
            "iteration": iteration,
            "grad_calls": c.total,
            "value_calls": c.value_calls,
            "passes": c.total / self.problem.m,
            "gap": gap,
            "dist": dist,
            "infeas": math.nan,
            "objective": obj,
            "wall_time": time.perf_counter() - self._t0,
        }
        if self.keep_iterates:
            row["x"] = np.array(x)
            row["component_grads"] = c.snapshot()
        if self.extra_metrics is not None:
            row.update(self.extra_metrics(x))
        self.trace.append(row)
        # in-run guard: transients may legitimately overshoot the initial gap
        # (anchor error converting into iterate error), so only genuine
        # explosions stop a run early; the 10x-from-start classification
        # happens in finalize()
        if not math.isnan(gap):
            if self._gap0 is None:
                self._gap0 = max(abs(gap), 1e-300)
            elif not math.isfinite(gap) or gap > HARD_DIVERGENCE_FACTOR * self._gap0:
                self.trace.flags["diverged"] = True
        if not math.isfinite(obj):
            self.trace.flags["diverged"] = True
        return row

    def finalize(self) -> None:
        """Classify the finished run: above 10x the starting gap means diverged."""
        row = self.trace.last
        gap = row.get("gap", math.nan)
        if (
            self._gap0 is not None
            and not math.isnan(gap)
            and (not math.isfinite(gap) or gap > DIVERGENCE_FACTOR * self._gap0)
        ):
            self.trace.flags["diverged"] = True

    def should_stop(self) -> bool:
        """True once a tolerance is met, the budget is spent, or the run diverged."""
        row = self.trace.last
        if self.gap_tol is not None and not math.isnan(row["gap"]) and row["gap"] <= self.gap_tol:
            self.trace.flags["reached_tol"] = True
            return True
        if self.dist_tol is not None and not math.isnan(row["dist"]) and row["dist"] <= self.dist_tol:
            self.trace.flags["reached_tol"] = True
            return True
        if self.trace.flags["diverged"]:
            return True
        if row["passes"] >= self.max_passes:
            if self.gap_tol is not None or self.dist_tol is not None:
                self.trace.flags["budget_exhausted"] = True
            return True
        return False
