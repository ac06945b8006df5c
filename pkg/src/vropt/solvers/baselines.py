"""Baseline solvers: SAGA, SVRG, and deterministic accelerated gradient.

All three minimize F(x) = sum_i g_i(x) over the problem's feasible set and
use full component gradients (strong convexity included), uniform sampling,
and a single tunable step size.  Default steps follow the standard rates for
the mean-form objective translated to the sum form; the tuning grid scales
them without changing the update structure.
"""

from __future__ import annotations

import math

import numpy as np

from ..problems import FiniteSumProblem
from ..sampling import SeededRng, uniform_distribution
from .trace import ConvergenceTrace, Recorder


def saga_default_step(problem: FiniteSumProblem) -> float:
    # 1/(2(mu n + L)) for the mean of f_i = m g_i, which have smoothness m L_i
    return 1.0 / (2.0 * (problem.mu_total + problem.m * float(problem.L.max())))


def svrg_default_step(problem: FiniteSumProblem) -> float:
    return 1.0 / (4.0 * problem.m * float(problem.L.max()))


class SagaEngine:
    """Gradient table + running sum; one counted call per iteration after the fill."""

    def __init__(self, problem, step, rng, x0):
        self.problem = problem
        self.step = step
        self.rng = rng
        self.dist = uniform_distribution(problem.m)
        self.x = np.array(x0, dtype=np.float64)
        self.table = np.empty((problem.m, problem.dim))
        for i in range(problem.m):
            self.table[i] = problem.component_grad(i, self.x)
        self.table_sum = self.table.sum(axis=0)
        self.iterations = 0

    def advance(self, n_iters):
        p, gamma = self.problem, self.problem.gamma
        for _ in range(n_iters):
            j = self.dist.sample(self.rng)
            g = p.component_grad(j, self.x)
            direction = p.m * (g - self.table[j]) + self.table_sum
            self.x = gamma.project(self.x - self.step / p.m * direction)
            self.table_sum += g - self.table[j]
            self.table[j] = g
            self.iterations += 1
            if self.iterations % p.m == 0:
                self.table_sum = self.table.sum(axis=0)


class SvrgEngine:
    """Snapshot full gradient per epoch of 2m inner steps; last-iterate snapshots."""

    def __init__(self, problem, step, rng, x0):
        self.problem = problem
        self.step = step
        self.rng = rng
        self.dist = uniform_distribution(problem.m)
        self.x = np.array(x0, dtype=np.float64)
        self.iterations = 0
        self.epoch_len = 2 * problem.m
        self._take_snapshot()

    def _take_snapshot(self):
        p = self.problem
        self.snapshot = self.x.copy()
        self.snapshot_grad = np.zeros(p.dim)
        self.snapshot_table = np.empty((p.m, p.dim))
        for i in range(p.m):
            gi = p.component_grad(i, self.snapshot)
            self.snapshot_table[i] = gi
            self.snapshot_grad += gi

    def advance(self, n_iters):
        p, gamma = self.problem, self.problem.gamma
        for _ in range(n_iters):
            j = self.dist.sample(self.rng)
            g = p.component_grad(j, self.x)
            direction = p.m * (g - self.snapshot_table[j]) + self.snapshot_grad
            self.x = gamma.project(self.x - self.step / p.m * direction)
            self.iterations += 1
            if self.iterations % self.epoch_len == 0:
                self._take_snapshot()


class AgdEngine:
    """Nesterov's method for strongly convex F; m counted calls per iteration."""

    def __init__(self, problem, step_scale, x0, L=None, mu=None):
        self.problem = problem
        self.L = (L if L is not None else problem.smoothness_bound()) / step_scale
        self.mu = mu if mu is not None else problem.mu_total
        kappa = max(self.L / self.mu, 1.0)
        self.momentum = (math.sqrt(kappa) - 1.0) / (math.sqrt(kappa) + 1.0)
        self.x = np.array(x0, dtype=np.float64)
        self.y = self.x.copy()
        self.iterations = 0

    def _full_grad(self, z):
        p = self.problem
        g = np.zeros(p.dim)
        for i in range(p.m):
            g += p.component_grad(i, z)
        return g

    def advance(self, n_iters):
        gamma = self.problem.gamma
        for _ in range(n_iters):
            g = self._full_grad(self.y)
            x_next = gamma.project(self.y - g / self.L)
            self.y = x_next + self.momentum * (x_next - self.x)
            self.x = x_next
            self.iterations += 1


def _run_engine(
    name,
    problem,
    engine_factory,
    calls_per_iter,
    *,
    seed,
    x0,
    max_passes,
    gap_tol,
    dist_tol,
    f_star,
    x_star,
    params,
    extra_metrics=None,
):
    x0 = np.zeros(problem.dim) if x0 is None else np.asarray(x0, dtype=np.float64)
    trace = ConvergenceTrace(name, seed, params)
    rec = Recorder(
        trace,
        problem,
        f_star=f_star,
        x_star=x_star,
        gap_tol=gap_tol,
        dist_tol=dist_tol,
        max_passes=max_passes,
        extra_metrics=extra_metrics,
    )
    rec.record(0, x0)
    if rec.should_stop():
        rec.finalize()
        trace.final_x = x0
        return trace
    engine = engine_factory(x0)
    m = problem.m
    if problem.counter.total > 0:
        rec.record(0, engine.x)
    while not rec.should_stop():
        target = (math.floor(problem.counter.total / m) + 1) * m
        iters = max(1, math.ceil((target - problem.counter.total) / calls_per_iter))
        engine.advance(iters)
        rec.record(engine.iterations, engine.x)
    rec.finalize()
    trace.final_x = np.array(engine.x)
    return trace


def run_saga(
    problem: FiniteSumProblem,
    step: float | None = None,
    *,
    seed: int = 0,
    x0=None,
    max_passes: float = 100.0,
    gap_tol=None,
    dist_tol=None,
    f_star=None,
    x_star=None,
    step_scale: float = 1.0,
    use_kernel: bool | None = None,
) -> ConvergenceTrace:
    step = (saga_default_step(problem) if step is None else step) * step_scale
    rng = SeededRng(seed)

    def factory(x0v):
        from .. import _kernels

        if (use_kernel if use_kernel is not None else _kernels.HAVE_COMPILED) and \
                _kernels.HAVE_COMPILED and hasattr(problem, "glm_core"):
            return _kernels.GlmSagaEngine(problem, step, rng, x0v)
        return SagaEngine(problem, step, rng, x0v)

    return _run_engine(
        "saga", problem, factory, 1,
        seed=seed, x0=x0, max_passes=max_passes, gap_tol=gap_tol, dist_tol=dist_tol,
        f_star=f_star, x_star=x_star, params={"step": step},
    )


def run_svrg(
    problem: FiniteSumProblem,
    step: float | None = None,
    *,
    seed: int = 0,
    x0=None,
    max_passes: float = 100.0,
    gap_tol=None,
    dist_tol=None,
    f_star=None,
    x_star=None,
    step_scale: float = 1.0,
    use_kernel: bool | None = None,
) -> ConvergenceTrace:
    step = (svrg_default_step(problem) if step is None else step) * step_scale
    rng = SeededRng(seed)

    def factory(x0v):
        from .. import _kernels

        if (use_kernel if use_kernel is not None else _kernels.HAVE_COMPILED) and \
                _kernels.HAVE_COMPILED and hasattr(problem, "glm_core"):
            return _kernels.GlmSvrgEngine(problem, step, rng, x0v)
        return SvrgEngine(problem, step, rng, x0v)

    # inner steps cost 1 call; the per-epoch snapshot adds m in one burst
    return _run_engine(
        "svrg", problem, factory, 1,
        seed=seed, x0=x0, max_passes=max_passes, gap_tol=gap_tol, dist_tol=dist_tol,
        f_star=f_star, x_star=x_star, params={"step": step},
    )


def run_agd(
    problem: FiniteSumProblem,
    *,
    seed: int = 0,
    x0=None,
    max_passes: float = 100.0,
    gap_tol=None,
    dist_tol=None,
    f_star=None,
    x_star=None,
    step_scale: float = 1.0,
    L: float | None = None,
    mu: float | None = None,
) -> ConvergenceTrace:
    """Deterministic accelerated gradient; the seed only labels the trace."""
    return _run_engine(
        "agd", problem, lambda x0v: AgdEngine(problem, step_scale, x0v, L=L, mu=mu),
        problem.m,
        seed=seed, x0=x0, max_passes=max_passes, gap_tol=gap_tol, dist_tol=dist_tol,
        f_star=f_star, x_star=x_star, params={"step_scale": step_scale},
    )
