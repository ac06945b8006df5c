"""Snapshot-based accelerated solver with three-point coupling.

Each epoch memorizes a snapshot, then runs 2m inner iterations of

    x^{k+1} = tau1 z^k + tau2 xt + (1 - tau1 - tau2) y^k
    z^{k+1} = argmin (1/(2 alpha))||z - z^k||^2 + <g~, z> + h(z)
    y^{k+1} = argmin (3 L'/2)||y - x^{k+1}||^2 + <g~, y> + h(y)

with h(x) = (sigma/2)||x||^2, closing the epoch with the weighted snapshot
xt <- weighted mean of the epoch's y iterates, weights (1 + alpha sigma)^j.

The gradient estimate g~ comes from a provider: the finite-sum provider uses
the snapshot-table estimator with pi_i proportional to B_i L_i (plain sums
have B = 1), and the composite providers live in ``vropt.composite``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..problems import FiniteSumProblem, WholeSpace
from ..sampling import SamplingDistribution, SeededRng, katyusha_distribution
from .trace import ConvergenceTrace, Recorder


@dataclass
class KatyushaConfig:
    """tau2 = 1/2, tau1 = min(sqrt(2 m sigma)/sqrt(3 L'), 1/2), alpha = 1/(3 tau1 L')."""

    sigma: float
    L_prime: float
    m: int
    alpha_scale: float = 1.0
    tau1: float = field(init=False)
    tau2: float = field(init=False)
    alpha: float = field(init=False)
    epoch_len: int = field(init=False)

    def __post_init__(self):
        if self.sigma <= 0.0 or self.L_prime <= 0.0:
            raise ValueError("sigma and L' must be positive")
        self.tau2 = 0.5
        self.tau1 = min(math.sqrt(2.0 * self.m * self.sigma) / math.sqrt(3.0 * self.L_prime), 0.5)
        self.alpha = self.alpha_scale / (3.0 * self.tau1 * self.L_prime)
        self.epoch_len = 2 * self.m
        if self.tau1 + self.tau2 > 1.0 + 1e-15:
            raise ValueError("tau1 + tau2 must not exceed 1")

    def describe(self) -> dict:
        return {
            "sigma": self.sigma,
            "L_prime": self.L_prime,
            "tau1": self.tau1,
            "tau2": self.tau2,
            "alpha": self.alpha,
            "alpha_scale": self.alpha_scale,
        }


class FiniteSumEstimator:
    """Snapshot-table estimator for F_hat = sum_i hat_g_i over a finite sum.

    Sampling pi_i = L_i / sum_j L_j (the B = 1 case); the uniform flag
    homogenizes every L_i to max L, reproducing the no-side-information
    baseline with pi_i = 1/m and L' = m max L.
    """

    def __init__(self, problem: FiniteSumProblem, uniform: bool = False):
        self.problem = problem
        L_eff = np.full(problem.m, problem.L.max()) if uniform else problem.L
        self.distribution = katyusha_distribution(np.ones(problem.m), L_eff)
        self.sigma = problem.mu_total
        self.L_prime = float(L_eff.sum())
        self.table = np.empty((problem.m, problem.dim))
        self.table_sum = np.zeros(problem.dim)

    def take_snapshot(self, x_tilde: np.ndarray) -> None:
        p = self.problem
        for i in range(p.m):
            self.table[i] = p.hat_component_grad(i, x_tilde)
        self.table_sum = self.table.sum(axis=0)

    def estimate(self, x: np.ndarray, i: int) -> np.ndarray:
        g = self.problem.hat_component_grad(i, x)
        return self.table_sum + (g - self.table[i]) / self.distribution.probabilities[i]


class KatyushaEngine:
    def __init__(self, provider, config: KatyushaConfig, rng: SeededRng, x0: np.ndarray):
        self.provider = provider
        self.config = config
        self.rng = rng
        self.y = np.array(x0, dtype=np.float64)
        self.z = self.y.copy()
        self.x_tilde = self.y.copy()
        self.iterations = 0
        w = (1.0 + config.alpha * config.sigma) ** np.arange(config.epoch_len)
        self._weights = w
        self._weight_sum = float(w.sum())
        self._epoch_pos = 0
        self._y_accum = np.zeros_like(self.y)

    @property
    def x(self) -> np.ndarray:
        return self.y

    def advance(self, n_iters: int) -> None:
        cfg = self.config
        prov = self.provider
        sigma, alpha, L3 = cfg.sigma, cfg.alpha, 3.0 * cfg.L_prime
        for _ in range(n_iters):
            if self._epoch_pos == 0:
                prov.take_snapshot(self.x_tilde)
                self._y_accum[:] = 0.0
            xk = cfg.tau1 * self.z + cfg.tau2 * self.x_tilde + (1.0 - cfg.tau1 - cfg.tau2) * self.y
            i = prov.distribution.sample(self.rng)
            gt = prov.estimate(xk, i)
            self.z = (self.z - alpha * gt) / (1.0 + alpha * sigma)
            self.y = (L3 * xk - gt) / (L3 + sigma)
            self._y_accum += self._weights[self._epoch_pos] * self.y
            self._epoch_pos += 1
            self.iterations += 1
            if self._epoch_pos == cfg.epoch_len:
                self.x_tilde = self._y_accum / self._weight_sum
                self._epoch_pos = 0


def run_katyusha(
    problem,
    config: KatyushaConfig | None = None,
    *,
    seed: int = 0,
    x0=None,
    max_passes: float = 100.0,
    gap_tol=None,
    dist_tol=None,
    f_star=None,
    x_star=None,
    uniform: bool = False,
    estimator: str = "general",
    alpha_scale: float = 1.0,
    use_kernel: bool | None = None,
) -> ConvergenceTrace:
    """Dispatch on problem type: finite sums use the snapshot-table estimator,
    composite problems one of the two chain-rule estimators ("general" or
    "reduced").  Requires an unconstrained domain.
    """
    from ..composite import CompositeProblem, make_katyusha_provider

    if isinstance(problem, CompositeProblem):
        provider = make_katyusha_provider(problem, estimator)
        name = f"katyusha_{estimator}"
    elif isinstance(problem, FiniteSumProblem):
        if not isinstance(problem.gamma, WholeSpace):
            raise ValueError("this solver handles unconstrained problems only")
        provider = FiniteSumEstimator(problem, uniform=uniform)
        name = "katyusha_uniform" if uniform else "katyusha"
    else:
        raise TypeError(f"unsupported problem type {type(problem).__name__}")
    if config is None:
        config = KatyushaConfig(provider.sigma, provider.L_prime, problem.m, alpha_scale)
    x0 = np.zeros(problem.dim) if x0 is None else np.asarray(x0, dtype=np.float64)
    trace = ConvergenceTrace(name, seed, config.describe())
    rec = Recorder(
        trace, problem,
        f_star=f_star, x_star=x_star,
        gap_tol=gap_tol, dist_tol=dist_tol, max_passes=max_passes,
    )
    rec.record(0, x0)
    if rec.should_stop():
        rec.finalize()
        trace.final_x = x0
        return trace
    rng = SeededRng(seed)
    from .. import _kernels

    if (
        (use_kernel if use_kernel is not None else _kernels.HAVE_COMPILED)
        and _kernels.HAVE_COMPILED
        and hasattr(problem, "glm_core")
        and isinstance(provider, FiniteSumEstimator)
    ):
        engine = _kernels.GlmKatyushaEngine(problem, provider, config, rng, x0)
    else:
        engine = KatyushaEngine(provider, config, rng, x0)
    m = problem.m
    while not rec.should_stop():
        target = (math.floor(problem.counter.total / m) + 1) * m
        engine.advance(_iters_to_next_record(engine, target - problem.counter.total))
        rec.record(engine.iterations, engine.x)
    rec.finalize()
    trace.final_x = np.array(engine.x)
    trace.x_tilde = np.array(engine.x_tilde)
    return trace


def _iters_to_next_record(engine, calls_needed: int) -> int:
    """Inner iterations until ~calls_needed more gradient calls happen.

    An epoch start costs m snapshot calls at once; inner iterations cost the
    provider's per-step call count (1 for finite sums, 2 for the reduced
    composite estimator).
    """
    per_iter = getattr(engine.provider, "calls_per_iter", 1)
    cfg = engine.config
    pos = engine._epoch_pos
    iters = 0
    calls = 0
    while calls < calls_needed:
        if pos == 0:
            calls += cfg.m
            if calls >= calls_needed and iters > 0:
                break
        iters += 1
        calls += per_iter
        pos = (pos + 1) % cfg.epoch_len
    return max(iters, 1)
