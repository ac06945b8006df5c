"""Compiled solver loops with a pure-Python fallback.

When the extension built from ``_glmloops.pyx`` is importable, problems
exposing ``glm_core()`` run their inner loops in C; otherwise the generic
object-oracle engines in ``vropt.solvers`` are used.  Both paths consume the
same splitmix64 stream and take identical update steps, so sampled index
sequences match exactly and iterates agree to floating-point reordering
(see tests/test_kernels.py and benchmarks/bench_kernels.py).
"""

from __future__ import annotations

import numpy as np

try:
    from . import _glmloops

    HAVE_COMPILED = True
except ImportError:  # pure-Python fallback
    _glmloops = None
    HAVE_COMPILED = False


_KIND_FLAGS = {"squared": 0, "logistic": 1}


def _hat_coefs(kind, A, b, w, x):
    z = A @ x
    if kind == "squared":
        return 2.0 * w / A.shape[0] * (z - b)
    return -w / A.shape[0] * b / (1.0 + np.exp(b * z))


class GlmSsnmEngine:
    """Drop-in replacement for solvers.ssnm.SsnmEngine on dense GLM data."""

    def __init__(self, problem, config, rng, x0):
        A, b, w, ridge, kind = problem.glm_core()
        self.problem = problem
        self.config = config
        self.rng = rng
        self._data = (A, b, w)
        self._kind = _KIND_FLAGS[kind]
        m = problem.m
        self.x = np.array(x0, dtype=np.float64)
        self.phi = np.tile(self.x, (m, 1))
        coefs = _hat_coefs(kind, A, b, w, self.x)
        self.grad_table = np.ascontiguousarray(coefs[:, None] * A)
        self.running_sum = self.grad_table.sum(axis=0)
        problem.counter.record_grads_all()
        self._cum = np.ascontiguousarray(config.pi.cumsum())
        self._cum[-1] = 1.0
        self.iterations = 0

    def advance(self, n_iters):
        A, b, w = self._data
        self.rng.state = _glmloops.ssnm_iters(
            self._kind, A, b, w,
            self.x, self.phi, self.grad_table, self.running_sum,
            self._cum, self.config.pi, self.config.tau,
            self.config.eta, self.problem.mu_total,
            self.problem.counter.grad_calls,
            self.rng.state, n_iters, self.iterations,
        )
        self.iterations += n_iters


class GlmSagaEngine:
    def __init__(self, problem, step, rng, x0):
        A, b, w, ridge, kind = problem.glm_core()
        self.problem = problem
        self.step = step
        self.rng = rng
        self._data = (A, b, w, ridge)
        self._kind = _KIND_FLAGS[kind]
        self.x = np.array(x0, dtype=np.float64)
        coefs = _hat_coefs(kind, A, b, w, self.x)
        self.table = np.ascontiguousarray(coefs[:, None] * A + (ridge / problem.m) * self.x)
        self.table_sum = self.table.sum(axis=0)
        problem.counter.record_grads_all()
        self._cum = np.ascontiguousarray(np.full(problem.m, 1.0 / problem.m).cumsum())
        self._cum[-1] = 1.0
        self.iterations = 0

    def advance(self, n_iters):
        A, b, w, ridge = self._data
        self.rng.state = _glmloops.saga_iters(
            self._kind, A, b, w, ridge,
            self.x, self.table, self.table_sum, self._cum, self.step,
            self.problem.counter.grad_calls,
            self.rng.state, n_iters, self.iterations,
        )
        self.iterations += n_iters


class GlmSvrgEngine:
    def __init__(self, problem, step, rng, x0):
        A, b, w, ridge, kind = problem.glm_core()
        self.problem = problem
        self.step = step
        self.rng = rng
        self._data = (A, b, w, ridge)
        self._kind = _KIND_FLAGS[kind]
        self.x = np.array(x0, dtype=np.float64)
        self.snapshot = self.x.copy()
        coefs = _hat_coefs(kind, A, b, w, self.snapshot)
        self.snapshot_table = np.ascontiguousarray(
            coefs[:, None] * A + (ridge / problem.m) * self.snapshot
        )
        self.snapshot_grad = self.snapshot_table.sum(axis=0)
        problem.counter.record_grads_all()
        self._cum = np.ascontiguousarray(np.full(problem.m, 1.0 / problem.m).cumsum())
        self._cum[-1] = 1.0
        self.epoch_len = 2 * problem.m
        self.iterations = 0

    def advance(self, n_iters):
        A, b, w, ridge = self._data
        self.rng.state = _glmloops.svrg_iters(
            self._kind, A, b, w, ridge,
            self.x, self.snapshot, self.snapshot_table, self.snapshot_grad,
            self._cum, self.step,
            self.problem.counter.grad_calls,
            self.rng.state, n_iters, self.iterations, self.epoch_len,
        )
        self.iterations += n_iters


class GlmKatyushaEngine:
    def __init__(self, problem, provider, config, rng, x0):
        A, b, w, ridge, kind = problem.glm_core()
        self.problem = problem
        self.provider = provider
        self.config = config
        self.rng = rng
        self._data = (A, b, w)
        self._kind = _KIND_FLAGS[kind]
        self.y = np.array(x0, dtype=np.float64)
        self.z = self.y.copy()
        self.x_tilde = self.y.copy()
        m, n = A.shape
        self.ctab = np.zeros(m)
        self.S = np.zeros(n)
        self._y_accum = np.zeros(n)
        self._weights = (1.0 + config.alpha * config.sigma) ** np.arange(config.epoch_len)
        self._weight_sum = float(self._weights.sum())
        pi = provider.distribution.probabilities
        self._pi = pi
        self._cum = np.ascontiguousarray(pi.cumsum())
        self._cum[-1] = 1.0
        self._epoch_pos = 0
        self.iterations = 0

    @property
    def x(self):
        return self.y

    def advance(self, n_iters):
        A, b, w = self._data
        cfg = self.config
        self.rng.state, self._epoch_pos = _glmloops.katyusha_iters(
            self._kind, A, b, w,
            self.y, self.z, self.x_tilde, self.ctab, self.S,
            self._y_accum, self._weights, self._weight_sum,
            self._cum, self._pi,
            cfg.tau1, cfg.tau2, cfg.alpha, cfg.sigma, 3.0 * cfg.L_prime,
            self.problem.counter.grad_calls,
            self.rng.state, n_iters, self._epoch_pos,
        )
        self.iterations += n_iters
