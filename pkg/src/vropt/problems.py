"""Problem families and the counted gradient-oracle interface.

A finite-sum problem is ``F(x) = sum_i g_i(x)`` minimized over a closed
convex set, where each ``g_i`` is ``L_i``-smooth and ``mu_i``-strongly
convex.  Solvers only ever touch components through the counted oracle
methods here, so the per-component call ledger ``K_i`` is authoritative for
every complexity claim.

The split view used by the accelerated solvers writes
``g_i = hat_g_i + (mu_i/2)||x||^2`` with ``hat_g_i`` convex and
``L_i``-smooth, and pools the strongly convex parts into
``h(x) = (mu/2)||x||^2`` with ``mu = sum_i mu_i``.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class ComponentSpec:
    """Smoothness/strong-convexity constants of one component."""

    L: float
    mu: float

    def __post_init__(self):
        if not self.L > 0.0:
            raise ValueError(f"smoothness constant must be positive, got {self.L}")
        if self.mu < 0.0 or self.mu > self.L:
            raise ValueError(f"need 0 <= mu <= L, got mu={self.mu}, L={self.L}")


class OracleCounter:
    """Per-component gradient-call counts plus value/partial tallies.

    Increments are lock-guarded so read-only problem data can be shared by
    concurrently running, independently seeded experiments; a single solver
    run is strictly sequential and typically owns its counter outright.
    """

    def __init__(self, m: int):
        self.grad_calls = np.zeros(m, dtype=np.int64)
        self.value_calls = 0
        self.partial_calls = 0
        self._lock = threading.Lock()

    def record_grad(self, i: int, n: int = 1) -> None:
        with self._lock:
            self.grad_calls[i] += n

    def record_grads_all(self) -> None:
        with self._lock:
            self.grad_calls += 1

    def record_values(self, n: int) -> None:
        with self._lock:
            self.value_calls += n

    def record_partials(self, n: int) -> None:
        with self._lock:
            self.partial_calls += n

    @property
    def total(self) -> int:
        return int(self.grad_calls.sum())

    def effective_passes(self, m: int | None = None) -> float:
        m = m if m is not None else self.grad_calls.size
        return self.total / m

    def snapshot(self) -> np.ndarray:
        with self._lock:
            return self.grad_calls.copy()


# ---------------------------------------------------------------------------
# Feasible sets


class WholeSpace:
    """Unconstrained domain; projection is the identity."""

    def project(self, x: np.ndarray) -> np.ndarray:
        return x

    def contains(self, x: np.ndarray, tol: float = 1e-12) -> bool:
        return True

    def describe(self) -> dict:
        return {"kind": "whole_space"}


class Ball:
    """Euclidean ball {x : ||x - center|| <= radius}."""

    def __init__(self, center, radius: float):
        if radius <= 0.0:
            raise ValueError("radius must be positive")
        self.center = np.asarray(center, dtype=np.float64)
        self.radius = float(radius)

    def project(self, x: np.ndarray) -> np.ndarray:
        d = x - self.center
        nrm = np.linalg.norm(d)
        if nrm <= self.radius:
            return x
        return self.center + d * (self.radius / nrm)

    def contains(self, x, tol=1e-12):
        return np.linalg.norm(x - self.center) <= self.radius + tol

    def describe(self) -> dict:
        return {"kind": "ball", "center": self.center.tolist(), "radius": self.radius}


class Box:
    """Axis-aligned box {x : lo <= x <= hi}."""

    def __init__(self, lo, hi):
        self.lo = np.asarray(lo, dtype=np.float64)
        self.hi = np.asarray(hi, dtype=np.float64)
        if np.any(self.lo > self.hi):
            raise ValueError("box lower bounds exceed upper bounds")

    def project(self, x: np.ndarray) -> np.ndarray:
        return np.clip(x, self.lo, self.hi)

    def contains(self, x, tol=1e-12):
        return bool(np.all(x >= self.lo - tol) and np.all(x <= self.hi + tol))

    def describe(self) -> dict:
        return {"kind": "box", "lo": self.lo.tolist(), "hi": self.hi.tolist()}


def prox_step(x_k, grad_estimate, eta: float, mu: float, gamma=None) -> np.ndarray:
    """argmin over the feasible set of (mu/2)||x||^2 + <g, x> + ||x-x_k||^2/(2 eta).

    Unconstrained the minimizer is ``(x_k - eta g)/(1 + eta mu)``.  For a
    ball or box the result is the projection of that point: the strongly
    convex term is a multiple of ``||x||^2``, so after completing the square
    the objective is ``(1+eta mu)/(2 eta) ||x - p||^2`` plus a constant, and
    projecting p is exact for any closed convex set.
    """
    if eta <= 0.0:
        raise ValueError("step size eta must be positive")
    p = (x_k - eta * np.asarray(grad_estimate)) / (1.0 + eta * mu)
    if gamma is None or isinstance(gamma, WholeSpace):
        return p
    return gamma.project(p)


# ---------------------------------------------------------------------------
# Finite-sum base class


class FiniteSumProblem:
    """Base class: m counted component oracles over a shared iterate.

    Subclasses implement the uncounted ``_component_value`` /
    ``_component_grad`` pair; the public methods wrap them with counting.
    ``objective`` and friends are diagnostics and never touch the counters.
    """

    def __init__(self, m: int, dim: int, L, mu, gamma=None):
        self.m = int(m)
        self.dim = int(dim)
        self.L = np.asarray(L, dtype=np.float64)
        self.mu_vec = np.asarray(mu, dtype=np.float64)
        if self.L.shape != (self.m,) or self.mu_vec.shape != (self.m,):
            raise ValueError("L and mu must have one entry per component")
        for Li, mui in zip(self.L, self.mu_vec):
            ComponentSpec(float(Li), float(mui))
        self.mu_total = float(self.mu_vec.sum())
        self.gamma = gamma if gamma is not None else WholeSpace()
        self.counter = OracleCounter(self.m)

    # -- subclass surface ----------------------------------------------
    def _component_value(self, i: int, x: np.ndarray) -> float:
        raise NotImplementedError

    def _component_grad(self, i: int, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    # -- counted oracles -------------------------------------------------
    def _check(self, i: int, x: np.ndarray) -> None:
        if not 0 <= i < self.m:
            raise IndexError(f"component index {i} out of range [0, {self.m})")
        if x.shape != (self.dim,):
            raise ValueError(f"expected iterate of dimension {self.dim}, got shape {x.shape}")

    def component_value(self, i: int, x: np.ndarray) -> float:
        self._check(i, x)
        self.counter.record_values(1)
        return self._component_value(i, x)

    def component_grad(self, i: int, x: np.ndarray) -> np.ndarray:
        self._check(i, x)
        self.counter.record_grad(i)
        return self._component_grad(i, x)

    def hat_component_value(self, i: int, x: np.ndarray) -> float:
        self._check(i, x)
        self.counter.record_values(1)
        return self._component_value(i, x) - 0.5 * self.mu_vec[i] * float(x @ x)

    def hat_component_grad(self, i: int, x: np.ndarray) -> np.ndarray:
        """Gradient of the convex part g_i - (mu_i/2)||.||^2; one gradient call."""
        self._check(i, x)
        self.counter.record_grad(i)
        return self._component_grad(i, x) - self.mu_vec[i] * x

    # -- uncounted diagnostics -------------------------------------------
    def objective(self, x: np.ndarray) -> float:
        return float(sum(self._component_value(i, x) for i in range(self.m)))

    def full_grad_uncounted(self, x: np.ndarray) -> np.ndarray:
        g = np.zeros(self.dim)
        for i in range(self.m):
            g += self._component_grad(i, x)
        return g

    def regularizer_value(self, x: np.ndarray) -> float:
        """h(x) = (mu/2)||x||^2, the pooled strongly convex part."""
        return 0.5 * self.mu_total * float(x @ x)

    def smoothness_bound(self) -> float:
        """Upper bound on the gradient Lipschitz constant of F (default: sum L_i)."""
        return float(self.L.sum())

    def share(self) -> "FiniteSumProblem":
        """Clone sharing the immutable data but owning a fresh counter."""
        import copy

        twin = copy.copy(self)
        twin.counter = OracleCounter(self.m)
        return twin

    def describe(self) -> dict:
        return {"family": type(self).__name__, "m": self.m, "dim": self.dim}


# ---------------------------------------------------------------------------
# Weighted generalized linear models (least squares / logistic)


def glm_component_constants(A, w, mu: float, kind: str) -> np.ndarray:
    """Exact per-component smoothness from row norms.

    With the ridge split evenly (mu_i = mu/m) the components are
    ``(w_i/m) loss(a_i' x, b_i) + (mu/2m)||x||^2``, giving
    squared:  L_i = 2 w_i ||a_i||^2 / m + mu/m
    logistic: L_i = w_i ||a_i||^2 / (4m) + mu/m.
    """
    A = np.asarray(A, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64)
    m = A.shape[0]
    row_sq = np.einsum("ij,ij->i", A, A)
    if kind == "squared":
        data = 2.0 * w * row_sq / m
    elif kind == "logistic":
        data = w * row_sq / (4.0 * m)
    else:
        raise ValueError(f"unknown loss kind {kind!r}")
    return data + mu / m


def scale_design_matrix(A, w, kind: str) -> np.ndarray:
    """Rescale A so the largest data-term component smoothness equals 1.

    The estimate is the exact row-norm formula (max_i L_i of the data term,
    ridge excluded); scaling rows by c multiplies every L_i by c^2, so the
    fixed point is reached in one step.
    """
    A = np.asarray(A, dtype=np.float64)
    if A.size == 0 or not np.any(A):
        raise ValueError("cannot scale an empty or all-zero matrix")
    data_L = glm_component_constants(A, w, 0.0, kind)
    return A / np.sqrt(data_L.max())


class WeightedGLMProblem(FiniteSumProblem):
    """(1/m) sum_i w_i loss(a_i' x, b_i) + (mu/2)||x||^2 as m components.

    The ridge is split evenly across components (mu_i = mu/m) so that every
    component is strongly convex and the split-view constants are exact.
    """

    def __init__(self, A, b, w, mu: float, kind: str, gamma=None):
        A = np.ascontiguousarray(A, dtype=np.float64)
        b = np.asarray(b, dtype=np.float64)
        w = np.asarray(w, dtype=np.float64)
        m, n = A.shape
        if b.shape != (m,) or w.shape != (m,):
            raise ValueError("labels and weights must have one entry per row of A")
        if np.any(w <= 0):
            raise ValueError("weights must be positive")
        if mu <= 0:
            raise ValueError("ridge mu must be positive")
        L = glm_component_constants(A, w, mu, kind)
        super().__init__(m, n, L, np.full(m, mu / m), gamma)
        self.A, self.b, self.w = A, b, w
        self.ridge = float(mu)
        self.kind = kind

    def _component_value(self, i, x):
        z = float(self.A[i] @ x)
        ridge = 0.5 * self.ridge / self.m * float(x @ x)
        if self.kind == "squared":
            return self.w[i] / self.m * (z - self.b[i]) ** 2 + ridge
        t = self.b[i] * z
        # log(1 + exp(-t)) evaluated stably on both tails
        loss = np.log1p(np.exp(-abs(t))) + max(-t, 0.0)
        return self.w[i] / self.m * loss + ridge

    def _component_grad(self, i, x):
        return self._data_grad(i, x) + (self.ridge / self.m) * x

    def _data_grad(self, i, x):
        a = self.A[i]
        z = float(a @ x)
        if self.kind == "squared":
            coef = 2.0 * self.w[i] / self.m * (z - self.b[i])
        else:
            coef = -self.w[i] / self.m * self.b[i] / (1.0 + np.exp(self.b[i] * z))
        return coef * a

    def hat_component_grad(self, i, x):
        """The data term alone: the split's convex part is exactly it."""
        self._check(i, x)
        self.counter.record_grad(i)
        return self._data_grad(i, x)

    # vectorized diagnostics (uncounted)
    def objective(self, x):
        z = self.A @ x
        if self.kind == "squared":
            data = float(self.w @ (z - self.b) ** 2) / self.m
        else:
            t = self.b * z
            data = float(self.w @ (np.log1p(np.exp(-np.abs(t))) + np.maximum(-t, 0.0))) / self.m
        return data + 0.5 * self.ridge * float(x @ x)

    def full_grad_uncounted(self, x):
        z = self.A @ x
        if self.kind == "squared":
            coef = 2.0 * self.w / self.m * (z - self.b)
        else:
            coef = -self.w / self.m * self.b / (1.0 + np.exp(self.b * z))
        return self.A.T @ coef + self.ridge * x

    def hessian_uncounted(self, x):
        if self.kind == "squared":
            coef = 2.0 * self.w / self.m
        else:
            s = 1.0 / (1.0 + np.exp(self.b * (self.A @ x)))
            coef = self.w / self.m * self.b**2 * s * (1.0 - s)
        return (self.A * coef[:, None]).T @ self.A + self.ridge * np.eye(self.dim)

    def smoothness_bound(self):
        H = (self.A * (2.0 * self.w / self.m if self.kind == "squared" else self.w / (4.0 * self.m))[:, None]).T @ self.A
        return float(np.linalg.eigvalsh(H)[-1]) + self.ridge

    def glm_core(self):
        """Raw arrays consumed by the compiled solver loops."""
        return self.A, self.b, self.w, self.ridge, self.kind

    def describe(self):
        return {
            "family": "weighted_least_squares" if self.kind == "squared" else "weighted_logistic",
            "m": self.m,
            "n": self.dim,
            "mu": self.ridge,
        }


def skewed_weights(m: int) -> np.ndarray:
    """floor(sqrt(m)) components of weight m, the rest weight 1."""
    w = np.ones(m)
    w[: int(np.floor(np.sqrt(m)))] = float(m)
    return w


def make_weighted_glm(
    m: int,
    n: int,
    mu: float,
    kind: str,
    seed: int = 0,
    gamma=None,
) -> WeightedGLMProblem:
    """Synthetic Gaussian instance with skewed weights and unit-smoothness scaling."""
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((m, n))
    w = skewed_weights(m)
    A = scale_design_matrix(A, w, kind)
    if kind == "squared":
        b = rng.standard_normal(m)
    else:
        b = np.where(rng.uniform(size=m) < 0.5, -1.0, 1.0)
    return WeightedGLMProblem(A, b, w, mu, kind, gamma)


def least_squares_optimum(problem: WeightedGLMProblem) -> tuple[np.ndarray, float]:
    """Closed-form minimizer of the weighted ridge least-squares objective."""
    if problem.kind != "squared":
        raise ValueError("closed form exists only for the squared loss")
    A, b, w, mu = problem.A, problem.b, problem.w, problem.ridge
    m = problem.m
    H = 2.0 / m * (A * w[:, None]).T @ A + mu * np.eye(problem.dim)
    rhs = 2.0 / m * A.T @ (w * b)
    x_star = np.linalg.solve(H, rhs)
    return x_star, problem.objective(x_star)


# ---------------------------------------------------------------------------
# Generic quadratic finite sums (test instances, composite inners)


class QuadraticFiniteSum(FiniteSumProblem):
    """Components g_i(x) = x'P_i x/2 + a_i'x + r_i with dense SPD P_i."""

    def __init__(self, Ps, a=None, r=None, gamma=None):
        Ps = [np.asarray(P, dtype=np.float64) for P in Ps]
        m = len(Ps)
        n = Ps[0].shape[0]
        a = np.zeros((m, n)) if a is None else np.asarray(a, dtype=np.float64)
        r = np.zeros(m) if r is None else np.asarray(r, dtype=np.float64)
        eigs = [np.linalg.eigvalsh(P) for P in Ps]
        L = np.array([e[-1] for e in eigs])
        mu = np.array([max(e[0], 0.0) for e in eigs])
        super().__init__(m, n, L, mu, gamma)
        self.Ps, self.a, self.r = Ps, a, r

    def _component_value(self, i, x):
        return 0.5 * float(x @ self.Ps[i] @ x) + float(self.a[i] @ x) + self.r[i]

    def _component_grad(self, i, x):
        return self.Ps[i] @ x + self.a[i]

    def smoothness_bound(self):
        return float(np.linalg.eigvalsh(sum(self.Ps))[-1])


def random_spd(n: int, rng: np.random.Generator, eig_lo: float, eig_hi: float, mu_min=None) -> np.ndarray:
    """Dense SPD matrix with uniform eigenvalues, optionally pinning the minimum."""
    eigs = rng.uniform(eig_lo, eig_hi, size=n)
    if mu_min is not None:
        eigs[np.argmin(eigs)] = mu_min
    Q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    return (Q * eigs) @ Q.T


def make_random_quadratic_sum(m: int, n: int, seed: int = 0, eig_lo=0.1, eig_hi=2.0) -> QuadraticFiniteSum:
    rng = np.random.default_rng(seed)
    Ps = [random_spd(n, rng, eig_lo, eig_hi) for _ in range(m)]
    a = rng.standard_normal((m, n))
    return QuadraticFiniteSum(Ps, a)


# ---------------------------------------------------------------------------
# CSV ingestion


def load_matrix_csv(path, header: str = "auto") -> np.ndarray:
    """Row-major CSV; the first line is skipped when it fails to parse as numbers."""
    skip = 0
    if header == "auto":
        with open(path) as fh:
            first = fh.readline()
        try:
            [float(tok) for tok in first.strip().split(",") if tok]
        except ValueError:
            skip = 1
    elif header is True or header == "yes":
        skip = 1
    data = np.loadtxt(path, delimiter=",", skiprows=skip, dtype=np.float64, ndmin=2)
    return data
