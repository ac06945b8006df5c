"""Composed objectives F(x) = f(g_1(x), ..., g_m(x)) and their estimators.

The outer function is convex and coordinatewise increasing with partials
pinned in [b_i, B_i] (the lower bounds hold globally for the generated
family, the upper bounds on a recorded region), each inner g_i is
mu_i-strongly convex and L_i-smooth, and F itself is L-smooth.  Pooling the
inherited curvature sigma = sum_i b_i mu_i into h(x) = (sigma/2)||x||^2
leaves the convex remainder F_hat = F - h, estimated stochastically in two
ways:

* general: snapshot table of inner gradients, sampling pi_i ~ B_i L_i; one
  fresh inner gradient, all m inner values, and all m outer partials per
  step;
* reduced: per-coordinate chain terms grad_i F(x) = partial_i f * grad g_i(x)
  recentered by b_i mu_i x, sampling pi_i ~ l_i where l_i certifies the
  curvature-style bound on grad_i; needs one outer partial per step and no
  stored table, at the price of a second inner gradient (the snapshot term
  is recomputed, only scalars are cached per epoch).
"""

from __future__ import annotations

import math

import numpy as np

from .problems import OracleCounter, WholeSpace, random_spd
from .sampling import katyusha_distribution, reduced_distribution


class QuadraticOuter:
    """f(y) = y'Qy with Q symmetric positive definite and entrywise positive."""

    def __init__(self, Q):
        self.Q = np.asarray(Q, dtype=np.float64)
        if np.any(self.Q <= 0.0):
            raise ValueError("outer matrix must be entrywise positive")

    def value(self, y: np.ndarray) -> float:
        return float(y @ self.Q @ y)

    def partials(self, y: np.ndarray) -> np.ndarray:
        return 2.0 * self.Q @ y

    def hessian(self, y: np.ndarray) -> np.ndarray:
        return 2.0 * self.Q


class SumOuter:
    """f(y) = sum_i y_i: the plain finite-sum special case (partials = 1)."""

    def value(self, y):
        return float(np.sum(y))

    def partials(self, y):
        return np.ones(len(y))

    def hessian(self, y):
        return np.zeros((len(y), len(y)))


class CompositeProblem:
    """Counted oracle bundle for the composed objective.

    ``inner_Ps/inner_a/inner_r`` define quadratic inners
    g_i(x) = x'P_i x/2 + a_i'x + r_i; the outer exposes value/partials (and
    hessian for references).  ``b``/``B`` bound the outer partials, ``L_F``
    the smoothness of F; ``l`` optionally holds the reduced-estimator
    constants with their certification region in ``region_radius``.
    """

    def __init__(self, inner_Ps, inner_a, inner_r, outer, b, B, L_F, l=None, region_radius=None):
        self.inner_Ps = [np.asarray(P, dtype=np.float64) for P in inner_Ps]
        self.inner_a = np.asarray(inner_a, dtype=np.float64)
        self.inner_r = np.asarray(inner_r, dtype=np.float64)
        self.outer = outer
        self.m = len(self.inner_Ps)
        self.dim = self.inner_Ps[0].shape[0]
        eigs = [np.linalg.eigvalsh(P) for P in self.inner_Ps]
        self.L = np.array([e[-1] for e in eigs])
        self.mu_vec = np.array([e[0] for e in eigs])
        if np.any(self.mu_vec <= 0.0):
            raise ValueError("inner components must be strongly convex")
        self.b = np.asarray(b, dtype=np.float64)
        self.B = np.asarray(B, dtype=np.float64)
        if np.any(self.b <= 0.0) or np.any(self.B < self.b):
            raise ValueError("need 0 < b_i <= B_i")
        self.L_F = float(L_F)
        self.l = None if l is None else np.asarray(l, dtype=np.float64)
        self.region_radius = region_radius
        self.sigma = float(self.b @ self.mu_vec)
        self.L_prime = max(self.L_F, float(self.B @ self.L))
        self.gamma = WholeSpace()
        self.counter = OracleCounter(self.m)

    # -- counted oracles --------------------------------------------------
    def inner_grad(self, i: int, x: np.ndarray) -> np.ndarray:
        self.counter.record_grad(i)
        return self.inner_Ps[i] @ x + self.inner_a[i]

    def inner_hat_grad(self, i: int, x: np.ndarray) -> np.ndarray:
        self.counter.record_grad(i)
        return self.inner_Ps[i] @ x + self.inner_a[i] - self.mu_vec[i] * x

    def inner_values(self, x: np.ndarray) -> np.ndarray:
        self.counter.record_values(self.m)
        return self._inner_values_uncounted(x)

    def outer_partials(self, values: np.ndarray) -> np.ndarray:
        self.counter.record_partials(self.m)
        return self.outer.partials(values)

    def outer_partial(self, i: int, values: np.ndarray) -> float:
        self.counter.record_partials(1)
        return float(self.outer.partials(values)[i])

    def full_gradient(self, x: np.ndarray) -> np.ndarray:
        """Chain rule sum_i partial_i f * grad g_i; m gradient calls, m values, m partials."""
        vals = self.inner_values(x)
        parts = self.outer_partials(vals)
        g = np.zeros(self.dim)
        for i in range(self.m):
            g += parts[i] * self.inner_grad(i, x)
        return g

    def full_hat_gradient(self, x: np.ndarray) -> np.ndarray:
        return self.full_gradient(x) - self.sigma * x

    # -- uncounted diagnostics ---------------------------------------------
    def _inner_values_uncounted(self, x: np.ndarray) -> np.ndarray:
        out = np.empty(self.m)
        for i in range(self.m):
            out[i] = 0.5 * float(x @ self.inner_Ps[i] @ x) + float(self.inner_a[i] @ x) + self.inner_r[i]
        if np.any(out <= 0.0) and isinstance(self.outer, QuadraticOuter):
            raise ValueError("inner value left the positive domain required by the outer function")
        return out

    def objective(self, x: np.ndarray) -> float:
        return self.outer.value(self._inner_values_uncounted(x))

    def hat_objective(self, x: np.ndarray) -> float:
        return self.objective(x) - 0.5 * self.sigma * float(x @ x)

    def gradient_uncounted(self, x: np.ndarray) -> np.ndarray:
        vals = self._inner_values_uncounted(x)
        parts = self.outer.partials(vals)
        g = np.zeros(self.dim)
        for i in range(self.m):
            g += parts[i] * (self.inner_Ps[i] @ x + self.inner_a[i])
        return g

    def hat_gradient_uncounted(self, x: np.ndarray) -> np.ndarray:
        return self.gradient_uncounted(x) - self.sigma * x

    def coordinate_hat_grad_uncounted(self, i: int, x: np.ndarray) -> np.ndarray:
        """grad_i F(x) - b_i mu_i x, the reduced estimator's building block."""
        vals = self._inner_values_uncounted(x)
        part = float(self.outer.partials(vals)[i])
        return part * (self.inner_Ps[i] @ x + self.inner_a[i]) - self.b[i] * self.mu_vec[i] * x

    def hessian_uncounted(self, x: np.ndarray) -> np.ndarray:
        vals = self._inner_values_uncounted(x)
        parts = self.outer.partials(vals)
        G = np.column_stack([self.inner_Ps[i] @ x + self.inner_a[i] for i in range(self.m)])
        H = G @ self.outer.hessian(vals) @ G.T
        for i in range(self.m):
            H += parts[i] * self.inner_Ps[i]
        return H

    def share(self) -> "CompositeProblem":
        import copy

        twin = copy.copy(self)
        twin.counter = OracleCounter(self.m)
        return twin

    def describe(self) -> dict:
        return {"family": "composite_quadratic", "m": self.m, "n": self.dim}


def strong_convexity_constant(problem: CompositeProblem) -> float:
    """sigma = sum_i b_i mu_i, inherited through the increasing outer function."""
    return float(problem.b @ problem.mu_vec)


# ---------------------------------------------------------------------------
# Stochastic estimators of grad F_hat


def estimator_general(problem, x, x_tilde, snapshot_table, i, pi=None) -> np.ndarray:
    """Snapshot-corrected chain-rule estimate at the sampled coordinate i.

    sum_j partial_j f(g(x)) (table_j + mu_j x)
      + (partial_i f(g(x))/pi_i) (hat_grad_i(x) - table_i) - sigma x,

    where table_j = grad hat_g_j(x_tilde).  Unbiased for grad F_hat(x).
    """
    if pi is None:
        pi = katyusha_distribution(problem.B, problem.L).probabilities
    vals = problem.inner_values(x)
    parts = problem.outer_partials(vals)
    base = parts @ snapshot_table + float(parts @ problem.mu_vec) * x
    corr = parts[i] / pi[i] * (problem.inner_hat_grad(i, x) - snapshot_table[i])
    return base + corr - problem.sigma * x


def estimator_reduced(problem, x, x_tilde, snapshot_hat_grad, i, pi=None, epoch_cache=None) -> np.ndarray:
    """grad F_hat(x_tilde) + (hat_grad_i F(x) - hat_grad_i F(x_tilde)) / pi_i.

    ``snapshot_hat_grad`` is the epoch-cached full grad F_hat(x_tilde);
    ``epoch_cache`` may carry the snapshot's outer partials so only the
    fresh point needs one.  The snapshot coordinate term is recomputed,
    costing a second inner gradient per step.
    """
    if pi is None:
        pi = reduced_distribution(problem.l).probabilities
    vals = problem.inner_values(x)
    part_x = problem.outer_partial(i, vals)
    di_x = part_x * problem.inner_grad(i, x) - problem.b[i] * problem.mu_vec[i] * x
    if epoch_cache is not None and "partials" in epoch_cache:
        part_t = float(epoch_cache["partials"][i])
    else:
        part_t = problem.outer_partial(i, problem.inner_values(x_tilde))
    di_t = part_t * problem.inner_grad(i, x_tilde) - problem.b[i] * problem.mu_vec[i] * x_tilde
    return snapshot_hat_grad + (di_x - di_t) / pi[i]


class CompositeGeneralEstimator:
    """Katyusha provider wrapping :func:`estimator_general`."""

    calls_per_iter = 1

    def __init__(self, problem: CompositeProblem):
        self.problem = problem
        self.distribution = katyusha_distribution(problem.B, problem.L)
        self.sigma = problem.sigma
        self.L_prime = problem.L_prime
        self.table = np.zeros((problem.m, problem.dim))

    def take_snapshot(self, x_tilde):
        for j in range(self.problem.m):
            self.table[j] = self.problem.inner_hat_grad(j, x_tilde)

    def estimate(self, x, i):
        return estimator_general(
            self.problem, x, None, self.table, i, self.distribution.probabilities
        )


class CompositeReducedEstimator:
    """Katyusha provider wrapping :func:`estimator_reduced`.

    Requires certified constants l_i; the epoch cache holds the snapshot
    point, its full recentered gradient, and its outer partials (scalars).
    """

    calls_per_iter = 2

    def __init__(self, problem: CompositeProblem):
        if problem.l is None:
            raise ValueError("reduced estimator needs certified constants l_i")
        self.problem = problem
        self.distribution = reduced_distribution(problem.l)
        self.sigma = problem.sigma
        self.L_prime = max(problem.L_F, float(np.sum(problem.l)))
        self.x_tilde = None
        self.snapshot_hat_grad = None
        self.cache = {}

    def take_snapshot(self, x_tilde):
        p = self.problem
        self.x_tilde = np.array(x_tilde)
        vals = p.inner_values(x_tilde)
        parts = p.outer_partials(vals)
        g = np.zeros(p.dim)
        for i in range(p.m):
            g += parts[i] * p.inner_grad(i, x_tilde)
        self.snapshot_hat_grad = g - p.sigma * x_tilde
        self.cache = {"partials": parts}

    def estimate(self, x, i):
        return estimator_reduced(
            self.problem,
            x,
            self.x_tilde,
            self.snapshot_hat_grad,
            i,
            self.distribution.probabilities,
            self.cache,
        )


def make_katyusha_provider(problem: CompositeProblem, estimator: str):
    if estimator == "general":
        return CompositeGeneralEstimator(problem)
    if estimator == "reduced":
        return CompositeReducedEstimator(problem)
    raise ValueError(f"unknown estimator {estimator!r} (use 'general' or 'reduced')")


def variance_check(problem: CompositeProblem, x, x_tilde, estimator: str = "general") -> tuple[float, float]:
    """Enumerated estimator variance vs. its curvature bound.

    lhs = sum_i pi_i ||est_i - grad F_hat(x)||^2;
    rhs = 2 C (F_hat(x_tilde) - F_hat(x) - <grad F_hat(x), x_tilde - x>)
    with C = sum_i B_i L_i (general) or sum_i l_i (reduced).  Uncounted.
    """
    work = problem.share()
    gx = problem.hat_gradient_uncounted(x)
    if estimator == "general":
        prov = CompositeGeneralEstimator(work)
        C = float(problem.B @ problem.L)
    else:
        prov = CompositeReducedEstimator(work)
        C = float(np.sum(problem.l))
    prov.take_snapshot(x_tilde)
    pi = prov.distribution.probabilities
    lhs = 0.0
    for i in range(problem.m):
        diff = prov.estimate(x, i) - gx
        lhs += pi[i] * float(diff @ diff)
    bregman = (
        problem.hat_objective(x_tilde)
        - problem.hat_objective(x)
        - float(gx @ (np.asarray(x_tilde) - np.asarray(x)))
    )
    return lhs, 2.0 * C * bregman


# ---------------------------------------------------------------------------
# Reduced-estimator constants (certification of the integral bound)


def _gl64():
    nodes, weights = np.polynomial.legendre.leggauss(64)
    return 0.5 * (nodes + 1.0), 0.5 * weights


def coordinate_curvature_ratio(problem: CompositeProblem, i: int, x, y) -> float:
    """||D||^2 / (2 * integral term) for hat_grad_i F between x and y.

    The integral int_0^1 <hat_grad_i F(x + t(y-x)) - hat_grad_i F(x), y-x> dt
    is evaluated with 64-point Gauss-Legendre quadrature (the integrand is a
    smooth rational-free expression for quadratic inners).
    """
    nodes, weights = _gl64()
    gx = problem.coordinate_hat_grad_uncounted(i, x)
    gy = problem.coordinate_hat_grad_uncounted(i, y)
    d = np.asarray(y) - np.asarray(x)
    integral = 0.0
    for t, wt in zip(nodes, weights):
        gt = problem.coordinate_hat_grad_uncounted(i, x + t * d)
        integral += wt * float((gt - gx) @ d)
    num = float((gy - gx) @ (gy - gx))
    if integral <= 0.0:
        return math.inf if num > 0 else 0.0
    return num / (2.0 * integral)


def estimate_reduced_constants(
    problem: CompositeProblem, radius: float, seed: int = 0, samples: int = 40, margin: float = 1.5
) -> np.ndarray:
    """Sampled sup of the curvature ratio per coordinate, inflated by a margin."""
    rng = np.random.default_rng(seed)
    l = np.zeros(problem.m)
    for _ in range(samples):
        x = rng.standard_normal(problem.dim)
        x *= rng.uniform(0, radius) / max(np.linalg.norm(x), 1e-12)
        y = rng.standard_normal(problem.dim)
        y *= rng.uniform(0, radius) / max(np.linalg.norm(y), 1e-12)
        for i in range(problem.m):
            l[i] = max(l[i], coordinate_curvature_ratio(problem, i, x, y))
    return margin * l


def certify_reduced_constants(
    problem: CompositeProblem, radius: float, seed: int = 1, samples: int = 50, tol: float = 1e-8
) -> bool:
    """Fresh-sample check that the stored l_i satisfy the integral bound."""
    rng = np.random.default_rng(seed)
    for _ in range(samples):
        x = rng.standard_normal(problem.dim)
        x *= rng.uniform(0, radius) / max(np.linalg.norm(x), 1e-12)
        y = rng.standard_normal(problem.dim)
        y *= rng.uniform(0, radius) / max(np.linalg.norm(y), 1e-12)
        i = int(rng.integers(problem.m))
        if coordinate_curvature_ratio(problem, i, x, y) > problem.l[i] + tol:
            return False
    return True


# ---------------------------------------------------------------------------
# Instance generation and references


def make_composite_quadratic(
    m: int,
    n: int,
    seed: int = 0,
    mu_min: float = 1e-5,
    eig_range: tuple[float, float] = (0.0, 1.0),
    with_reduced: bool = True,
) -> CompositeProblem:
    """Entrywise-positive quadratic outer over positive quadratic inners.

    Inner curvatures have uniform spectra with the minimum eigenvalue pinned
    at ``mu_min``; each r_i lifts the inner's global minimum to a positive
    value, which makes the lower partial bounds b_i global.  The linear
    terms are drawn in the curvature's image (a_i = P_i z_i, z standard
    normal) so every inner minimizer is O(1) and the positivity lift stays
    O(1) despite the tiny minimum eigenvalue; otherwise objective values at
    desk scale would dwarf the gap tolerances double precision can resolve.
    The upper bounds, smoothness L, and (optionally) the reduced constants
    l_i are taken over a recorded ball around the optimum.
    """
    rng = np.random.default_rng(seed)
    Ps = [random_spd(n, rng, eig_range[0], eig_range[1], mu_min=mu_min) for _ in range(m)]
    z = rng.standard_normal((m, n))
    a = np.array([Ps[i] @ z[i] for i in range(m)])
    floor = rng.uniform(0.5, 1.5, size=m)
    r = np.array([0.5 * z[i] @ Ps[i] @ z[i] + floor[i] for i in range(m)])
    M = rng.uniform(0.2, 1.0, size=(m, m))
    Q = 0.5 * (M + M.T)
    lam_min = float(np.linalg.eigvalsh(Q)[0])
    if lam_min < 0.1:
        Q += (0.1 - lam_min) * np.eye(m)
    outer = QuadraticOuter(Q)

    # provisional problem to locate the optimum and size the region
    prob = CompositeProblem(Ps, a, r, outer, np.full(m, 1e-12), np.full(m, 1e12), 1.0)
    x_star, _ = _newton_polish(prob, np.zeros(n))
    radius = 2.0 * float(np.linalg.norm(x_star)) + 1.0

    g_lo = floor
    L_inner = np.array([np.linalg.eigvalsh(P)[-1] for P in Ps])
    g_hi = 0.5 * L_inner * radius**2 + np.linalg.norm(a, axis=1) * radius + r
    b = 2.0 * Q @ g_lo
    B = 2.0 * Q @ g_hi

    L_F = 0.0
    for _ in range(16):
        z = rng.standard_normal(n)
        z *= rng.uniform(0, radius) / max(np.linalg.norm(z), 1e-12)
        L_F = max(L_F, float(np.linalg.eigvalsh(prob.hessian_uncounted(z))[-1]))
    L_F *= 1.2

    l = estimate_reduced_constants(
        CompositeProblem(Ps, a, r, outer, b, B, L_F), radius, seed=seed + 1
    ) if with_reduced else None
    return CompositeProblem(Ps, a, r, outer, b, B, L_F, l=l, region_radius=radius)


def _newton_polish(problem: CompositeProblem, x0, tol: float = 1e-13, max_iter: int = 100):
    x = np.array(x0, dtype=np.float64)
    for _ in range(max_iter):
        g = problem.gradient_uncounted(x)
        if np.linalg.norm(g) <= tol * max(1.0, abs(problem.objective(x))):
            break
        step = np.linalg.solve(problem.hessian_uncounted(x), g)
        t = 1.0
        fx = problem.objective(x)
        while t > 1e-8 and problem.objective(x - t * step) > fx:
            t *= 0.5
        x -= t * step
    return x, problem.objective(x)


def composite_reference(problem: CompositeProblem) -> tuple[np.ndarray, float]:
    """High-accuracy optimum: damped Newton from the origin (uncounted)."""
    return _newton_polish(problem, np.zeros(problem.dim))


def run_agd_composite(
    problem: CompositeProblem,
    *,
    seed: int = 0,
    x0=None,
    max_passes: float = 10000.0,
    gap_tol=None,
    f_star=None,
    x_star=None,
    step_scale: float = 1.0,
):
    """Deterministic accelerated gradient on F; m inner-gradient calls per step."""
    from .solvers.baselines import AgdEngine, _run_engine

    class _Engine(AgdEngine):
        def _full_grad(self, z):
            return problem.full_gradient(z)

    return _run_engine(
        "agd",
        problem,
        lambda x0v: _Engine(problem, step_scale, x0v, L=problem.L_F, mu=problem.sigma),
        problem.m,
        seed=seed,
        x0=x0,
        max_passes=max_passes,
        gap_tol=gap_tol,
        dist_tol=None,
        f_star=f_star,
        x_star=x_star,
        params={"step_scale": step_scale},
    )
