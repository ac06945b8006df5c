"""Worst-case chain-quadratic instances with closed-form optima and audits.

The building block is the tridiagonal operator A (2 on the diagonal, -1 off)
acting on a truncated coordinate block; the chain function

    (c/8) (u' A u - 2 gamma u_1) + (mu_c/2) ||u||^2

has optimum u*_j = gamma q^j with q = (sqrt(kappa)-1)/(sqrt(kappa)+1) for the
chain's own condition ratio kappa, and any iterate whose block has been
queried k times can have at most k leading nonzeros (the zero-chain
property).  Instances are truncated so the tail q^{2d} and the optimum's
gradient residual are both below tolerance; the audit compares measured
objective gaps against the per-block floors (mu/2) q_j^{2 K_j} driven by the
oracle ledger.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .problems import FiniteSumProblem
from .solvers.arcd import SeparableBlockProblem

GRAD_RESIDUAL_TOL = 1e-9
TAIL_TOL = 1e-16


def tridiag_apply(x: np.ndarray) -> np.ndarray:
    """Apply the truncated chain operator without materializing it.

    The last row is the leading-minor pattern (..., -1, 2), which keeps
    0 <= A <= 4 I and the one-new-coordinate-per-query behavior.
    """
    x = np.asarray(x, dtype=np.float64)
    out = 2.0 * x
    out[:-1] -= x[1:]
    out[1:] -= x[:-1]
    return out


def chain_q(kappa: float) -> float:
    if kappa < 1.0:
        raise ValueError("condition ratio must be at least 1")
    rk = math.sqrt(kappa)
    return (rk - 1.0) / (rk + 1.0)


def chain_truncation_dim(q: float, chain_coef: float, gamma: float) -> int:
    """Smallest d with q^(2d) < 1e-16 and (chain_coef/4) gamma q^(d+1) below
    the optimum-residual tolerance."""
    if q == 0.0:
        return 2
    d_tail = math.ceil(math.log(TAIL_TOL) / (2.0 * math.log(q)))
    target = GRAD_RESIDUAL_TOL / max(chain_coef / 4.0 * gamma, 1e-300)
    d_resid = 0 if target >= 1.0 else math.ceil(math.log(target) / math.log(q)) + 1
    return max(2, d_tail, d_resid)


@dataclass
class ChainQuadratic:
    """One truncated chain g(u) = ((L-mu)/8)(u'Au - 2 gamma u_1) + (mu/2)||u||^2."""

    L: float
    mu: float
    d: int
    gamma: float | None = None

    def __post_init__(self):
        if not 0.0 < self.mu <= self.L:
            raise ValueError("need 0 < mu <= L")
        self.kappa = self.L / self.mu
        self.q = chain_q(self.kappa)
        if self.gamma is None:
            # normalizes ||u0 - u*|| = 1 from the origin
            self.gamma = math.sqrt(1.0 - self.q**2) / self.q if self.q > 0 else 0.0

    def value(self, u: np.ndarray) -> float:
        c = (self.L - self.mu) / 8.0
        return c * (float(u @ tridiag_apply(u)) - 2.0 * self.gamma * u[0]) + 0.5 * self.mu * float(u @ u)

    def grad(self, u: np.ndarray) -> np.ndarray:
        c = (self.L - self.mu) / 4.0
        g = c * tridiag_apply(u)
        g[0] -= c * self.gamma
        return g + self.mu * u

    def optimum(self) -> np.ndarray:
        return self.gamma * self.q ** np.arange(1, self.d + 1)

    def optimum_value(self) -> float:
        """Infinite-chain minimum -(L-mu)/8 * gamma^2 * q (truncation below tolerance)."""
        return -(self.L - self.mu) / 8.0 * self.gamma**2 * self.q


def prefix_nonzero(x: np.ndarray, tol: float = 0.0) -> int:
    """Index (1-based count) of the last entry with |entry| > tol; 0 if none."""
    nz = np.flatnonzero(np.abs(np.asarray(x)) > tol)
    return int(nz[-1]) + 1 if nz.size else 0


class FiniteSumAdversarialInstance(FiniteSumProblem):
    """m chain components over disjoint coordinate blocks of a shared iterate.

    Component i is ((L_i-mu_i)/8)(x_i'Ax_i - 2 gamma_i x_{i1}) + (mu_i/2)||x||^2
    with the strongly convex part over the *whole* iterate, so the block
    functions seen by the sum are chains with condition ratio
    nu_i = (L_i - mu_i)/mu + 1 and every block starts at unit distance from
    its optimum.  Requires L_i - mu_i > mu/m (otherwise a block's chain
    degenerates and the floor formulas lose their margin).
    """

    def __init__(self, L, mu, d: int | None = None):
        L = np.asarray(L, dtype=np.float64)
        mu = np.asarray(mu, dtype=np.float64)
        m = L.size
        mu_total = float(mu.sum())
        for i in range(m):
            if not L[i] - mu[i] > mu_total / m:
                raise ValueError(
                    f"need L_i - mu_i > mu/m for every component; violated at i={i}: "
                    f"{L[i]} - {mu[i]} <= {mu_total / m}"
                )
        self.nu = (L - mu) / mu_total + 1.0
        self.q = np.array([chain_q(v) for v in self.nu])
        self.gammas = np.sqrt(1.0 - self.q**2) / self.q
        if d is None:
            d = max(
                chain_truncation_dim(self.q[i], float(L[i] - mu[i]), float(self.gammas[i]))
                for i in range(m)
            )
        self.d = int(d)
        super().__init__(m, m * self.d, L, mu)
        self._check_truncation()

    def _check_truncation(self):
        x_star = self.optimum()
        resid = float(np.linalg.norm(self.full_grad_uncounted(x_star)))
        if resid > 1e-8:
            raise ValueError(
                f"truncation dimension d={self.d} leaves optimum residual {resid:.3g} > 1e-8"
            )

    def block(self, x: np.ndarray, i: int) -> np.ndarray:
        return x[i * self.d : (i + 1) * self.d]

    def _component_value(self, i, x):
        u = self.block(x, i)
        c = (self.L[i] - self.mu_vec[i]) / 8.0
        chain = c * (float(u @ tridiag_apply(u)) - 2.0 * self.gammas[i] * u[0])
        return chain + 0.5 * self.mu_vec[i] * float(x @ x)

    def _component_grad(self, i, x):
        g = self.mu_vec[i] * x
        u = self.block(x, i)
        c = (self.L[i] - self.mu_vec[i]) / 4.0
        gu = c * tridiag_apply(u)
        gu[0] -= c * self.gammas[i]
        g[i * self.d : (i + 1) * self.d] += gu
        return g

    def optimum(self) -> np.ndarray:
        x = np.empty(self.dim)
        for i in range(self.m):
            x[i * self.d : (i + 1) * self.d] = self.gammas[i] * self.q[i] ** np.arange(1, self.d + 1)
        return x

    def optimum_value(self) -> float:
        return self.objective(self.optimum())

    def smoothness_bound(self):
        return float((self.L - self.mu_vec).max() + self.mu_total)

    def gap_floor(self, grad_counts: np.ndarray) -> float:
        """max_j (mu/2) q_j^(2 K_j): no first-order method that respects the
        query ledger can have a smaller objective gap."""
        return float(np.max(0.5 * self.mu_total * self.q ** (2.0 * np.asarray(grad_counts))))

    def distance_floor(self, grad_counts: np.ndarray) -> np.ndarray:
        """Per-block lower bounds on ||x_i - x_i*||^2 (initial distances are 1)."""
        return self.q ** (2.0 * np.asarray(grad_counts))

    def describe(self):
        return {
            "family": "chain_finite_sum",
            "m": self.m,
            "d": self.d,
            "L": self.L.tolist(),
            "mu": self.mu_vec.tolist(),
        }


def build_finite_sum_instance(m: int, L, mu, d: int | None = None) -> FiniteSumAdversarialInstance:
    L = np.broadcast_to(np.asarray(L, dtype=np.float64), (m,))
    mu = np.broadcast_to(np.asarray(mu, dtype=np.float64), (m,))
    return FiniteSumAdversarialInstance(L.copy(), mu.copy(), d)


def make_kappa_spread_instance(m: int, kappa_lo: float, kappa_hi: float, seed: int = 0) -> FiniteSumAdversarialInstance:
    """Blocks with log-uniform condition ratios in [kappa_lo, kappa_hi], mu_i = 1/m."""
    rng = np.random.default_rng(seed)
    kappas = np.exp(rng.uniform(np.log(kappa_lo), np.log(kappa_hi), size=m))
    mu = np.full(m, 1.0 / m)
    return FiniteSumAdversarialInstance(kappas * mu, mu)


# ---------------------------------------------------------------------------
# Lower-bound audit


@dataclass
class AuditRow:
    passes: float
    gap: float
    floor: float
    gap_ok: bool
    prefixes: list
    query_counts: list
    prefix_ok: bool


def predicted_query_floor(nu: np.ndarray, mu_total: float, eps: float) -> np.ndarray:
    """Per-block minimum query counts needed for gap eps (0 when eps is large)."""
    nu = np.asarray(nu, dtype=np.float64)
    out = np.zeros(nu.size)
    if eps <= 0 or mu_total / (2.0 * eps) <= 1.0:
        return out
    log_term = math.log(mu_total / (2.0 * eps))
    for j, v in enumerate(nu):
        r = math.sqrt(v)
        out[j] = 0.5 * log_term / math.log((r + 1.0) / (r - 1.0)) if r > 1.0 else 0.0
    return out


def audit_lower_bound(instance: FiniteSumAdversarialInstance, trace, slack: float = 1e-12) -> dict:
    """Check every recorded pass against the ledger-driven floors.

    Requires the trace rows to carry iterate copies and per-component counts
    (run the solver with ``keep_iterates`` auditing enabled, see
    ``vropt.harness``); span violations are report entries, not errors,
    since projection steps can break the span assumption.
    """
    f_star = instance.optimum_value()
    rows = []
    all_gap_ok = True
    all_prefix_ok = True
    for r in trace.rows:
        if "x" not in r or "component_grads" not in r:
            continue
        x = r["x"]
        counts = np.asarray(r["component_grads"])
        gap = instance.objective(x) - f_star
        floor = instance.gap_floor(counts)
        prefixes = [prefix_nonzero(instance.block(x, i)) for i in range(instance.m)]
        prefix_ok = all(p <= c for p, c in zip(prefixes, counts))
        gap_ok = gap >= floor - slack
        all_gap_ok &= gap_ok
        all_prefix_ok &= prefix_ok
        rows.append(
            AuditRow(r["passes"], gap, floor, gap_ok, prefixes, counts.tolist(), prefix_ok)
        )
    final_gap = rows[-1].gap if rows else math.nan
    return {
        "rows": rows,
        "gap_floor_ok": all_gap_ok,
        "zero_chain_ok": all_prefix_ok,
        "final_gap": final_gap,
        "predicted_query_floor": predicted_query_floor(
            instance.nu, instance.mu_total, final_gap
        ).tolist(),
        "total_queries": int(np.sum(rows[-1].query_counts)) if rows else 0,
    }


# ---------------------------------------------------------------------------
# Paired construction for the separable constrained model


class _PairChainBlock:
    """One variable's objective in the paired construction.

    The variable is split into n_pairs sub-blocks of length d; only sub-block
    ``slot`` carries the chain (with linear-term sign ``sign``), the rest feel
    just the strongly convex term.
    """

    def __init__(self, coef: float, gamma: float, sign: float, mu: float, slot: int, n_pairs: int, d: int):
        self.coef = coef  # multiplies (u'Au - 2 sign gamma u_1)/8... stored as c/8
        self.gamma = gamma
        self.sign = sign
        self.mu = mu
        self.slot = slot
        self.n_pairs = n_pairs
        self.d = d
        # realized smoothness: chain curvature (<= 4 * 2c/8) plus the ridge
        self.L = self.coef + mu if self.coef > 0 else mu

    def _sub(self, p: np.ndarray) -> np.ndarray:
        return p[self.slot * self.d : (self.slot + 1) * self.d]

    def value(self, p: np.ndarray) -> float:
        out = 0.5 * self.mu * float(p @ p)
        if self.coef > 0:
            u = self._sub(p)
            out += self.coef / 8.0 * (float(u @ tridiag_apply(u)) - 2.0 * self.sign * self.gamma * u[0])
        return out

    def grad(self, p: np.ndarray) -> np.ndarray:
        g = self.mu * p
        if self.coef > 0:
            u = self._sub(p)
            gu = self.coef / 4.0 * tridiag_apply(u)
            gu[0] -= self.coef / 4.0 * self.sign * self.gamma
            g[self.slot * self.d : (self.slot + 1) * self.d] += gu
        return g


class DualAdversarialInstance(SeparableBlockProblem):
    """Paired blocks whose separate optima cancel in the coupling constraint.

    Variables are ordered so condition ratios decrease; pair i couples
    variables (2i-1, 2i) [1-based] through opposite-sign linear terms on
    sub-block i, so sum_i p_i* = 0 exactly and the constraint never binds at
    the optimum.  An odd trailing variable is purely quadratic.
    """

    def __init__(self, L, mu, d: int | None = None):
        L = np.asarray(L, dtype=np.float64)
        mu = np.asarray(mu, dtype=np.float64)
        m = L.size
        order = np.argsort(-(L / mu), kind="stable")
        self.order = order
        Ls, mus = L[order], mu[order]
        n_pairs = m // 2
        if n_pairs == 0:
            raise ValueError("need at least two blocks to form a pair")
        self.n_pairs = n_pairs
        self.pair_q = np.empty(n_pairs)
        self.pair_gamma = np.empty(n_pairs)
        chain_coefs = []
        for i in range(n_pairs):
            L_even, mu_even = Ls[2 * i + 1], mus[2 * i + 1]
            kappa = L_even / mu_even
            q = chain_q(kappa)
            if q == 0.0:
                raise ValueError(f"pair {i} has condition ratio 1; no chain to build")
            self.pair_q[i] = q
            self.pair_gamma[i] = math.sqrt(1.0 - q * q) / q * math.sqrt(2.0 / mu_even)
            chain_coefs.append(L_even - mu_even)
        if d is None:
            d = max(
                chain_truncation_dim(self.pair_q[i], chain_coefs[i], self.pair_gamma[i])
                for i in range(n_pairs)
            )
        self.d = int(d)
        blocks = []
        for i in range(n_pairs):
            L_even, mu_even = Ls[2 * i + 1], mus[2 * i + 1]
            mu_odd = mus[2 * i]
            gamma = self.pair_gamma[i]
            blocks.append(
                _PairChainBlock(
                    (L_even - mu_even) * mu_odd / mu_even, gamma, +1.0, mu_odd, i, n_pairs, self.d
                )
            )
            blocks.append(
                _PairChainBlock(L_even - mu_even, gamma, -1.0, mu_even, i, n_pairs, self.d)
            )
        if m % 2 == 1:
            blocks.append(_PairChainBlock(0.0, 0.0, +1.0, mus[-1], 0, n_pairs, self.d))
        super().__init__(blocks, n_pairs * self.d)

    def optimum(self) -> np.ndarray:
        P = np.zeros((self.m, self.block_dim))
        for i in range(self.n_pairs):
            tail = self.pair_gamma[i] * self.pair_q[i] ** np.arange(1, self.d + 1)
            P[2 * i, i * self.d : (i + 1) * self.d] = tail
            P[2 * i + 1, i * self.d : (i + 1) * self.d] = -tail
        return P

    def optimum_value(self) -> float:
        return self.objective_uncounted(self.optimum())

    def pair_query_counts(self, grad_counts: np.ndarray) -> np.ndarray:
        counts = np.asarray(grad_counts)
        return np.array([counts[2 * i] + counts[2 * i + 1] for i in range(self.n_pairs)])

    def gap_floor(self, grad_counts: np.ndarray) -> float:
        """max over pairs of q_i^(2 K_i); dimensionless because the paired
        initial distances are normalized to 2/mu_even."""
        K = self.pair_query_counts(grad_counts)
        return float(np.max(self.pair_q ** (2.0 * K)))

    def audit_prefixes(self, P: np.ndarray, grad_counts: np.ndarray) -> bool:
        """Sub-block i of every variable may have at most K_i leading nonzeros."""
        K = self.pair_query_counts(grad_counts)
        for var in range(self.m):
            for i in range(self.n_pairs):
                sub = P[var, i * self.d : (i + 1) * self.d]
                if prefix_nonzero(sub) > K[i]:
                    return False
        return True

    def describe(self) -> dict:
        return {
            "family": "chain_dual_pairs",
            "m": self.m,
            "d": self.d,
            "n_pairs": self.n_pairs,
        }
