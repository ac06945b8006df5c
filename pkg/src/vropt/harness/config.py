"""Experiment configuration: JSON schema, problem registry, references."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .. import adversarial, composite, dual, problems


class ConfigError(ValueError):
    """Invalid experiment configuration; carries field-path diagnostics."""

    def __init__(self, issues: list[str]):
        self.issues = issues
        super().__init__("; ".join(issues))


KNOWN_SOLVERS = (
    "ssnm",
    "ssnm_uniform",
    "saga",
    "svrg",
    "katyusha",
    "katyusha_uniform",
    "agd",
    "dual_ssnm",
    "arcd",
    "katyusha_general",
    "katyusha_reduced",
)

FINITE_SUM_FAMILIES = ("weighted_least_squares", "weighted_logistic", "chain_finite_sum")


@dataclass
class StopRule:
    max_passes: float = 100.0
    gap_tol: float | None = None
    dist_tol: float | None = None


@dataclass
class GridSpec:
    k_lo: int = -3
    k_hi: int = 3
    target: str | None = None  # default: first solver

    def scales(self) -> list[tuple[float, int, int]]:
        """(scale, k, mult) triples, sorted by scale; the grid is
        {10^-k, 3*10^-k} over the k range, applied to the theory settings."""
        out = []
        for k in range(self.k_lo, self.k_hi + 1):
            for mult in (1, 3):
                out.append((mult * 10.0 ** (-k), k, mult))
        out.sort()
        return out


@dataclass
class ExperimentConfig:
    problem: dict
    solvers: list[str]
    seed: int = 0
    n_seeds: int = 1
    stop: StopRule = field(default_factory=StopRule)
    solver_params: dict = field(default_factory=dict)
    grid: GridSpec = field(default_factory=GridSpec)
    out_dir: str | None = None
    label: str = "experiment"

    def to_json_dict(self) -> dict:
        return {
            "label": self.label,
            "problem": self.problem,
            "solvers": self.solvers,
            "seed": self.seed,
            "n_seeds": self.n_seeds,
            "stop": {
                "max_passes": self.stop.max_passes,
                "gap_tol": self.stop.gap_tol,
                "dist_tol": self.stop.dist_tol,
            },
            "solver_params": self.solver_params,
            "grid": {"k_lo": self.grid.k_lo, "k_hi": self.grid.k_hi, "target": self.grid.target},
            "out_dir": self.out_dir,
        }


def _issue(issues, path, msg):
    issues.append(f"{path}: {msg}")


def parse_config(raw: dict | str | Path) -> ExperimentConfig:
    """Validate a JSON mapping (or a path to one) into an ExperimentConfig."""
    if isinstance(raw, (str, Path)):
        with open(raw) as fh:
            raw = json.load(fh)
    issues: list[str] = []
    if not isinstance(raw, dict):
        raise ConfigError(["<root>: expected a JSON object"])
    problem = raw.get("problem")
    if not isinstance(problem, dict):
        _issue(issues, "problem", "required object with a 'family' field")
        problem = {}
    elif "family" not in problem:
        _issue(issues, "problem.family", "required")
    solvers = raw.get("solvers", [])
    if isinstance(solvers, str):
        solvers = [solvers]
    if not solvers:
        _issue(issues, "solvers", "need at least one solver name")
    for s in solvers:
        if s not in KNOWN_SOLVERS:
            _issue(issues, f"solvers[{s}]", f"unknown solver (choose from {', '.join(KNOWN_SOLVERS)})")
    stop_raw = raw.get("stop", {})
    stop = StopRule(
        max_passes=float(stop_raw.get("max_passes", 100.0)),
        gap_tol=stop_raw.get("gap_tol"),
        dist_tol=stop_raw.get("dist_tol"),
    )
    if stop.max_passes <= 0:
        _issue(issues, "stop.max_passes", "must be positive")
    grid_raw = raw.get("grid", {})
    grid = GridSpec(
        k_lo=int(grid_raw.get("k_lo", -3)),
        k_hi=int(grid_raw.get("k_hi", 3)),
        target=grid_raw.get("target"),
    )
    if grid.k_lo > grid.k_hi:
        _issue(issues, "grid.k_lo", "must not exceed grid.k_hi")
    seed = raw.get("seed", 0)
    if not isinstance(seed, int) or seed < 0:
        _issue(issues, "seed", "must be a nonnegative integer")
    n_seeds = raw.get("n_seeds", 1)
    if not isinstance(n_seeds, int) or n_seeds < 1:
        _issue(issues, "n_seeds", "must be a positive integer")
    if issues:
        raise ConfigError(issues)
    return ExperimentConfig(
        problem=problem,
        solvers=list(solvers),
        seed=seed,
        n_seeds=n_seeds,
        stop=stop,
        solver_params=raw.get("solver_params", {}),
        grid=grid,
        out_dir=raw.get("out_dir"),
        label=raw.get("label", "experiment"),
    )


# ---------------------------------------------------------------------------
# Problem registry


def problem_from_spec(spec: dict):
    """Instantiate a problem from its JSON description."""
    family = spec.get("family")
    seed = int(spec.get("seed", 0))
    if family in ("weighted_least_squares", "weighted_logistic"):
        kind = "squared" if family == "weighted_least_squares" else "logistic"
        if "matrix_csv" in spec:
            A = problems.load_matrix_csv(spec["matrix_csv"])
            m, n = A.shape
            b = (
                problems.load_matrix_csv(spec["targets_csv"]).ravel()
                if "targets_csv" in spec
                else np.random.default_rng(seed).standard_normal(m)
            )
            w = np.asarray(spec.get("weights", problems.skewed_weights(m)), dtype=np.float64)
            A = problems.scale_design_matrix(A, w, kind)
            if kind == "logistic":
                b = np.where(b >= 0, 1.0, -1.0)
            return problems.WeightedGLMProblem(A, b, w, float(spec["mu"]), kind)
        return problems.make_weighted_glm(
            int(spec["m"]), int(spec["n"]), float(spec["mu"]), kind, seed=seed
        )
    if family == "chain_finite_sum":
        m = int(spec["m"])
        if "kappa_range" in spec:
            lo, hi = spec["kappa_range"]
            return adversarial.make_kappa_spread_instance(m, float(lo), float(hi), seed=seed)
        return adversarial.build_finite_sum_instance(m, spec["L"], spec["mu"], spec.get("d"))
    if family == "chain_dual_pairs":
        return adversarial.DualAdversarialInstance(
            np.asarray(spec["L"], dtype=np.float64),
            np.asarray(spec["mu"], dtype=np.float64),
            spec.get("d"),
        )
    if family == "multiblock_quadratic":
        return make_multiblock(
            int(spec["m"]),
            int(spec["n"]),
            float(spec.get("mu_min", 1e-3)),
            seed=seed,
            eig_range=tuple(spec.get("eig_range", (0.0, 1.0))),
        )
    if family == "composite_quadratic":
        return composite.make_composite_quadratic(
            int(spec["m"]), int(spec["n"]), seed=seed, mu_min=float(spec.get("mu_min", 1e-5))
        )
    raise ConfigError([f"problem.family: unknown family {family!r}"])


def make_multiblock(m: int, n: int, mu_min: float, seed: int = 0, eig_range=(0.0, 1.0)):
    """Identity-coupled blocks y'P_i y/2 + a_i'y with sum_i y_i = m * b.

    Eigenvalues are uniform on ``eig_range`` with the minimum adjusted to
    ``mu_min``; the linear terms and b are standard Gaussian.
    """
    rng = np.random.default_rng(seed)
    blocks = [
        dual.QuadraticBlock(
            problems.random_spd(n, rng, eig_range[0], eig_range[1], mu_min=mu_min),
            rng.standard_normal(n),
        )
        for _ in range(m)
    ]
    b = m * rng.standard_normal(n)
    return dual.MultiBlockProblem(blocks, None, b)


# ---------------------------------------------------------------------------
# Gap references


def compute_reference(problem) -> dict:
    """High-accuracy optimum used for objective gaps, recorded in metadata.

    Closed forms where they exist (least squares, chains, stationarity
    system for multi-block); damped Newton polish otherwise.  All uncounted.
    """
    if isinstance(problem, adversarial.FiniteSumAdversarialInstance):
        x_star = problem.optimum()
        return {"kind": "closed_form", "x_star": x_star, "f_star": problem.optimum_value()}
    if isinstance(problem, adversarial.DualAdversarialInstance):
        P = problem.optimum()
        return {"kind": "closed_form", "p_star": P, "f_star": problem.optimum_value()}
    if isinstance(problem, problems.WeightedGLMProblem):
        if problem.kind == "squared":
            x_star, f_star = problems.least_squares_optimum(problem)
            return {"kind": "closed_form", "x_star": x_star, "f_star": f_star}
        x_star, f_star = _glm_newton(problem)
        return {"kind": "newton", "x_star": x_star, "f_star": f_star}
    if isinstance(problem, dual.MultiBlockProblem):
        Y, x_star = dual.kkt_direct_solve(problem)
        return {
            "kind": "stationarity_system",
            "y_star": Y,
            "x_star": x_star,
            "f_star": problem.primal_value(Y),
        }
    if isinstance(problem, composite.CompositeProblem):
        x_star, f_star = composite.composite_reference(problem)
        return {"kind": "newton", "x_star": x_star, "f_star": f_star}
    if isinstance(problem, problems.FiniteSumProblem):
        x_star, f_star = _finite_sum_newton(problem)
        return {"kind": "newton", "x_star": x_star, "f_star": f_star}
    raise TypeError(f"no reference recipe for {type(problem).__name__}")


def _glm_newton(problem, tol: float = 1e-13, max_iter: int = 200):
    x = np.zeros(problem.dim)
    for _ in range(max_iter):
        g = problem.full_grad_uncounted(x)
        if np.linalg.norm(g) <= tol:
            break
        step = np.linalg.solve(problem.hessian_uncounted(x), g)
        t, f0 = 1.0, problem.objective(x)
        while t > 1e-8 and problem.objective(x - t * step) > f0:
            t *= 0.5
        x = x - t * step
    return x, problem.objective(x)


def _finite_sum_newton(problem, tol: float = 1e-12, max_iter: int = 400, fd_eps: float = 1e-6):
    # generic fallback: quasi-Newton on the uncounted full gradient
    from scipy.optimize import minimize

    res = minimize(
        problem.objective,
        np.zeros(problem.dim),
        jac=problem.full_grad_uncounted,
        method="L-BFGS-B",
        options={"maxiter": max_iter, "ftol": 1e-18, "gtol": tol},
    )
    return res.x, float(res.fun)
