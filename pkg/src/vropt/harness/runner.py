"""Experiment execution: solver dispatch, trace persistence, grid tuning.

Output layout per run directory:

    metadata.json        config echo, version, parameters actually used,
                         reference values, wall-clock times
    trace_<solver>.csv   one row per recorded pass (no wall time, so
                         identical config+seed reproduces identical bytes)
"""

from __future__ import annotations

import json
import math
import time
from pathlib import Path

import numpy as np

from .. import __version__ as _version
from .. import composite, dual
from ..problems import FiniteSumProblem
from ..sampling import derive_seed
from ..solvers import (
    run_agd,
    run_arcd_eliminated,
    run_katyusha,
    run_saga,
    run_ssnm,
    run_svrg,
    ssnm_parameters,
    uniform_ssnm_parameters,
)
from ..solvers.trace import TRACE_COLUMNS, ConvergenceTrace
from .config import ConfigError, ExperimentConfig, StopRule, compute_reference, problem_from_spec

EXTRA_COLUMNS = ("primal_gap",)


class DivergedError(RuntimeError):
    """Every run in a grid (or config) diverged."""


def trace_to_csv(trace: ConvergenceTrace) -> str:
    cols = list(TRACE_COLUMNS) + [c for c in EXTRA_COLUMNS if any(c in r for r in trace.rows)]
    lines = [",".join(cols)]
    for r in trace.rows:
        lines.append(",".join(_fmt(r.get(c, math.nan)) for c in cols))
    return "\n".join(lines) + "\n"


def _fmt(v) -> str:
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def write_trace(trace: ConvergenceTrace, path: Path) -> None:
    path.write_text(trace_to_csv(trace))


def _scale_kwargs(solver: str, scale: float) -> dict:
    if solver in ("ssnm", "ssnm_uniform", "dual_ssnm"):
        return {"param_scale": scale}
    if solver in ("katyusha", "katyusha_uniform", "katyusha_general", "katyusha_reduced"):
        return {"alpha_scale": scale}
    return {"step_scale": scale}


def run_solver(
    solver: str,
    problem,
    *,
    seed: int,
    stop,
    reference: dict | None = None,
    param_scale: float = 1.0,
    **overrides,
) -> ConvergenceTrace:
    """Run one named solver on a fresh counter view of the problem."""
    ref = reference or {}
    f_star = ref.get("f_star")
    x_star = ref.get("x_star")
    common = dict(
        seed=seed,
        max_passes=stop.max_passes,
        gap_tol=stop.gap_tol,
        dist_tol=stop.dist_tol,
        f_star=f_star,
    )
    if isinstance(problem, dual.MultiBlockProblem):
        if solver == "dual_ssnm":
            dual_prob = dual.build_dual(problem)
            config = ssnm_parameters(dual_prob.L, dual_prob.mu_total)
            if param_scale != 1.0:
                config = config.scaled(param_scale)
            _, trace = dual.solve_multiblock_via_dual(
                problem,
                seed=seed,
                max_passes=stop.max_passes,
                dual_dist_tol=stop.dist_tol,
                dual_gap_tol=stop.gap_tol,
                config=config,
            )
            return trace
        if solver == "arcd":
            sep = problem.separable_form()
            p_star = None
            if ref.get("y_star") is not None:
                shift = problem.b / problem.m
                p_star = np.array([y - shift for y in ref["y_star"]])
            return run_arcd_eliminated(
                sep,
                seed=seed,
                max_passes=stop.max_passes,
                gap_tol=stop.gap_tol,
                f_star=f_star,
                p_star=p_star,
                theta_scale=overrides.get("step_scale", 1.0),
            )
        raise ConfigError([f"solvers[{solver}]: not applicable to a multi-block problem"])
    if isinstance(problem, composite.CompositeProblem):
        work = problem.share()
        if solver in ("katyusha_general", "katyusha", "katyusha_reduced"):
            est = "reduced" if solver == "katyusha_reduced" else "general"
            return run_katyusha(
                work,
                x_star=x_star,
                estimator=est,
                alpha_scale=overrides.get("alpha_scale", param_scale),
                **common,
            )
        if solver == "agd":
            return composite.run_agd_composite(
                work,
                seed=seed,
                max_passes=stop.max_passes,
                gap_tol=stop.gap_tol,
                f_star=f_star,
                x_star=x_star,
                step_scale=overrides.get("step_scale", 1.0),
            )
        raise ConfigError([f"solvers[{solver}]: not applicable to a composite problem"])
    if not isinstance(problem, FiniteSumProblem):
        raise ConfigError([f"solvers[{solver}]: unsupported problem type {type(problem).__name__}"])
    work = problem.share()
    common["x_star"] = x_star
    if solver in ("ssnm", "ssnm_uniform"):
        uniform = solver == "ssnm_uniform"
        config = (
            uniform_ssnm_parameters(work.L, work.mu_total)
            if uniform
            else ssnm_parameters(work.L, work.mu_total)
        )
        if param_scale != 1.0:
            config = config.scaled(param_scale)
        return run_ssnm(work, config, uniform=uniform, **common)
    if solver == "saga":
        return run_saga(work, step_scale=overrides.get("step_scale", 1.0), **common)
    if solver == "svrg":
        return run_svrg(work, step_scale=overrides.get("step_scale", 1.0), **common)
    if solver in ("katyusha", "katyusha_uniform"):
        return run_katyusha(
            work,
            uniform=solver == "katyusha_uniform",
            alpha_scale=overrides.get("alpha_scale", 1.0),
            **common,
        )
    if solver == "agd":
        return run_agd(work, step_scale=overrides.get("step_scale", 1.0), **common)
    raise ConfigError([f"solvers[{solver}]: not applicable to a finite-sum problem"])


def run(config: ExperimentConfig, out_dir: str | Path | None = None) -> Path:
    """Execute every configured solver and persist metadata plus traces."""
    out = Path(out_dir or config.out_dir or f"results/{config.label}")
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    problem = problem_from_spec(config.problem)
    reference = compute_reference(problem)
    meta = {
        "config": config.to_json_dict(),
        "version": _version,
        "reference": {"kind": reference["kind"], "f_star": reference.get("f_star")},
        "solver_params": {},
        "wall_times": {},
        "flags": {},
    }
    any_finished = False
    for solver in config.solvers:
        params = dict(config.solver_params.get(solver, {}))
        scale = params.pop("param_scale", 1.0)
        t1 = time.perf_counter()
        trace = run_solver(
            solver,
            problem,
            seed=config.seed,
            stop=config.stop,
            reference=reference,
            param_scale=scale,
            **params,
        )
        meta["wall_times"][solver] = time.perf_counter() - t1
        meta["solver_params"][solver] = _jsonable(trace.params)
        meta["flags"][solver] = trace.flags
        write_trace(trace, out / f"trace_{solver}.csv")
        any_finished |= not trace.flags["diverged"]
    meta["total_wall_time"] = time.perf_counter() - t0
    (out / "metadata.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    if not any_finished:
        raise DivergedError(f"all solvers diverged; results in {out}")
    return out


def tune_grid(config: ExperimentConfig, out_dir: str | Path | None = None) -> dict:
    """Run every grid scale with the same seed; report the best.

    Best = smallest final gap at the budget; ties prefer scale 1, then the
    smaller |k|.  Diverged and invalid-parameter runs are kept in the table
    but never win.  Raises DivergedError when nothing finishes.
    """
    solver = config.grid.target or config.solvers[0]
    problem = problem_from_spec(config.problem)
    reference = compute_reference(problem)
    table = []
    for scale, k, mult in config.grid.scales():
        entry = {"scale": scale, "k": k, "mult": mult}
        kwargs = _scale_kwargs(solver, scale)
        try:
            trace = run_solver(
                solver,
                problem,
                seed=config.seed,
                stop=config.stop,
                reference=reference,
                param_scale=kwargs.pop("param_scale", 1.0),
                **kwargs,
            )
        except ValueError as exc:  # invalid parameters at this scale
            entry.update(status="invalid", detail=str(exc), gap=math.inf)
            table.append(entry)
            continue
        gap = trace.last["gap"]
        entry.update(
            status="diverged" if trace.flags["diverged"] else "ok",
            gap=gap if math.isfinite(gap) else math.inf,
            passes=trace.last["passes"],
        )
        table.append(entry)
    finishers = [e for e in table if e["status"] == "ok" and math.isfinite(e["gap"])]
    if not finishers:
        raise DivergedError("all grid points diverged or were invalid")
    best = min(finishers, key=lambda e: (e["gap"], e["scale"] != 1.0, abs(e["k"])))
    result = {"solver": solver, "best_scale": best["scale"], "best_gap": best["gap"], "table": table}
    if out_dir or config.out_dir:
        out = Path(out_dir or config.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "grid.json").write_text(json.dumps(_jsonable(result), indent=2) + "\n")
    return result


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, float) and not math.isfinite(obj):
        return repr(obj)
    return obj


# ---------------------------------------------------------------------------
# Figure-replication presets


PRESETS = {
    "fig1": {
        "problem": {"family": "weighted_least_squares", "m": 10000, "n": 100, "mu": 1e-5},
        "solvers": ["saga", "svrg", "katyusha_uniform", "ssnm_uniform", "ssnm"],
        "stop": {"max_passes": 60.0},
    },
    "fig2": {
        "problem": {"family": "weighted_logistic", "m": 10000, "n": 100, "mu": 1e-5},
        "solvers": ["saga", "svrg", "katyusha_uniform", "ssnm_uniform", "ssnm"],
        "stop": {"max_passes": 60.0},
    },
    "fig3": {
        "problem": {"family": "multiblock_quadratic", "m": 10, "n": 10, "mu_min": 1e-3},
        "solvers": ["dual_ssnm", "arcd"],
        "stop": {"max_passes": 3000.0, "gap_tol": 1e-10},
    },
    "fig4": {
        "problem": {"family": "composite_quadratic", "m": 80, "n": 80, "mu_min": 1e-5},
        "solvers": ["katyusha_general", "agd"],
        "stop": {"max_passes": 2000.0, "gap_tol": 1e-10},
    },
}


def preset(name: str, scale: float = 1.0, seed: int = 0, out_dir: str | None = None, budget: float | None = None) -> ExperimentConfig:
    """Experiment family matching the named figure, shrunk by ``scale``.

    ``scale`` in (0, 1] multiplies the instance sizes m and n (floored at
    10); everything else is unchanged.
    """
    if name not in PRESETS:
        raise ConfigError([f"preset: unknown name {name!r} (choose from {', '.join(PRESETS)})"])
    if not 0.0 < scale <= 1.0:
        raise ConfigError(["preset.scale: must lie in (0, 1]"])
    blueprint = PRESETS[name]
    prob = dict(blueprint["problem"])
    for key in ("m", "n"):
        prob[key] = max(10, round(prob[key] * scale))
    prob["seed"] = seed
    stop = dict(blueprint["stop"])
    if budget is not None:
        stop["max_passes"] = budget
    return ExperimentConfig(
        problem=prob,
        solvers=list(blueprint["solvers"]),
        seed=seed,
        stop=StopRule(max_passes=float(stop.get("max_passes", 100.0)), gap_tol=stop.get("gap_tol")),
        out_dir=out_dir,
        label=name,
    )
