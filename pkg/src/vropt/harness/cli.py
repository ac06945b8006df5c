"""Command-line interface.

Subcommands::

    vropt run <config.json> [--out DIR]
    vropt tune <config.json> [--out DIR]
    vropt preset <name> [--scale S] [--seed N] [--out DIR] [--budget P]
    vropt generate <instance-spec.json> [--out FILE]
    vropt plot <trace.csv> [<trace.csv> ...] --out FILE [--title T]

Exit codes: 0 success, 2 configuration error, 3 divergence-only outcome.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .config import ConfigError, parse_config, problem_from_spec
from .plot import emit_plot, series_from_csv
from .runner import DivergedError, preset, run, tune_grid


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="vropt", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run the solvers of a config")
    p_run.add_argument("config", type=Path)
    p_run.add_argument("--out", type=Path, default=None)

    p_tune = sub.add_parser("tune", help="grid-tune a solver's parameter scale")
    p_tune.add_argument("config", type=Path)
    p_tune.add_argument("--out", type=Path, default=None)

    p_preset = sub.add_parser("preset", help="run a figure-replication preset")
    p_preset.add_argument("name")
    p_preset.add_argument("--scale", type=float, default=1.0)
    p_preset.add_argument("--seed", type=int, default=0)
    p_preset.add_argument("--out", type=Path, default=None)
    p_preset.add_argument("--budget", type=float, default=None, help="pass budget override")

    p_gen = sub.add_parser("generate", help="materialize a worst-case instance description")
    p_gen.add_argument("spec", type=Path)
    p_gen.add_argument("--out", type=Path, default=None)

    p_plot = sub.add_parser("plot", help="emit an SVG from trace CSVs")
    p_plot.add_argument("traces", nargs="+", type=Path)
    p_plot.add_argument("--out", type=Path, required=True)
    p_plot.add_argument("--title", default="")

    args = parser.parse_args(argv)
    try:
        return _dispatch(args)
    except ConfigError as exc:
        for issue in exc.issues:
            print(f"config error: {issue}", file=sys.stderr)
        return 2
    except (FileNotFoundError, json.JSONDecodeError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except DivergedError as exc:
        print(f"diverged: {exc}", file=sys.stderr)
        return 3


def _dispatch(args) -> int:
    if args.command == "run":
        out = run(parse_config(args.config), args.out)
        print(out)
        return 0
    if args.command == "tune":
        result = tune_grid(parse_config(args.config), args.out)
        print(json.dumps({k: result[k] for k in ("solver", "best_scale", "best_gap")}, indent=2))
        for e in result["table"]:
            gap = e.get("gap")
            print(f"  scale={e['scale']:<10g} status={e['status']:<9} gap={gap:.3e}")
        return 0
    if args.command == "preset":
        cfg = preset(args.name, scale=args.scale, seed=args.seed, budget=args.budget)
        out = run(cfg, args.out or f"results/{args.name}_s{args.scale}_seed{args.seed}")
        print(out)
        return 0
    if args.command == "generate":
        with open(args.spec) as fh:
            spec = json.load(fh)
        instance = problem_from_spec(spec)
        desc = instance.describe()
        if hasattr(instance, "optimum_value"):
            desc["optimum_value"] = instance.optimum_value()
        if hasattr(instance, "nu"):
            desc["nu"] = np.asarray(instance.nu).tolist()
            desc["q"] = np.asarray(instance.q).tolist()
        text = json.dumps(desc, indent=2) + "\n"
        if args.out:
            Path(args.out).write_text(text)
            print(args.out)
        else:
            print(text, end="")
        return 0
    if args.command == "plot":
        series = [series_from_csv(p) for p in args.traces]
        out = emit_plot(series, args.out, title=args.title)
        print(out)
        return 0
    raise ConfigError([f"command: unknown {args.command!r}"])


if __name__ == "__main__":
    sys.exit(main())
