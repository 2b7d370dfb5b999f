"""Command-line interface.

Subcommands: ``solve`` (closed-form asymptotics of a model file),
``simulate`` (constrained kinetic Monte Carlo), ``winprob`` (first-to-fire
probabilities of a clock set), ``fit`` (parameter fitting), ``bench``
(engine timing comparison), ``synth`` (synthetic dataset generation) and
``plot`` (tidy CSV series for figures).  Configs are JSON; any key can be
overridden with ``--set key=value`` (dotted paths).  Exit codes: 0 success,
1 validation error, 2 numerical failure, 3 fit did not converge (the result
file is still written).
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import replace
from pathlib import Path

from . import dataio, fitting, kernels
from .asymptotics import (EventModel, ModelDegeneracyError,
                          ModelValidationError, UnsupportedTopologyError,
                          solve_model)
from .densities import DensitySpec
from .simulator import SimConfig, run_replicates
from .winprob import QuadratureError, win_probabilities

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_NUMERICAL = 2
EXIT_NOT_CONVERGED = 3


def _default_workers() -> int:
    env = os.environ.get("ASYMFRAC_WORKERS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def _load_config(path: str) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise ValueError(f"config file not found: {path}")
    except json.JSONDecodeError as exc:
        raise ValueError(f"config file {path} is not valid JSON: {exc}")


def _apply_overrides(config: dict, pairs) -> dict:
    for pair in pairs or ():
        key, sep, raw = pair.partition("=")
        if not sep:
            raise ValueError(f"--set expects key=value, got {pair!r}")
        node = config
        parts = key.split(".")
        for part in parts[:-1]:
            if not isinstance(node, dict) or part not in node:
                raise ValueError(f"--set references unknown config key {key!r}")
            node = node[part]
        if not isinstance(node, dict) or parts[-1] not in node:
            raise ValueError(f"--set references unknown config key {key!r}")
        try:
            node[parts[-1]] = json.loads(raw)
        except json.JSONDecodeError:
            node[parts[-1]] = raw
    return config


def _write_output(obj: dict, output) -> None:
    text = json.dumps(obj, indent=2) + "\n"
    if output:
        Path(output).write_text(text)
    else:
        sys.stdout.write(text)


# --- subcommand handlers ----------------------------------------------------

def _cmd_solve(args) -> int:
    config = _apply_overrides(_load_config(args.config), args.set)
    model = EventModel.from_dict(config)
    result = solve_model(model)
    print(f"outcomes: {', '.join(result.outcomes)}")
    for name, frac in result.fractions.items():
        print(f"  fraction[{name}] = {frac:.10g}")
    for (i, k), v in result.ratios.items():
        print(f"  ratio {i}/{k} = {v:.10g}")
    _write_output(result.as_dict(), args.output)
    return EXIT_OK


def _cmd_simulate(args) -> int:
    config = _apply_overrides(_load_config(args.config), args.set)
    model = EventModel.from_dict(config)
    sim = SimConfig(model=model, sample_size=args.events,
                    seed=args.seed if args.seed is not None else 0,
                    replicates=args.replicates, log_events=args.log_events)
    batch = run_replicates(sim, kernel=args.kernel, workers=args.workers)
    for pair, summary in batch.summary.items():
        se = "n/a" if summary.stderr is None else f"{summary.stderr:.3e}"
        print(f"ratio {pair[0]}/{pair[1]}: mean={summary.mean:.6g} stderr={se}")
    out = {
        "model": model.as_dict(),
        "events": sim.sample_size,
        "replicates": sim.replicates,
        "seed": sim.seed,
        "kernel": kernels.active_kernel_name(args.kernel),
        "batch": batch.as_dict(include_timing=False),
    }
    _write_output(out, args.output)
    return EXIT_OK


def _cmd_winprob(args) -> int:
    config = _apply_overrides(_load_config(args.config), args.set)
    clock_dicts = config["clocks"] if isinstance(config, dict) else config
    clocks = [DensitySpec.from_dict(c) for c in clock_dicts]
    p = win_probabilities(clocks, kernel=args.kernel)
    out = {"probabilities": p.tolist()}
    print(json.dumps(out))
    if args.output:
        _write_output(out, args.output)
    return EXIT_OK


def _build_problem(config: dict, config_path: str,
                   seed_override) -> fitting.FitProblem:
    data = None
    if "dataset" in config:
        dataset_path = Path(config["dataset"])
        if not dataset_path.is_absolute():
            dataset_path = Path(config_path).parent / dataset_path
        data = dataio.load_dataset(dataset_path).points
    problem = fitting.FitProblem.from_dict(config, data=data)
    if seed_override is not None:
        if isinstance(problem.engine, fitting.MonteCarloEngine):
            problem.engine = replace(problem.engine, seed=seed_override)
        if isinstance(problem.optimizer, fitting.GeneticSpec):
            problem.optimizer = replace(problem.optimizer, seed=seed_override)
    return problem


def _cmd_fit(args) -> int:
    config = _apply_overrides(_load_config(args.config), args.set)
    problem = _build_problem(config, args.config, args.seed)
    result = fitting.fit(problem)
    status = "converged" if result.converged else "NOT converged"
    print(f"fit {status}: cost={result.cost:.6e} after "
          f"{result.iterations} iterations, {result.evaluations} evaluations")
    for name in problem.parameter_names:
        print(f"  {name} = {result.theta[name]:.6g}")
    out = {"problem": problem.as_dict(),
           "result": result.as_dict(include_timing=False)}
    _write_output(out, args.output)
    return EXIT_OK if result.converged else EXIT_NOT_CONVERGED


def _cmd_bench(args) -> int:
    config = _apply_overrides(_load_config(args.config), args.set)
    problem = _build_problem(config, args.config, args.seed)
    report = fitting.benchmark(problem, args.iterations, events=args.events)
    print(f"bench: {report.iterations} iterations, "
          f"{report.points} data points, G={report.events}")
    for name, entry in report.engines.items():
        print(f"  {name}: {entry['wall_time']:.3f} s")
    for kernel, factor in report.speedup.items():
        print(f"  speedup vs monte_carlo[{kernel}]: {factor:.1f}x")
    _write_output(report.as_dict(), args.output)
    return EXIT_OK


def _cmd_synth(args) -> int:
    if args.preset:
        dataset = dataio.bundled_dataset(args.preset)
    else:
        if not args.config:
            raise ValueError("synth needs --preset or --config")
        config = _apply_overrides(_load_config(args.config), args.set)
        seed = args.seed if args.seed is not None else config.get("seed")
        dataset = dataio.generate_synthetic(
            theta=config["theta"],
            family=config["family"],
            concs=config["concs"],
            noise_halfwidth=float(config.get("noise_halfwidth", 0.0)),
            jitter=bool(config.get("jitter", False)),
            seed=seed,
            n0=int(config.get("n0", 3)),
            monomer_conc=float(config.get("monomer_conc", 1.0)),
            label=config.get("label", "synthetic"))
    if not args.output:
        raise ValueError("synth needs --output")
    dataio.save_dataset(dataset, args.output)
    print(f"wrote {len(dataset.points)} points to {args.output}")
    return EXIT_OK


def _cmd_plot(args) -> int:
    if not args.output:
        raise ValueError("plot needs --output")
    payload = json.loads(Path(args.input).read_text())
    if args.kind == "fit_curve":
        if args.data:
            dataset = dataio.load_dataset(args.data)
        else:
            points = [fitting.DataPoint(**p)
                      for p in payload["problem"]["data"]]
            dataset = dataio.Dataset(label="fit data", points=tuple(points))
        per_point = [(p["conc"], p["model"])
                     for p in payload["result"]["per_point"]]
        dataio.emit_plot_data("fit_curve", args.output, dataset=dataset,
                              per_point=per_point)
    elif args.kind == "mc_scatter":
        ratio_key = None
        ratios = []
        for entry in payload["batch"]["results"]:
            if ratio_key is None:
                if not entry["ratios"]:
                    raise ValueError("simulation output carries no ratios")
                ratio_key = sorted(entry["ratios"])[0]
            ratios.append(entry["ratios"][ratio_key])
        if args.analytic is not None:
            level = args.analytic
        else:
            model = EventModel.from_dict(payload["model"])
            i, k = ratio_key.split("/")
            level = solve_model(model).ratio(i, k)
        dataio.emit_plot_data("mc_scatter", args.output, analytic=level,
                              ratios=ratios)
    elif args.kind == "timing":
        dataio.emit_plot_data("timing", args.output,
                              engines=payload["engines"])
    else:
        raise ValueError(f"unknown plot kind {args.kind!r}")
    print(f"wrote plot data to {args.output}")
    return EXIT_OK


# --- argument parsing --------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="asymfrac",
        description="Asymptotic event frequencies in constrained stochastic "
                    "processes: analytical solvers, constrained kinetic "
                    "Monte Carlo, and branching-fraction fitting.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, config_required=True):
        if config_required:
            p.add_argument("--config", required=True, help="JSON config file")
        else:
            p.add_argument("--config", help="JSON config file")
        p.add_argument("--output", help="write results to this file")
        p.add_argument("--seed", type=int, help="seed override")
        p.add_argument("--set", action="append", metavar="KEY=VALUE",
                       help="override a config key (dotted path)")

    p = sub.add_parser("solve", help="closed-form asymptotic fractions")
    common(p)
    p.set_defaults(handler=_cmd_solve)

    p = sub.add_parser("simulate", help="constrained kinetic Monte Carlo")
    common(p)
    p.add_argument("--events", type=int, default=10_000,
                   help="events per replicate (default 10000)")
    p.add_argument("--replicates", type=int, default=1)
    p.add_argument("--log-events", action="store_true",
                   help="record the fired outcome of every event")
    p.add_argument("--workers", type=int, default=_default_workers(),
                   help="parallel replicate workers (1 = sequential)")
    p.add_argument("--kernel", choices=kernels.KERNEL_NAMES, default="auto")
    p.set_defaults(handler=_cmd_simulate)

    p = sub.add_parser("winprob", help="first-to-fire clock probabilities")
    common(p)
    p.add_argument("--kernel", choices=kernels.KERNEL_NAMES, default="auto")
    p.set_defaults(handler=_cmd_winprob)

    p = sub.add_parser("fit", help="fit pdf parameters to a dataset")
    common(p)
    p.set_defaults(handler=_cmd_fit)

    p = sub.add_parser("bench", help="time analytical vs Monte Carlo engines")
    common(p)
    p.add_argument("--iterations", type=int, default=100)
    p.add_argument("--events", type=int,
                   help="Monte Carlo sample size override")
    p.set_defaults(handler=_cmd_bench)

    p = sub.add_parser("synth", help="generate a synthetic dataset")
    common(p, config_required=False)
    p.add_argument("--preset", choices=dataio.BUNDLED_DATASETS,
                   help="emit one of the bundled reference datasets")
    p.set_defaults(handler=_cmd_synth)

    p = sub.add_parser("plot", help="emit figure series as CSV")
    common(p, config_required=False)
    p.add_argument("--kind", required=True,
                   choices=("fit_curve", "mc_scatter", "timing"))
    p.add_argument("--input", required=True,
                   help="JSON artifact from solve/simulate/fit/bench")
    p.add_argument("--data", help="dataset file (fit_curve)")
    p.add_argument("--analytic", type=float,
                   help="analytical level override (mc_scatter)")
    p.set_defaults(handler=_cmd_plot)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_VALIDATION if exc.code not in (0, None) else EXIT_OK
    try:
        return args.handler(args)
    except (ModelValidationError, UnsupportedTopologyError, ValueError,
            KeyError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (QuadratureError, ModelDegeneracyError, ArithmeticError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
