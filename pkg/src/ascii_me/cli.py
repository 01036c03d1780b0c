"""Command-line front end.

Subcommands:

- ``run``           one evolution run from a config file
- ``sweep``         repeat the run across an axis (batch_size, ga_fraction,
                    source_mode) and a set of seeds, with aggregation
- ``ablate-ga``     sweep sugar: ga_fraction over 0, 0.25, 0.5, 0.75, 1.0
- ``ablate-source`` sweep sugar: variation targets from buffer vs archive
- ``centroids``     pre-generate and cache a centroid set for an environment
- ``report``        turn a directory of finished runs into plot-ready CSVs

Configuration comes from a single TOML or JSON file (keys mirror RunConfig;
nested ``isoline``/``ascii``/``env_kwargs`` tables) plus any number of
``--set dotted.key=value`` overrides, applied before validation.  Values
after ``=`` are parsed as JSON when possible, else kept as strings.

Output paths default under the directory named by the ASCII_ME_OUTPUT_ROOT
environment variable (``./results`` when unset); ``--out`` overrides.

Exit codes: 0 success; 1 nothing to report; 2 configuration error
(including argument errors); 3 runtime failure or partially failed sweep.
"""

from __future__ import annotations

import argparse
import functools
import json
import os
import sys
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:
    import tomli as tomllib

from .archive import centroid_cache_path, load_or_generate_centroids
from .bench import SweepSpec, report, run_sweep
from .envs import make_env
from .scheduler import RunConfig, run

_AXIS_VALUE_TYPES = {
    "batch_size": int,
    "ga_fraction": float,
    "source_mode": str,
}


class ConfigError(Exception):
    """User-facing configuration problem; maps to exit code 2."""


def _output_root():
    return Path(os.environ.get("ASCII_ME_OUTPUT_ROOT", "results"))


def _resolve_out(explicit, *default_parts):
    if explicit:
        return Path(explicit)
    return _output_root().joinpath(*default_parts)


def _parse_scalar(text):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def _load_config_file(path):
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    if path.suffix == ".toml":
        try:
            data = tomllib.loads(path.read_text())
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"invalid TOML in {path}: {exc}") from None
    elif path.suffix == ".json":
        try:
            data = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON in {path}: {exc}") from None
    else:
        raise ConfigError(
            f"config file must end in .toml or .json, got '{path.name}'")
    if not isinstance(data, dict):
        raise ConfigError(f"config file {path} must hold a table of keys")
    return data


def _apply_overrides(data, overrides):
    for item in overrides:
        key, sep, raw = item.partition("=")
        if not sep or not key:
            raise ConfigError(f"--set expects KEY=VALUE, got '{item}'")
        node = data
        parts = key.split(".")
        for part in parts[:-1]:
            node = node.setdefault(part, {})
            if not isinstance(node, dict):
                raise ConfigError(
                    f"--set {key}: '{part}' is not a nested table")
        node[parts[-1]] = _parse_scalar(raw)


def _build_config(args):
    data = _load_config_file(args.config)
    _apply_overrides(data, args.overrides)
    try:
        return RunConfig.from_dict(data)
    except (ValueError, TypeError) as exc:
        raise ConfigError(str(exc)) from None


def _parse_axis_values(axis, text):
    convert = _AXIS_VALUE_TYPES[axis]
    tokens = [t.strip() for t in text.split(",") if t.strip()]
    if not tokens:
        raise ConfigError("--values must list at least one value")
    try:
        return [convert(t) for t in tokens]
    except ValueError:
        raise ConfigError(
            f"--values for axis {axis} must be {convert.__name__}s, "
            f"got '{text}'") from None


def _parse_seeds(text, fallback):
    if not text:
        return [fallback]
    try:
        return [int(t.strip()) for t in text.split(",") if t.strip()]
    except ValueError:
        raise ConfigError(f"--seeds must be integers, got '{text}'") from None


def _cmd_run(args):
    config = _build_config(args)
    out = _resolve_out(args.out, "runs",
                       f"{config.env_name}-seed{config.seed}")
    result = run(config, output_dir=out)
    metrics = result.archive.metrics()
    top = ("none" if metrics.max_fitness is None
           else "%.6g" % metrics.max_fitness)
    print(f"completed {result.evaluations} evaluations "
          f"in {result.wall_time:.2f}s")
    print(f"qd_score={metrics.qd_score:.6g} coverage={metrics.coverage:.4f} "
          f"max_fitness={top} -> {out}")
    return 0


def _progress_line(total):
    done = {"count": 0}

    def show(record):
        done["count"] += 1
        head = f"[{done['count']}/{total}] value={record.value} " \
               f"seed={record.seed}"
        if record.status == "ok":
            print(f"{head} qd_score={record.final['qd_score']:.6g} "
                  f"({record.final['wall_time']:.2f}s)")
        else:
            print(f"{head} FAILED: {record.error}")

    return show


def _cmd_sweep(args, axis=None, default_values=None):
    config = _build_config(args)
    axis = axis if axis is not None else args.axis
    values_text = args.values if args.values else default_values
    values = _parse_axis_values(axis, values_text)
    seeds = _parse_seeds(args.seeds, config.seed)
    try:
        spec = SweepSpec(base=config, axis=axis, values=values, seeds=seeds)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    out = _resolve_out(args.out, "sweeps", axis)
    if args.parallel:
        print("warning: --parallel makes wall-clock comparisons between "
              "runs meaningless", file=sys.stderr)
    result = run_sweep(spec, out, parallel=args.parallel,
                       progress=_progress_line(len(values) * len(seeds)))
    print(f"sweep complete: {len(result.runs) - len(result.failures)} ok, "
          f"{len(result.failures)} failed -> {out}")
    return 3 if result.failures else 0


def _cmd_centroids(args):
    try:
        env = make_env(args.env)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    cache_dir = _resolve_out(args.cache_dir, "centroids")
    load_or_generate_centroids(args.count, env.spec.descriptor_bounds,
                               args.seed, cache_dir)
    print(centroid_cache_path(args.count, env.spec.descriptor_bounds,
                              args.seed, cache_dir))
    return 0


def _cmd_report(args):
    summary = report(args.results_dir, args.out)
    for run_id, reason in summary.skipped:
        print(f"skipped {run_id}: {reason}", file=sys.stderr)
    if not summary.runs:
        print("nothing to report", file=sys.stderr)
        return 1
    print(f"reported {len(summary.runs)} runs -> {summary.out_dir}")
    return 0


def _add_config_arguments(parser):
    parser.add_argument("--config", required=True,
                        help="TOML or JSON run configuration")
    parser.add_argument("--set", dest="overrides", action="append",
                        default=[], metavar="KEY=VALUE",
                        help="override a config key (dotted for nesting); "
                             "repeatable")


def _add_sweep_arguments(parser, with_axis):
    if with_axis:
        parser.add_argument("--axis", required=True,
                            choices=sorted(_AXIS_VALUE_TYPES),
                            help="which config field to sweep")
        parser.add_argument("--values", required=True,
                            help="comma-separated axis values")
    else:
        parser.add_argument("--values",
                            help="comma-separated axis values "
                                 "(defaults to the standard set)")
    parser.add_argument("--seeds",
                        help="comma-separated seeds (default: config seed)")
    parser.add_argument("--out", help="sweep output directory")
    parser.add_argument("--parallel", action="store_true",
                        help="run sweep members concurrently "
                             "(wall-clock comparisons become meaningless)")


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="ascii-me",
        description="Quality-diversity neuroevolution benchmark harness.",
        epilog="exit codes: 0 success, 1 nothing to report, "
               "2 config error, 3 runtime or partial sweep failure")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="execute one evolution run")
    _add_config_arguments(p)
    p.add_argument("--out", help="run output directory")
    p.set_defaults(handler=_cmd_run)

    p = sub.add_parser("sweep", help="run across an axis and seeds")
    _add_config_arguments(p)
    _add_sweep_arguments(p, with_axis=True)
    p.set_defaults(handler=_cmd_sweep)

    p = sub.add_parser("ablate-ga",
                       help="sweep the genetic-variation share")
    _add_config_arguments(p)
    _add_sweep_arguments(p, with_axis=False)
    p.set_defaults(handler=functools.partial(
        _cmd_sweep, axis="ga_fraction",
        default_values="0,0.25,0.5,0.75,1.0"))

    p = sub.add_parser("ablate-source",
                       help="sweep the variation-target source")
    _add_config_arguments(p)
    _add_sweep_arguments(p, with_axis=False)
    p.set_defaults(handler=functools.partial(
        _cmd_sweep, axis="source_mode", default_values="buffer,archive"))

    p = sub.add_parser("centroids",
                       help="pre-generate a cached centroid set")
    p.add_argument("--env", required=True, help="environment name")
    p.add_argument("--count", type=int, default=1024,
                   help="number of centroids (default 1024)")
    p.add_argument("--seed", type=int, default=1,
                   help="tessellation seed (default 1)")
    p.add_argument("--cache-dir", help="cache directory")
    p.set_defaults(handler=_cmd_centroids)

    p = sub.add_parser("report",
                       help="summarize finished runs into CSV tables")
    p.add_argument("results_dir", help="directory holding completed runs")
    p.add_argument("--out", help="table output directory "
                                 "(default <results_dir>/report)")
    p.set_defaults(handler=_cmd_report)

    return parser


def main(argv=None):
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.handler(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    raise SystemExit(main())
