"""Experiment harness: sweeps, aggregation, and plot-ready reports.

A sweep runs the evolution loop once per (axis value, seed) pair and
aggregates the per-seed finals into medians with lower and upper quartiles.
Failures are recorded per run and never abort the remaining runs.

``report`` walks a directory tree of completed runs and rewrites them as
flat CSV files a plotting tool can consume directly.  Every CSV starts with
a ``#schema=<name>/v1`` tag line so downstream consumers can detect layout
changes; floats are rendered with ``%.12g``.  Files written:

- ``summary.csv`` -- one row per run with its final metrics.
- ``curves_evaluations.csv`` / ``curves_walltime.csv`` -- metric curves
  against evaluation count and cumulative wall-clock seconds.
- ``attribution.csv`` -- per-iteration archive additions split by the
  operator that produced them.
- ``efficiency.csv`` / ``efficiency_summary.csv`` -- the batch-size
  efficiency procedure applied to runs grouped by task and batch size.

The efficiency score balances final quality against runtime: per task,
min-max normalize QD scores and runtimes across configurations, flip the
runtime axis so higher is better, multiply the two factors, then average
across tasks and pick the configuration with the highest mean.  A
degenerate range (all configurations equal on an axis) contributes factor
1 so a lone configuration is not penalized.
"""

from __future__ import annotations

import csv
import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

import numpy as np

from .scheduler import RunConfig, run

# sweepable axis name -> RunConfig field it drives
_AXES = {
    "batch_size": "batch_size",
    "ga_fraction": "ga_fraction",
    "source_mode": "target_source",
}

_AGGREGATE_METRICS = ("qd_score", "coverage", "max_fitness", "wall_time")


def _fmt(value):
    """Render one CSV cell: ints plainly, floats with %.12g, None empty."""
    if value is None:
        return ""
    if isinstance(value, str):
        return value
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return "%.12g" % value


def _write_csv(path, schema, header, rows):
    with open(path, "w", newline="") as fh:
        fh.write(f"#schema={schema}/v1\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(cell) for cell in row])


def quartile_summary(values):
    """(lower quartile, median, upper quartile) of a non-empty sequence.

    The median follows the order-statistic definition exactly (mean of the
    two middle values for even counts); quartiles interpolate linearly.
    """
    values = [float(v) for v in values]
    if not values:
        raise ValueError("need at least one value")
    q1, q3 = np.percentile(values, [25.0, 75.0])
    return float(q1), float(np.median(values)), float(q3)


@dataclass(frozen=True)
class EfficiencyEntry:
    config: str
    task: str
    qd_score: float
    runtime: float
    qd_normalized: float
    runtime_adjusted: float
    score: float


@dataclass
class EfficiencyTable:
    entries: list
    mean_scores: dict  # config -> mean score across tasks
    best: str          # config with the highest mean (ties: first listed)


def efficiency_scores(results):
    """Score configurations on quality-vs-runtime balance.

    ``results`` maps configuration label -> task -> (qd_score, runtime);
    every configuration must cover the same tasks.  Ordering in the output
    follows the input's configuration and task order.
    """
    configs = list(results)
    if not configs:
        raise ValueError("no configurations to score")
    tasks = list(results[configs[0]])
    if not tasks:
        raise ValueError("no tasks to score")
    for config in configs:
        if list(results[config]) != tasks and (
                set(results[config]) != set(tasks)):
            raise ValueError(
                f"configuration '{config}' does not cover the same tasks "
                f"as '{configs[0]}'")

    spans = {}
    for task in tasks:
        qds = [results[c][task][0] for c in configs]
        rts = [results[c][task][1] for c in configs]
        spans[task] = (min(qds), max(qds), min(rts), max(rts))

    entries = []
    mean_scores = {}
    for config in configs:
        scores = []
        for task in tasks:
            qd, rt = results[config][task]
            q_lo, q_hi, r_lo, r_hi = spans[task]
            qd_norm = 1.0 if q_hi == q_lo else (qd - q_lo) / (q_hi - q_lo)
            rt_adj = 1.0 if r_hi == r_lo else 1.0 - (rt - r_lo) / (r_hi - r_lo)
            score = qd_norm * rt_adj
            entries.append(EfficiencyEntry(config, task, float(qd), float(rt),
                                           qd_norm, rt_adj, score))
            scores.append(score)
        mean_scores[config] = sum(scores) / len(scores)
    best = max(configs, key=mean_scores.__getitem__)
    return EfficiencyTable(entries=entries, mean_scores=mean_scores,
                           best=best)


@dataclass
class SweepSpec:
    base: RunConfig
    axis: str     # one of batch_size, ga_fraction, source_mode
    values: list
    seeds: list

    def __post_init__(self):
        if self.axis not in _AXES:
            raise ValueError(
                f"unknown sweep axis '{self.axis}'; choose from "
                f"{sorted(_AXES)}")
        self.values = list(self.values)
        self.seeds = [int(s) for s in self.seeds]
        if not self.values:
            raise ValueError("sweep needs at least one value")
        if not self.seeds:
            raise ValueError("sweep needs at least one seed")
        if len(set(self.seeds)) != len(self.seeds):
            raise ValueError("seeds must be distinct")


@dataclass
class RunRecord:
    value: object
    seed: int
    path: str    # run directory relative to the sweep root
    status: str  # "ok" or "failed"
    error: Optional[str] = None
    final: Optional[dict] = None


@dataclass
class ValueAggregate:
    value: object
    runs_ok: int
    runs_failed: int
    metrics: dict  # metric -> {"q1": .., "median": .., "q3": ..}


@dataclass
class SweepResult:
    axis: str
    rows: list      # ValueAggregate per value with at least one finished run
    runs: list      # RunRecord per (value, seed), in submission order
    failures: list = field(default_factory=list)


def _execute_one(spec, out_root, value, seed):
    rel = f"runs/{spec.axis}={value}/seed={seed}"
    try:
        config = replace(spec.base, seed=seed, **{_AXES[spec.axis]: value})
        result = run(config, output_dir=out_root / rel)
        metrics = result.archive.metrics()
        final = {
            "evaluations": result.evaluations,
            "qd_score": metrics.qd_score,
            "coverage": metrics.coverage,
            "max_fitness": metrics.max_fitness,
            "wall_time": result.wall_time,
        }
        return RunRecord(value, seed, rel, "ok", final=final)
    except Exception as exc:
        return RunRecord(value, seed, rel, "failed",
                         error=f"{type(exc).__name__}: {exc}")


def run_sweep(spec, output_dir, parallel=False, progress=None):
    """One run per (value, seed); aggregate finals per value.

    Failed runs are recorded in the manifest and skipped by aggregation;
    the sweep always finishes the remaining runs.  ``parallel`` runs them
    concurrently, which makes wall-clock comparisons between runs
    meaningless.  ``progress`` is an optional callable fed each RunRecord
    as it completes.
    """
    out_root = Path(output_dir)
    out_root.mkdir(parents=True, exist_ok=True)
    jobs = [(value, seed) for value in spec.values for seed in spec.seeds]

    if parallel and len(jobs) > 1:
        with ThreadPoolExecutor(min(len(jobs), os.cpu_count() or 1)) as pool:
            records = list(pool.map(
                lambda job: _execute_one(spec, out_root, *job), jobs))
        if progress is not None:
            for record in records:
                progress(record)
    else:
        records = []
        for job in jobs:
            record = _execute_one(spec, out_root, *job)
            records.append(record)
            if progress is not None:
                progress(record)

    failures = [r for r in records if r.status != "ok"]

    rows = []
    for value in spec.values:
        ok = [r for r in records if r.value == value and r.status == "ok"]
        failed = [r for r in records
                  if r.value == value and r.status != "ok"]
        if not ok:
            continue
        metrics = {}
        for name in _AGGREGATE_METRICS:
            observed = [r.final[name] for r in ok
                        if r.final.get(name) is not None]
            if not observed:
                continue
            q1, median, q3 = quartile_summary(observed)
            metrics[name] = {"q1": q1, "median": median, "q3": q3}
        rows.append(ValueAggregate(value, len(ok), len(failed), metrics))

    manifest = {
        "axis": spec.axis,
        "values": list(spec.values),
        "seeds": list(spec.seeds),
        "runs": [{"value": r.value, "seed": r.seed, "dir": r.path,
                  "status": r.status, "error": r.error} for r in records],
    }
    (out_root / "sweep.json").write_text(json.dumps(manifest, indent=2))

    with open(out_root / "finals.jsonl", "w") as fh:
        for record in records:
            if record.status != "ok":
                continue
            fh.write(json.dumps({"value": record.value, "seed": record.seed,
                                 "dir": record.path, **record.final}) + "\n")

    header = ["value", "runs_ok", "runs_failed"]
    for name in _AGGREGATE_METRICS:
        header += [f"{name}_q1", f"{name}_median", f"{name}_q3"]
    csv_rows = []
    for row in rows:
        cells = [row.value, row.runs_ok, row.runs_failed]
        for name in _AGGREGATE_METRICS:
            stats = row.metrics.get(name)
            if stats is None:
                cells += [None, None, None]
            else:
                cells += [stats["q1"], stats["median"], stats["q3"]]
        csv_rows.append(cells)
    _write_csv(out_root / "aggregates.csv", "sweep_aggregates", header,
               csv_rows)

    return SweepResult(axis=spec.axis, rows=rows, runs=records,
                       failures=failures)


@dataclass
class ReportSummary:
    out_dir: Path
    runs: list     # run ids included, sorted
    skipped: list  # (run id, reason)
    files: list    # CSV file names written into out_dir


_REPORT_FILES = (
    "summary.csv",
    "curves_evaluations.csv",
    "curves_walltime.csv",
    "attribution.csv",
    "efficiency.csv",
    "efficiency_summary.csv",
)


def _load_run(run_dir):
    config = json.loads((run_dir / "config.json").read_text())
    final = json.loads((run_dir / "final.json").read_text())
    reports = [json.loads(line)
               for line in (run_dir / "reports.jsonl").read_text().splitlines()
               if line.strip()]
    return config, final, reports


def _source_order(additions):
    known = [s for s in ("init", "isoline", "ascii") if s in additions]
    return known + sorted(set(additions) - set(known))


def _efficiency_rows(loaded):
    """Group runs by (task, batch size) and score the batch sizes."""
    grouped = {}
    for _, config, final, _ in loaded:
        task = config.get("env_name")
        batch = config.get("batch_size")
        if task is None or batch is None:
            continue
        grouped.setdefault((task, int(batch)), []).append(final)
    if not grouped:
        return [], []

    tasks = sorted({task for task, _ in grouped})
    batches = sorted({batch for _, batch in grouped})
    # efficiency needs a complete table: keep batch sizes run on every task
    complete = [b for b in batches
                if all((t, b) in grouped for t in tasks)]
    if not complete:
        return [], []
    results = {}
    for batch in complete:
        per_task = {}
        for task in tasks:
            finals = grouped[(task, batch)]
            _, qd_median, _ = quartile_summary(
                [f["qd_score"] for f in finals])
            _, rt_median, _ = quartile_summary(
                [f["wall_time"] for f in finals])
            per_task[task] = (qd_median, rt_median)
        results[f"k={batch}"] = per_task
    table = efficiency_scores(results)

    entry_rows = [[e.config, e.task, e.qd_score, e.runtime, e.qd_normalized,
                   e.runtime_adjusted, e.score] for e in table.entries]
    summary_rows = [[config, score, 1 if config == table.best else 0]
                    for config, score in table.mean_scores.items()]
    return entry_rows, summary_rows


def report(results_dir, out_dir=None):
    """Collect every completed run below ``results_dir`` into CSV tables.

    A run is any directory holding ``final.json``; ones that fail to parse
    are listed in the summary's ``skipped`` and do not stop the report.
    """
    results_dir = Path(results_dir)
    out = Path(out_dir) if out_dir is not None else results_dir / "report"

    candidates = []
    if results_dir.is_dir():
        for final_path in sorted(results_dir.rglob("final.json")):
            run_dir = final_path.parent
            if out in run_dir.parents or run_dir == out:
                continue
            rel = run_dir.relative_to(results_dir).as_posix()
            candidates.append((rel or ".", run_dir))

    loaded = []
    skipped = []
    for run_id, run_dir in candidates:
        try:
            config, final, reports = _load_run(run_dir)
        except Exception as exc:
            skipped.append((run_id, f"{type(exc).__name__}: {exc}"))
            continue
        loaded.append((run_id, config, final, reports))

    summary_rows = []
    curve_rows = []
    wall_rows = []
    attribution_rows = []
    for run_id, config, final, reports in loaded:
        summary_rows.append([
            run_id,
            config.get("env_name"),
            config.get("batch_size"),
            config.get("ga_fraction"),
            config.get("target_source"),
            config.get("seed"),
            final.get("evaluations"),
            final.get("qd_score"),
            final.get("coverage"),
            final.get("max_fitness"),
            final.get("wall_time"),
        ])
        elapsed = 0.0
        for rep in reports:
            curve_rows.append([run_id, rep["iteration"], rep["evaluations"],
                               rep["qd_score"], rep["coverage"],
                               rep["max_fitness"]])
            elapsed += rep.get("seconds", 0.0)
            wall_rows.append([run_id, rep["iteration"], elapsed,
                              rep["qd_score"], rep["coverage"],
                              rep["max_fitness"]])
            additions = rep.get("additions", {})
            for source in _source_order(additions):
                tally = additions[source]
                attribution_rows.append([
                    run_id, rep["iteration"], rep["evaluations"], source,
                    tally.get("new", 0), tally.get("improved", 0),
                    tally.get("rejected", 0)])

    efficiency_rows, efficiency_summary = _efficiency_rows(loaded)

    out.mkdir(parents=True, exist_ok=True)
    _write_csv(out / "summary.csv", "report_summary",
               ["run", "env", "batch_size", "ga_fraction", "target_source",
                "seed", "evaluations", "qd_score", "coverage", "max_fitness",
                "wall_time"],
               summary_rows)
    _write_csv(out / "curves_evaluations.csv", "curves_evaluations",
               ["run", "iteration", "evaluations", "qd_score", "coverage",
                "max_fitness"],
               curve_rows)
    _write_csv(out / "curves_walltime.csv", "curves_walltime",
               ["run", "iteration", "wall_seconds", "qd_score", "coverage",
                "max_fitness"],
               wall_rows)
    _write_csv(out / "attribution.csv", "attribution",
               ["run", "iteration", "evaluations", "source", "new",
                "improved", "rejected"],
               attribution_rows)
    _write_csv(out / "efficiency.csv", "efficiency",
               ["config", "task", "qd_score", "runtime", "qd_normalized",
                "runtime_adjusted", "score"],
               efficiency_rows)
    _write_csv(out / "efficiency_summary.csv", "efficiency_summary",
               ["config", "mean_score", "best"],
               efficiency_summary)

    return ReportSummary(out_dir=out,
                         runs=[run_id for run_id, *_ in loaded],
                         skipped=skipped,
                         files=list(_REPORT_FILES))
