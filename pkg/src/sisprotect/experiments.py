"""Ensemble sweeps over mu and their CSV outputs.

Two files per sweep, stable column orders, deterministic bytes:

* raw:   mu,run_id,t,infected,protected,stage_cost,protect_all_cost,objective
  one row per recorded decision step of every run, unpadded;
* stats: mu,t,series,mean,p01,p10,p90,p99
  per-time-step ensemble mean and percentiles of the series
  ``infected`` and ``savings`` (protect_all_cost - stage_cost), with
  finished runs carried forward as zero rows up to the longest run of
  the same mu.

Rows are fully sorted before writing, so the bytes do not depend on
scheduling.  Per-run seeds derive from (master_seed, mu index, run
index), making every run reproducible in isolation.
"""

from __future__ import annotations

import io
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .controller import ControllerConfig, TrajectoryRecord, run_closed_loop
from .errors import ParameterError
from .instance import Instance, InstanceSpec, build_instance
from .rng import derive_seed

__all__ = [
    "RAW_HEADER",
    "STATS_HEADER",
    "DEFAULT_MU_GRID",
    "SweepSpec",
    "SweepResult",
    "run_sweep",
    "percentile_bands",
    "format_raw_csv",
    "format_stats_csv",
    "write_sweep_csvs",
]

RAW_HEADER = "mu,run_id,t,infected,protected,stage_cost,protect_all_cost,objective"
STATS_HEADER = "mu,t,series,mean,p01,p10,p90,p99"
PERCENTILES = (1.0, 10.0, 90.0, 99.0)
SERIES = ("infected", "savings")

DEFAULT_MU_GRID = (0.70, 0.75, 0.80, 0.82, 0.84, 0.86, 0.88, 0.90, 0.95)


@dataclass(frozen=True)
class SweepSpec:
    """A full ensemble experiment.

    ``instance`` describes the single instance all runs share (built
    once from its own seed); it may be None when run_sweep receives a
    concrete instance instead.  ``master_seed`` drives only the
    run-level dynamics streams.
    """

    instance: InstanceSpec | None = None
    mu_values: tuple[float, ...] = DEFAULT_MU_GRID
    runs_per_mu: int = 100
    master_seed: int = 0
    solver_tol: float = 1e-9
    tail_tol: float = 1e-12
    max_steps: int = 200

    def __post_init__(self):
        if len(self.mu_values) == 0:
            raise ParameterError("mu_values must be non-empty")
        if any(not 0.0 <= m <= 1.0 for m in self.mu_values):
            raise ParameterError("mu values must lie in [0, 1]")
        if self.runs_per_mu < 1:
            raise ParameterError("runs_per_mu must be at least 1")
        if self.max_steps < 1:
            raise ParameterError("max_steps must be at least 1")


@dataclass(frozen=True)
class StatsRow:
    mu: float
    t: int
    series: str
    mean: float
    percentiles: tuple[float, ...]


@dataclass(frozen=True)
class SweepResult:
    spec: SweepSpec
    raw_rows: tuple[tuple, ...]
    stats_rows: tuple[StatsRow, ...]
    terminals: dict = field(default_factory=dict)


def run_seed(master_seed: int, mu_index: int, run_index: int) -> int:
    """Per-run dynamics seed; stable under any execution order."""
    return derive_seed(master_seed, mu_index, run_index)


def _one_run(args) -> tuple[int, int, TrajectoryRecord]:
    instance, spec, mu_index, run_index = args
    config = ControllerConfig(
        mu=spec.mu_values[mu_index],
        solver_tol=spec.solver_tol,
        tail_tol=spec.tail_tol,
        max_steps=spec.max_steps,
    )
    rec = run_closed_loop(instance, config, run_seed(spec.master_seed, mu_index, run_index))
    return mu_index, run_index, rec


def run_sweep(spec: SweepSpec, jobs: int = 1, instance: Instance | None = None) -> SweepResult:
    """Execute the sweep; ``jobs`` > 1 distributes runs over processes.

    ``instance`` overrides the generated instance (e.g. one loaded from
    a file); results are identical for any ``jobs``.
    """
    if jobs < 1:
        raise ParameterError("jobs must be at least 1")
    if instance is not None:
        inst = instance
    elif spec.instance is not None:
        inst = build_instance(spec.instance)
    else:
        raise ParameterError("sweep needs an instance or an instance spec")
    tasks = [
        (inst, spec, mi, ri)
        for mi in range(len(spec.mu_values))
        for ri in range(spec.runs_per_mu)
    ]
    if jobs == 1:
        results = [_one_run(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_one_run, tasks, chunksize=4))

    by_mu: dict[int, dict[int, TrajectoryRecord]] = {}
    for mi, ri, rec in results:
        by_mu.setdefault(mi, {})[ri] = rec

    raw_rows = []
    terminals = {}
    for mi in sorted(by_mu):
        mu = spec.mu_values[mi]
        for ri in sorted(by_mu[mi]):
            rec = by_mu[mi][ri]
            terminals[(mu, ri)] = rec.terminal
            for s in rec.steps:
                raw_rows.append(
                    (mu, ri, s.t, s.infected, s.protected, s.stage_cost, s.protect_all_cost, s.objective)
                )

    stats_rows = percentile_bands(
        {spec.mu_values[mi]: [by_mu[mi][ri] for ri in sorted(by_mu[mi])] for mi in sorted(by_mu)}
    )
    return SweepResult(spec, tuple(raw_rows), tuple(stats_rows), terminals)


def percentile_bands(runs_by_mu: dict[float, list[TrajectoryRecord]]) -> tuple[StatsRow, ...]:
    """Ensemble mean and percentile rows per (mu, t, series).

    Within one mu, every run's series is right-padded with zeros to the
    longest run's length: a finished epidemic keeps zero infections and
    zero savings.  Percentiles use numpy's default linear
    interpolation.
    """
    rows: list[StatsRow] = []
    for mu in sorted(runs_by_mu):
        recs = runs_by_mu[mu]
        if not recs:
            continue
        horizon = max(len(r.steps) for r in recs)
        data = {name: np.zeros((len(recs), horizon)) for name in SERIES}
        for k, rec in enumerate(recs):
            for s in rec.steps:
                data["infected"][k, s.t] = s.infected
                data["savings"][k, s.t] = s.protect_all_cost - s.stage_cost
        for name in SERIES:
            arr = data[name]
            means = arr.mean(axis=0)
            pcts = np.percentile(arr, PERCENTILES, axis=0)
            for t in range(horizon):
                rows.append(
                    StatsRow(mu, t, name, float(means[t]), tuple(float(pcts[q, t]) for q in range(len(PERCENTILES))))
                )
    rows.sort(key=lambda r: (r.mu, r.t, r.series))
    return tuple(rows)


def _fmt(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def format_raw_csv(raw_rows) -> str:
    buf = io.StringIO()
    buf.write(RAW_HEADER + "\n")
    for row in sorted(raw_rows):
        buf.write(",".join(_fmt(v) for v in row) + "\n")
    return buf.getvalue()


def format_stats_csv(stats_rows) -> str:
    buf = io.StringIO()
    buf.write(STATS_HEADER + "\n")
    ordered = sorted(stats_rows, key=lambda r: (r.mu, r.t, r.series))
    for r in ordered:
        cells = [_fmt(r.mu), str(r.t), r.series, _fmt(r.mean)]
        cells += [_fmt(p) for p in r.percentiles]
        buf.write(",".join(cells) + "\n")
    return buf.getvalue()


def write_sweep_csvs(result: SweepResult, raw_path, stats_path) -> None:
    with open(raw_path, "w", encoding="utf-8", newline="") as fh:
        fh.write(format_raw_csv(result.raw_rows))
    with open(stats_path, "w", encoding="utf-8", newline="") as fh:
        fh.write(format_stats_csv(result.stats_rows))
