"""Seeded Monte Carlo harness: error grids, sweeps, normality and rate checks.

Every replication draws a fresh shard plan and datasets, then evaluates the
pooled, weighted, and uniform-average estimators on the *same* samples, so
the three columns of a grid cell are directly comparable.  Randomness is
routed through (seed, cell, rep, worker) substreams, which makes every
emitted number a pure function of the configuration.

Desk-scale defaults (300 replications, grids capped around p=200 / m=100)
keep runs in the minutes range; the full-scale grids are a documented
long-running flag in the command-line driver.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, replace

import numpy as np
from scipy import stats

from .aggregate import InitialStrategy, WeightMode, aggregate_reports
from .errors import EmptyInput, InvalidShape, SpikeShardError
from .localnode import MomentMode, _eigh_descending, local_report
from .sampler import (
    EntryDistribution,
    Fixed,
    LocalDataset,
    SpikedModel,
    UniformRange,
    make_partition,
    sample_local,
)
from .spectrum import SpikeSide, spike_from_location

__all__ = [
    "ExperimentConfig",
    "CellResult",
    "InitialCell",
    "NormalityResult",
    "RateResult",
    "pooled_estimate",
    "run_mse_grid",
    "run_sweeps",
    "run_initials",
    "run_normality",
    "summarize_normality",
    "rate_check",
    "fit_rate",
    "write_cells_csv",
    "write_initials_csv",
    "write_normality_csv",
    "write_rate_csv",
]


@dataclass(frozen=True)
class ExperimentConfig:
    """Declarative description of one simulation study (single spike)."""

    alpha: float = 10.0
    p_grid: tuple[int, ...] = (100,)
    m_grid: tuple[int, ...] = (50,)
    reps: int = 300
    entry_dist: EntryDistribution = EntryDistribution.GAUSSIAN
    partition: Fixed | UniformRange = UniformRange(2.0, 8.0)
    weight_mode: WeightMode = WeightMode.GAUSSIAN
    initial: InitialStrategy = InitialStrategy.MEAN_OF_LOCALS
    moment_mode: MomentMode = MomentMode.GAUSSIAN
    n_totals: tuple[int, ...] = ()
    seed: int = 0

    def __post_init__(self):
        if self.reps < 1:
            raise ValueError("reps must be >= 1")
        if not self.p_grid or not self.m_grid:
            raise ValueError("p_grid and m_grid must be non-empty")

    @property
    def side(self) -> SpikeSide:
        return SpikeSide.UPPER if self.alpha > 1.0 else SpikeSide.LOWER

    def model(self, p: int) -> SpikedModel:
        return SpikedModel(p=p, spikes=(self.alpha,), entry_dist=self.entry_dist)

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        kwargs = dict(raw)
        if "entry_dist" in kwargs:
            kwargs["entry_dist"] = EntryDistribution(kwargs["entry_dist"])
        if "weight_mode" in kwargs:
            kwargs["weight_mode"] = WeightMode(kwargs["weight_mode"])
        if "initial" in kwargs:
            kwargs["initial"] = InitialStrategy(kwargs["initial"])
        if "moment_mode" in kwargs:
            kwargs["moment_mode"] = MomentMode(kwargs["moment_mode"])
        if "partition" in kwargs:
            rule = kwargs["partition"]
            if rule.get("rule") == "fixed":
                kwargs["partition"] = Fixed(tuple(rule["sizes"]))
            elif rule.get("rule") == "uniform":
                kwargs["partition"] = UniformRange(
                    rule.get("lo_mult", 2.0), rule.get("hi_mult", 8.0)
                )
            else:
                raise ValueError(f"unknown partition rule {rule!r}")
        for key in ("p_grid", "m_grid", "n_totals"):
            if key in kwargs:
                kwargs[key] = tuple(int(v) for v in kwargs[key])
        return cls(**kwargs)


@dataclass(frozen=True)
class CellResult:
    """One grid cell: mean squared error of the three estimators."""

    p: int
    m: int
    reps: int
    mse_pooled: float
    mse_weighted: float
    mse_avg: float
    failures: int


@dataclass(frozen=True)
class InitialCell:
    """Mean squared error of the weighted estimator under one initial strategy."""

    p: int
    m: int
    reps: int
    strategy: InitialStrategy
    mse: float
    failures: int


@dataclass
class NormalityResult:
    """Standardized statistics with a Kolmogorov-Smirnov summary."""

    z: np.ndarray
    ks_distance: float
    mean: float
    std: float
    bin_edges: np.ndarray
    bin_counts: np.ndarray


@dataclass(frozen=True)
class RateResult:
    """Log-log regression of weighted MSE on total sample size."""

    points: tuple[tuple[int, float], ...]
    slope: float
    reps: int
    mean_estimates: tuple[float, ...] = ()


def pooled_estimate(
    shards: list[LocalDataset],
    k: int = 1,
    side: SpikeSide = SpikeSide.UPPER,
    n_spikes: int = 1,
) -> float:
    """Spike estimate from all shards concatenated (the m=1 specialization).

    The pooled covariance is assembled as the size-weighted sum of per-shard
    Gram matrices, which equals the covariance of the concatenated columns.
    """
    shards = list(shards)
    if not shards:
        raise EmptyInput("no shards to pool")
    p = shards[0].p
    if any(d.p != p for d in shards):
        raise InvalidShape("shards disagree on dimension")
    total = sum(d.n for d in shards)
    if total <= p:
        raise InvalidShape(f"pooled n={total} must exceed p={p}")
    gram = np.zeros((p, p))
    for dataset in shards:
        gram += dataset.gram()
    covariance = (gram + gram.T) / (2.0 * total)
    y = p / total
    vals, _ = _eigh_descending(covariance, vectors=False)
    j = k if side is SpikeSide.UPPER else p - n_spikes + k
    return float(spike_from_location(float(vals[j - 1]), y, side).alpha)


def _draw_shards(config: ExperimentConfig, p: int, m: int, cell: int, rep: int):
    seed = (config.seed, cell, rep)
    plan = make_partition(p, m, config.partition, seed=seed)
    model = config.model(p)
    return [
        sample_local(model, size, seed, worker_id=worker)
        for worker, size in enumerate(plan.sizes)
    ]


def _shard_reports(shards, config: ExperimentConfig):
    reports = []
    for dataset in shards:
        try:
            reports.append(
                local_report(
                    dataset,
                    k=1,
                    side=config.side,
                    n_spikes=1,
                    moment_mode=config.moment_mode,
                )
            )
        except SpikeShardError:
            continue
    return reports


def run_mse_grid(config: ExperimentConfig) -> list[CellResult]:
    """Replicated MSE comparison over the (p, m) grid.

    Per replication the three estimators consume the identical shards; a
    replication counts as a failure (and is dropped from all three columns)
    if any estimator cannot produce a value.
    """
    cells = []
    cell_index = 0
    for p in config.p_grid:
        for m in config.m_grid:
            sq_pooled, sq_weighted, sq_avg = [], [], []
            failures = 0
            for rep in range(config.reps):
                try:
                    shards = _draw_shards(config, p, m, cell_index, rep)
                    reports = _shard_reports(shards, config)
                    pooled = pooled_estimate(shards, 1, config.side, 1)
                    weighted = aggregate_reports(
                        reports, p, config.weight_mode, config.initial
                    ).alpha
                    average = aggregate_reports(reports, p, WeightMode.UNIFORM).alpha
                except SpikeShardError:
                    failures += 1
                    continue
                sq_pooled.append((pooled - config.alpha) ** 2)
                sq_weighted.append((weighted - config.alpha) ** 2)
                sq_avg.append((average - config.alpha) ** 2)
            cells.append(
                CellResult(
                    p=p,
                    m=m,
                    reps=config.reps,
                    mse_pooled=float(np.mean(sq_pooled)) if sq_pooled else float("nan"),
                    mse_weighted=float(np.mean(sq_weighted)) if sq_weighted else float("nan"),
                    mse_avg=float(np.mean(sq_avg)) if sq_avg else float("nan"),
                    failures=failures,
                )
            )
            cell_index += 1
    return cells


def run_sweeps(config: ExperimentConfig) -> list[CellResult]:
    """One-dimensional sweep: fix p and sweep m, or the reverse."""
    if len(config.p_grid) != 1 and len(config.m_grid) != 1:
        raise ValueError("a sweep fixes one of (p, m); make one grid a singleton")
    return run_mse_grid(config)


def run_initials(config: ExperimentConfig) -> list[InitialCell]:
    """Evaluate the three initial-value strategies on identical replications."""
    strategies = (
        InitialStrategy.FIRST_MACHINE,
        InitialStrategy.WORST_MACHINE,
        InitialStrategy.MEAN_OF_LOCALS,
    )
    out = []
    cell_index = 0
    for p in config.p_grid:
        for m in config.m_grid:
            sq = {s: [] for s in strategies}
            failures = 0
            for rep in range(config.reps):
                try:
                    shards = _draw_shards(config, p, m, cell_index, rep)
                    reports = _shard_reports(shards, config)
                    values = {
                        s: aggregate_reports(
                            reports, p, config.weight_mode, s, truth=config.alpha
                        ).alpha
                        for s in strategies
                    }
                except SpikeShardError:
                    failures += 1
                    continue
                for s in strategies:
                    sq[s].append((values[s] - config.alpha) ** 2)
            for s in strategies:
                out.append(
                    InitialCell(
                        p=p,
                        m=m,
                        reps=config.reps,
                        strategy=s,
                        mse=float(np.mean(sq[s])) if sq[s] else float("nan"),
                        failures=failures,
                    )
                )
            cell_index += 1
    return out


def summarize_normality(zs, bins: int = 40) -> NormalityResult:
    """Kolmogorov-Smirnov distance to N(0, 1) plus histogram bookkeeping.

    Rejects degenerate (constant or near-empty) samples.
    """
    z = np.asarray(zs, dtype=np.float64)
    if z.size < 2 or float(z.std()) == 0.0:
        raise ValueError("degenerate standardized sample (zero variance)")
    ks = float(stats.kstest(z, "norm").statistic)
    counts, edges = np.histogram(z, bins=bins, range=(-4.0, 4.0))
    return NormalityResult(
        z=z,
        ks_distance=ks,
        mean=float(z.mean()),
        std=float(z.std(ddof=1)),
        bin_edges=edges,
        bin_counts=counts,
    )


def run_normality(config: ExperimentConfig, bins: int = 40) -> NormalityResult:
    """Sample the standardized statistic and summarize against N(0, 1).

    Uses the first (p, m) cell of the grid; requires reps >= 300 so the
    Kolmogorov-Smirnov distance is meaningful.
    """
    if config.reps < 300:
        raise ValueError("normality check needs at least 300 replications")
    p, m = config.p_grid[0], config.m_grid[0]
    zs = []
    for rep in range(config.reps):
        try:
            shards = _draw_shards(config, p, m, 0, rep)
            reports = _shard_reports(shards, config)
            result = aggregate_reports(reports, p, config.weight_mode, config.initial)
        except SpikeShardError:
            continue
        if result.stderr > 0 and math.isfinite(result.stderr):
            zs.append((result.alpha - config.alpha) / result.stderr)
    return summarize_normality(zs, bins=bins)


def fit_rate(n_totals, mses) -> float:
    """Ordinary least squares slope of log(MSE) on log(n).

    A degenerate abscissa (all n equal) yields slope 0 with a warning rather
    than an exception, so sweep drivers can report it.
    """
    ns = np.asarray(n_totals, dtype=np.float64)
    errors = np.asarray(mses, dtype=np.float64)
    if ns.size < 2:
        raise ValueError("need at least two points to fit a rate")
    if (ns <= 0).any() or (errors <= 0).any():
        raise ValueError("rate fit needs positive sizes and errors")
    log_n = np.log(ns)
    if float(np.ptp(log_n)) == 0.0:
        warnings.warn("all total sizes equal; slope reported as 0", stacklevel=2)
        return 0.0
    slope = np.polyfit(log_n, np.log(errors), 1)[0]
    return float(slope)


def rate_check(config: ExperimentConfig) -> RateResult:
    """Weighted-estimator MSE versus total sample size, with log-log slope.

    Needs at least three total sizes in ``config.n_totals``; machines split
    each total as evenly as possible (any remainder spread one observation at
    a time).
    """
    if len(config.n_totals) < 3:
        raise ValueError("rate check needs at least three total-n points")
    p, m = config.p_grid[0], config.m_grid[0]
    points = []
    means = []
    for cell, n_total in enumerate(config.n_totals):
        base, extra = divmod(int(n_total), m)
        sizes = tuple(base + 1 if i < extra else base for i in range(m))
        point_config = replace(config, partition=Fixed(sizes))
        values = []
        for rep in range(config.reps):
            try:
                shards = _draw_shards(point_config, p, m, cell, rep)
                reports = _shard_reports(shards, point_config)
                weighted = aggregate_reports(
                    reports, p, config.weight_mode, config.initial
                ).alpha
            except SpikeShardError:
                continue
            values.append(weighted)
        errors = (np.asarray(values) - config.alpha) ** 2
        points.append((int(n_total), float(errors.mean())))
        means.append(float(np.mean(values)))
    slope = fit_rate([n for n, _ in points], [e for _, e in points])
    return RateResult(
        points=tuple(points), slope=slope, reps=config.reps, mean_estimates=tuple(means)
    )


def _open_for_write(path_or_file):
    if hasattr(path_or_file, "write"):
        return path_or_file, False
    return open(path_or_file, "w", newline=""), True


def write_cells_csv(cells: list[CellResult], path_or_file) -> None:
    """Columns: p,m,reps,mse_pooled,mse_weighted,mse_avg,failures."""
    fh, owned = _open_for_write(path_or_file)
    try:
        writer = csv.writer(fh)
        writer.writerow(["p", "m", "reps", "mse_pooled", "mse_weighted", "mse_avg", "failures"])
        for c in cells:
            writer.writerow([c.p, c.m, c.reps, repr(c.mse_pooled), repr(c.mse_weighted), repr(c.mse_avg), c.failures])
    finally:
        if owned:
            fh.close()


def write_initials_csv(cells: list[InitialCell], path_or_file) -> None:
    """Columns: p,m,reps,strategy,mse,failures."""
    fh, owned = _open_for_write(path_or_file)
    try:
        writer = csv.writer(fh)
        writer.writerow(["p", "m", "reps", "strategy", "mse", "failures"])
        for c in cells:
            writer.writerow([c.p, c.m, c.reps, c.strategy.value, repr(c.mse), c.failures])
    finally:
        if owned:
            fh.close()


def write_normality_csv(result: NormalityResult, raw_path, bins_path) -> None:
    """Raw file has a single ``z`` column; bins file has bin_lo,bin_hi,count."""
    with open(raw_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["z"])
        for value in result.z:
            writer.writerow([repr(float(value))])
    with open(bins_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["bin_lo", "bin_hi", "count"])
        for lo, hi, count in zip(result.bin_edges[:-1], result.bin_edges[1:], result.bin_counts):
            writer.writerow([repr(float(lo)), repr(float(hi)), int(count)])


def write_rate_csv(result: RateResult, path_or_file) -> None:
    """Columns: n_total,mse,reps (slope is part of the JSON summary)."""
    fh, owned = _open_for_write(path_or_file)
    try:
        writer = csv.writer(fh)
        writer.writerow(["n_total", "mse", "reps"])
        for n_total, mse in result.points:
            writer.writerow([n_total, repr(mse), result.reps])
    finally:
        if owned:
            fh.close()
