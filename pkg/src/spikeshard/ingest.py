"""Real-data path: CSV ingestion, standardization, row splitting, comparison.

Tables are observations-by-features; after optional per-column
standardization the rows are shuffled once and dealt into contiguous shards,
each transposed into the features-by-observations layout the estimation
pipeline expects.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .aggregate import WeightMode, aggregate_reports
from .errors import EmptyFile, MalformedCsv, NonNumericCell, SpikeShardError, TooManyMachines
from .experiments import pooled_estimate
from .localnode import local_report
from .sampler import LocalDataset, substream
from .spectrum import SpikeSide

__all__ = [
    "TabularDataset",
    "RealDataCell",
    "load_csv",
    "standardize_columns",
    "split_rows",
    "analyze_real",
    "write_real_csv",
]

_KEY_SPLIT = 3


@dataclass(frozen=True)
class TabularDataset:
    """A rectangular numeric table: rows are observations, columns features."""

    values: np.ndarray
    columns: tuple[str, ...]

    @property
    def rows(self) -> int:
        return self.values.shape[0]

    @property
    def cols(self) -> int:
        return self.values.shape[1]


def standardize_columns(values: np.ndarray) -> np.ndarray:
    """Center each column and scale to unit (population) variance."""
    values = np.asarray(values, dtype=np.float64)
    std = values.std(axis=0)
    if (std == 0.0).any():
        constant = int(np.flatnonzero(std == 0.0)[0])
        raise ValueError(f"column {constant} is constant and cannot be standardized")
    return (values - values.mean(axis=0)) / std


def load_csv(path, has_header: bool = True, standardize: bool = True) -> TabularDataset:
    """Read a rectangular numeric CSV into a :class:`TabularDataset`.

    Errors pinpoint the offending location: MalformedCsv for ragged rows,
    NonNumericCell (with 1-based row and column) for cells that do not parse
    as finite numbers, EmptyFile when no data rows remain.
    """
    name = Path(path).name
    header: list[str] | None = None
    body: list[list[float]] = []
    width: int | None = None
    with open(path, "r", newline="", encoding="utf-8") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or all(not cell.strip() for cell in row):
                continue
            if has_header and header is None:
                header = [cell.strip() for cell in row]
                width = len(header)
                continue
            if width is None:
                width = len(row)
            if len(row) != width:
                raise MalformedCsv(
                    f"{name}: row {lineno} has {len(row)} fields, expected {width}"
                )
            parsed = []
            for colno, cell in enumerate(row, start=1):
                try:
                    value = float(cell)
                except ValueError as exc:
                    raise NonNumericCell(
                        f"{name}: row {lineno}, column {colno}: {cell!r}"
                    ) from exc
                if not math.isfinite(value):
                    raise NonNumericCell(
                        f"{name}: row {lineno}, column {colno}: non-finite {cell!r}"
                    )
                parsed.append(value)
            body.append(parsed)
    if not body:
        raise EmptyFile(f"{name}: no data rows")
    values = np.asarray(body, dtype=np.float64)
    if standardize:
        values = standardize_columns(values)
    columns = tuple(header) if header else tuple(f"c{i}" for i in range(values.shape[1]))
    return TabularDataset(values=values, columns=columns)


def split_rows(data, m: int, seed=0) -> list[LocalDataset]:
    """Shuffle rows once (seeded) and deal them into m contiguous shards.

    Shards are transposed to the features-by-observations layout.  Raises
    TooManyMachines when the smallest shard would not have more observations
    than features.  With m=1 the shuffle is skipped so the single shard is
    the table itself, bit for bit.
    """
    values = data.values if isinstance(data, TabularDataset) else np.asarray(data, dtype=np.float64)
    if values.ndim != 2:
        raise ValueError("expected a 2-D table")
    rows, cols = values.shape
    if m < 1:
        raise ValueError(f"machine count must be >= 1, got {m}")
    if rows // m <= cols:
        raise TooManyMachines(
            f"splitting {rows} rows over {m} machines leaves {rows // m} <= {cols} per shard"
        )
    if m == 1:
        order = np.arange(rows)
    else:
        order = substream(seed, (_KEY_SPLIT,)).permutation(rows)
    base, extra = divmod(rows, m)
    shards = []
    offset = 0
    for worker in range(m):
        size = base + 1 if worker < extra else base
        block = values[order[offset : offset + size]]
        shards.append(LocalDataset(worker_id=worker, observations=block.T.copy()))
        offset += size
    return shards


@dataclass(frozen=True)
class RealDataCell:
    """Largest-spike estimates for one machine count."""

    m: int
    pooled: float
    weighted: float
    avg: float
    excluded: int


def analyze_real(data: TabularDataset, m_grid, seed=0) -> list[RealDataCell]:
    """Compare pooled / weighted / average top-spike estimates across machine counts.

    The weighted path uses the closed-form Gaussian weights, which only need
    shard sizes, the dimension, and the initial value; real tables carry no
    ground-truth nuisance quantities.  Shards whose top eigenvalue falls
    inside their own bulk are excluded and counted.
    """
    cells = []
    for m in m_grid:
        shards = split_rows(data, int(m), seed)
        pooled = pooled_estimate(shards, 1, SpikeSide.UPPER, 1)
        reports = []
        excluded = 0
        for shard in shards:
            try:
                reports.append(local_report(shard, k=1, side=SpikeSide.UPPER, n_spikes=1))
            except SpikeShardError:
                excluded += 1
        weighted = aggregate_reports(reports, data.cols, WeightMode.GAUSSIAN).alpha
        average = aggregate_reports(reports, data.cols, WeightMode.UNIFORM).alpha
        cells.append(
            RealDataCell(m=int(m), pooled=pooled, weighted=weighted, avg=average, excluded=excluded)
        )
    return cells


def write_real_csv(cells: list[RealDataCell], path_or_file) -> None:
    """Columns: m,pooled,weighted,avg,excluded."""
    if hasattr(path_or_file, "write"):
        fh, owned = path_or_file, False
    else:
        fh, owned = open(path_or_file, "w", newline=""), True
    try:
        writer = csv.writer(fh)
        writer.writerow(["m", "pooled", "weighted", "avg", "excluded"])
        for c in cells:
            writer.writerow([c.m, repr(c.pooled), repr(c.weighted), repr(c.avg), c.excluded])
    finally:
        if owned:
            fh.close()
