"""Synthetic spiked-population data and deterministic shard plans.

Observations are ``V x`` where ``x`` has i.i.d. standardized entries and
``V = U diag(sqrt(alpha_1..alpha_M), 1..1) U^T`` is the symmetric square root
of the population covariance.  Generation is deterministic per
``(seed, worker_id)`` through counter-style seed sequences, so shards can be
produced concurrently or on different machines with identical results.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import InvalidRule, InvalidShape, MalformedCsv, NonNumericCell, EmptyFile

__all__ = [
    "EntryDistribution",
    "SpikedModel",
    "LocalDataset",
    "Fixed",
    "UniformRange",
    "PartitionPlan",
    "build_covariance_root",
    "sample_local",
    "make_partition",
    "dump_csv",
    "load_dataset_csv",
]

_SQRT3 = math.sqrt(3.0)

# spawn-key domains keep the independent random streams from colliding
# (key 3 is reserved by the row splitter in ingest)
_KEY_SHARD = 0
_KEY_PARTITION = 1
_KEY_ROTATION = 2


def seed_tuple(seed) -> tuple[int, ...]:
    """Normalize an int or a tuple of ints into seed-sequence entropy."""
    if isinstance(seed, (int, np.integer)):
        return (int(seed),)
    return tuple(int(s) for s in seed)


def substream(seed, key: tuple[int, ...]) -> np.random.Generator:
    """Deterministic generator for the (seed, key) substream."""
    ss = np.random.SeedSequence(seed_tuple(seed), spawn_key=key)
    return np.random.default_rng(ss)


class EntryDistribution(enum.Enum):
    """Zero-mean unit-variance entry laws with known fourth moment."""

    GAUSSIAN = "gaussian"
    RADEMACHER = "rademacher"
    UNIFORM_SCALED = "uniform"

    @property
    def fourth_moment(self) -> float:
        """Analytic E[x^4]: 3 (Gaussian), 1 (Rademacher), 9/5 (uniform on ±sqrt(3))."""
        return {
            EntryDistribution.GAUSSIAN: 3.0,
            EntryDistribution.RADEMACHER: 1.0,
            EntryDistribution.UNIFORM_SCALED: 1.8,
        }[self]

    def draw(self, rng: np.random.Generator, shape: tuple[int, ...]) -> np.ndarray:
        if self is EntryDistribution.GAUSSIAN:
            return rng.standard_normal(shape)
        if self is EntryDistribution.RADEMACHER:
            return rng.integers(0, 2, size=shape).astype(np.float64) * 2.0 - 1.0
        return rng.uniform(-_SQRT3, _SQRT3, size=shape)


@dataclass(frozen=True)
class SpikedModel:
    """Population description: dimension, spikes, entry law, rotation.

    ``spikes`` must be strictly decreasing, positive, and away from 1; values
    above 1 sit on the upper side of the bulk, values in (0, 1) on the lower
    side.  ``rotation="identity"`` keeps the covariance diagonal;
    ``rotation="random"`` conjugates by a seeded orthogonal matrix while
    keeping the root symmetric.
    """

    p: int
    spikes: tuple[float, ...] = ()
    entry_dist: EntryDistribution = EntryDistribution.GAUSSIAN
    rotation: str = "identity"
    rotation_seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "spikes", tuple(float(a) for a in self.spikes))
        if self.p < 1:
            raise ValueError(f"dimension must be positive, got {self.p}")
        if len(self.spikes) > self.p:
            raise ValueError("more spikes than dimensions")
        for hi, lo in zip(self.spikes, self.spikes[1:]):
            if not hi > lo:
                raise ValueError("spikes must be strictly decreasing")
        for a in self.spikes:
            if a <= 0.0 or a == 1.0:
                raise ValueError(f"spikes must be positive and different from 1, got {a}")
        if self.rotation not in ("identity", "random"):
            raise ValueError(f"unknown rotation {self.rotation!r}")

    @property
    def n_spikes(self) -> int:
        return len(self.spikes)

    @property
    def n_upper(self) -> int:
        return sum(1 for a in self.spikes if a > 1.0)

    @property
    def n_lower(self) -> int:
        return sum(1 for a in self.spikes if a < 1.0)


@dataclass
class LocalDataset:
    """One machine's data: a p x n matrix whose columns are observations.

    ``raw_entries`` keeps the pre-rotation i.i.d. entries when the dataset was
    synthesized locally; datasets loaded from disk or split from real tables
    carry ``None`` there.
    """

    worker_id: int
    observations: np.ndarray
    raw_entries: np.ndarray | None = field(default=None, repr=False)
    _gram: np.ndarray | None = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        obs = np.asarray(self.observations, dtype=np.float64)
        if obs.ndim != 2:
            raise InvalidShape(f"observations must be 2-D, got shape {obs.shape}")
        if not np.isfinite(obs).all():
            raise ValueError("observations contain non-finite entries")
        self.observations = obs

    def gram(self) -> np.ndarray:
        """Cached Y Y^T; shared by the local and pooled covariance paths."""
        if self._gram is None:
            self._gram = self.observations @ self.observations.T
        return self._gram

    @property
    def p(self) -> int:
        return self.observations.shape[0]

    @property
    def n(self) -> int:
        return self.observations.shape[1]

    @property
    def y(self) -> float:
        return self.p / self.n


@dataclass(frozen=True)
class Fixed:
    """Partition rule: use these shard sizes verbatim."""

    sizes: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "sizes", tuple(int(s) for s in self.sizes))


@dataclass(frozen=True)
class UniformRange:
    """Partition rule: draw each shard size uniformly from [lo_mult*p, hi_mult*p]."""

    lo_mult: float = 2.0
    hi_mult: float = 8.0


@dataclass(frozen=True)
class PartitionPlan:
    """Resolved shard sizes together with the rule and seed that produced them."""

    sizes: tuple[int, ...]
    rule: Fixed | UniformRange
    seed: tuple[int, ...]

    @property
    def m(self) -> int:
        return len(self.sizes)

    @property
    def total(self) -> int:
        return sum(self.sizes)


def build_covariance_root(model: SpikedModel) -> np.ndarray:
    """Symmetric square root V of the population covariance V V^T.

    With the identity rotation this is ``diag(sqrt(alpha_1..alpha_M), 1..1)``;
    with a random rotation the same diagonal conjugated by a seeded orthogonal
    matrix, symmetrized so round-off cannot break V = V^T.
    """
    diag = np.ones(model.p)
    diag[: model.n_spikes] = np.sqrt(np.asarray(model.spikes))
    if model.rotation == "identity":
        return np.diag(diag)
    rng = substream(model.rotation_seed, (_KEY_ROTATION,))
    q, r = np.linalg.qr(rng.standard_normal((model.p, model.p)))
    signs = np.sign(np.diag(r))
    signs[signs == 0] = 1.0
    q = q * signs
    root = (q * diag) @ q.T
    return 0.5 * (root + root.T)


def sample_local(model: SpikedModel, n: int, seed, worker_id: int = 0) -> LocalDataset:
    """Draw one shard of ``n`` observations for ``model``.

    Deterministic for a given ``(seed, worker_id)`` pair.  Raises
    InvalidShape when ``n <= p``: every shard must have more observations
    than dimensions.
    """
    if n <= model.p:
        raise InvalidShape(f"shard size n={n} must exceed dimension p={model.p}")
    rng = substream(seed, (_KEY_SHARD, int(worker_id)))
    raw = model.entry_dist.draw(rng, (model.p, int(n)))
    if model.rotation == "identity":
        diag = np.ones(model.p)
        diag[: model.n_spikes] = np.sqrt(np.asarray(model.spikes))
        observations = raw * diag[:, None]
    else:
        observations = build_covariance_root(model) @ raw
    return LocalDataset(worker_id=int(worker_id), observations=observations, raw_entries=raw)


def make_partition(p: int, m: int, rule: Fixed | UniformRange | None = None, seed=0) -> PartitionPlan:
    """Resolve shard sizes for ``m`` machines at dimension ``p``.

    The default rule draws each size uniformly from ``{2p, ..., 8p}``, which
    keeps every per-shard aspect ratio in [1/8, 1/2].
    """
    if m < 1:
        raise ValueError(f"machine count must be >= 1, got {m}")
    if rule is None:
        rule = UniformRange()
    if isinstance(rule, Fixed):
        if len(rule.sizes) != m:
            raise InvalidRule(f"fixed rule lists {len(rule.sizes)} sizes for m={m}")
        for s in rule.sizes:
            if s <= p:
                raise InvalidShape(f"fixed shard size {s} must exceed p={p}")
        sizes = rule.sizes
    elif isinstance(rule, UniformRange):
        if rule.lo_mult <= 1.0:
            raise InvalidRule(f"lo_mult must exceed 1, got {rule.lo_mult}")
        if rule.hi_mult < rule.lo_mult:
            raise InvalidRule("hi_mult must be >= lo_mult")
        lo = math.ceil(rule.lo_mult * p)
        hi = math.floor(rule.hi_mult * p)
        rng = substream(seed, (_KEY_PARTITION,))
        sizes = tuple(int(v) for v in rng.integers(lo, hi + 1, size=m))
    else:
        raise InvalidRule(f"unknown partition rule {rule!r}")
    return PartitionPlan(sizes=sizes, rule=rule, seed=seed_tuple(seed))


def _write_matrix_csv(matrix: np.ndarray, path) -> None:
    with open(path, "w", encoding="ascii") as fh:
        for row in matrix:
            fh.write(",".join(repr(float(v)) for v in row))
            fh.write("\n")


def _read_matrix_csv(path) -> np.ndarray:
    rows: list[list[float]] = []
    with open(path, "r", encoding="ascii") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            cells = line.split(",")
            parsed = []
            for colno, cell in enumerate(cells, start=1):
                try:
                    value = float(cell)
                except ValueError as exc:
                    raise NonNumericCell(
                        f"{Path(path).name}: row {lineno}, column {colno}: {cell!r}"
                    ) from exc
                if not math.isfinite(value):
                    raise NonNumericCell(
                        f"{Path(path).name}: row {lineno}, column {colno}: non-finite {cell!r}"
                    )
                parsed.append(value)
            if rows and len(parsed) != len(rows[0]):
                raise MalformedCsv(
                    f"{Path(path).name}: row {lineno} has {len(parsed)} cells, expected {len(rows[0])}"
                )
            rows.append(parsed)
    if not rows:
        raise EmptyFile(f"{Path(path).name}: no data rows")
    return np.asarray(rows, dtype=np.float64)


def dump_csv(dataset: LocalDataset, path, raw_path=None) -> None:
    """Write a shard as CSV, rows = coordinates, columns = observations.

    Values are written in shortest round-trip decimal form so a reload is
    bit-identical.  When ``raw_path`` is given and the shard carries its
    pre-rotation entries, they are written alongside in the same layout;
    empirical moment estimation needs them.
    """
    _write_matrix_csv(dataset.observations, path)
    if raw_path is not None and dataset.raw_entries is not None:
        _write_matrix_csv(dataset.raw_entries, raw_path)


def load_dataset_csv(path, worker_id: int = 0, raw_path=None) -> LocalDataset:
    """Read a shard written by :func:`dump_csv` (no header, numeric body)."""
    observations = _read_matrix_csv(path)
    raw = _read_matrix_csv(raw_path) if raw_path is not None else None
    return LocalDataset(worker_id=worker_id, observations=observations, raw_entries=raw)
