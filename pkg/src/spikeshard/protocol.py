"""One-round worker-to-coordinator message exchange.

The wire format is newline-delimited JSON: one object per worker with exactly
the keys ``worker_id, n, y, k, j, alpha_hat, gamma4_hat, u4sum_hat, status``
in that order, numbers in shortest round-trip decimal form.  Every transport
(in-process, stdio child processes, loopback TCP) shares this codec, so
equivalence across transports is meaningful.  A round is a single barrier:
each worker sends one message, the coordinator buffers all of them, then
aggregates in worker-id order.
"""

from __future__ import annotations

import enum
import json
import math
import socket
import subprocess
import sys
import tempfile
import threading
import warnings
from dataclasses import dataclass
from pathlib import Path

from .aggregate import (
    AggregateResult,
    InitialStrategy,
    WeightMode,
    aggregate_reports,
)
from .errors import (
    EmptyInput,
    ExcludedWorkerWarning,
    NonFiniteField,
    NotSpiked,
    ParseError,
    SchemaError,
    SpikeShardError,
)
from .localnode import LocalEstimate, MomentMode, local_report
from .sampler import LocalDataset, dump_csv
from .spectrum import SpikeSide

__all__ = [
    "ReportStatus",
    "ReportMessage",
    "TransportStats",
    "RoundConfig",
    "encode_report",
    "decode_report",
    "message_from_estimate",
    "estimate_from_message",
    "compute_message",
    "run_round",
    "pooled_cost_model",
]

_FIELDS = ("worker_id", "n", "y", "k", "j", "alpha_hat", "gamma4_hat", "u4sum_hat", "status")
_INT_FIELDS = ("worker_id", "n", "k", "j")
_FLOAT_FIELDS = ("y", "alpha_hat", "gamma4_hat", "u4sum_hat")


class ReportStatus(enum.Enum):
    OK = "ok"
    NOT_SPIKED = "not_spiked"
    BOUNDARY = "boundary"
    FAILED = "failed"


@dataclass(frozen=True)
class ReportMessage:
    """One worker's wire record; numeric fields may be null unless status is ok."""

    worker_id: int
    n: int | None
    y: float | None
    k: int | None
    j: int | None
    alpha_hat: float | None
    gamma4_hat: float | None
    u4sum_hat: float | None
    status: ReportStatus = ReportStatus.OK

    def scalar_count(self) -> int:
        values = (self.n, self.y, self.k, self.j, self.alpha_hat, self.gamma4_hat, self.u4sum_hat)
        return 1 + sum(1 for v in values if v is not None)  # worker_id always counts


@dataclass(frozen=True)
class TransportStats:
    """Communication-cost accounting for one round."""

    messages_sent: int
    scalars_sent: int
    rounds: int = 1


@dataclass(frozen=True)
class RoundConfig:
    """Worker-side and coordinator-side knobs for one round."""

    k: int = 1
    side: SpikeSide = SpikeSide.UPPER
    n_spikes: int = 1
    moment_mode: MomentMode = MomentMode.GAUSSIAN
    ipr_variant: str = "v_k"
    weight_mode: WeightMode = WeightMode.GAUSSIAN
    initial: InitialStrategy = InitialStrategy.MEAN_OF_LOCALS


def encode_report(message: ReportMessage) -> str:
    """Serialize a message to one newline-free JSON line.

    Raises NonFiniteField if a status-ok message carries a missing or
    non-finite numeric field.
    """
    payload: dict = {}
    for name in _FIELDS[:-1]:
        value = getattr(message, name)
        if value is not None:
            value = float(value) if name in _FLOAT_FIELDS else int(value)
            if not math.isfinite(value):
                raise NonFiniteField(f"field {name} is non-finite: {value!r}")
        elif message.status is ReportStatus.OK:
            raise NonFiniteField(f"field {name} is missing on an ok message")
        payload[name] = value
    payload["status"] = message.status.value
    return json.dumps(payload, allow_nan=False, separators=(",", ":"))


def decode_report(line: str) -> ReportMessage:
    """Parse one wire line back into a message; strict inverse of encode."""
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as exc:
        raise ParseError(f"malformed report line: {exc}") from exc
    if not isinstance(obj, dict):
        raise ParseError(f"report line is not a JSON object: {line!r}")
    if set(obj) != set(_FIELDS):
        missing = set(_FIELDS) - set(obj)
        extra = set(obj) - set(_FIELDS)
        raise SchemaError(f"bad keys: missing {sorted(missing)}, extra {sorted(extra)}")
    try:
        status = ReportStatus(obj["status"])
    except ValueError as exc:
        raise SchemaError(f"unknown status {obj['status']!r}") from exc
    values: dict = {"status": status}
    for name in _INT_FIELDS:
        value = obj[name]
        if value is None and name != "worker_id":
            values[name] = None
            continue
        if isinstance(value, bool) or not isinstance(value, int):
            raise SchemaError(f"field {name} must be an integer, got {value!r}")
        values[name] = value
    for name in _FLOAT_FIELDS:
        value = obj[name]
        if value is None:
            values[name] = None
            continue
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise SchemaError(f"field {name} must be a number, got {value!r}")
        values[name] = float(value)
    if status is ReportStatus.OK:
        for name in _FIELDS[:-1]:
            if values[name] is None:
                raise SchemaError(f"field {name} is null on an ok message")
    return ReportMessage(**values)


def message_from_estimate(estimate: LocalEstimate) -> ReportMessage:
    status = ReportStatus.BOUNDARY if estimate.boundary else ReportStatus.OK
    return ReportMessage(
        worker_id=estimate.worker_id,
        n=estimate.n,
        y=estimate.y,
        k=estimate.k,
        j=estimate.j,
        alpha_hat=estimate.alpha_hat,
        gamma4_hat=estimate.gamma4_hat,
        u4sum_hat=estimate.u4sum_hat,
        status=status,
    )


def estimate_from_message(message: ReportMessage) -> LocalEstimate:
    if message.status not in (ReportStatus.OK, ReportStatus.BOUNDARY):
        raise ValueError(f"cannot build an estimate from status {message.status.value}")
    return LocalEstimate(
        worker_id=message.worker_id,
        n=message.n,
        y=message.y,
        k=message.k,
        j=message.j,
        alpha_hat=message.alpha_hat,
        gamma4_hat=message.gamma4_hat,
        u4sum_hat=message.u4sum_hat,
        boundary=message.status is ReportStatus.BOUNDARY,
    )


def compute_message(dataset: LocalDataset, config: RoundConfig) -> ReportMessage:
    """Run the worker pipeline on one shard, mapping failures to status codes."""
    try:
        estimate = local_report(
            dataset,
            k=config.k,
            side=config.side,
            n_spikes=config.n_spikes,
            moment_mode=config.moment_mode,
            ipr_variant=config.ipr_variant,
        )
        return message_from_estimate(estimate)
    except NotSpiked:
        status = ReportStatus.NOT_SPIKED
    except SpikeShardError as exc:
        # the wire schema has no error field; surface the cause locally
        warnings.warn(
            f"worker {dataset.worker_id} failed: {type(exc).__name__}: {exc}",
            ExcludedWorkerWarning,
            stacklevel=2,
        )
        status = ReportStatus.FAILED
    return ReportMessage(
        worker_id=dataset.worker_id,
        n=dataset.n,
        y=dataset.p / dataset.n,
        k=config.k,
        j=None,
        alpha_hat=None,
        gamma4_hat=None,
        u4sum_hat=None,
        status=status,
    )


def _lines_inprocess(shards, config: RoundConfig) -> list[str]:
    return [encode_report(compute_message(d, config)) for d in shards]


def _worker_argv(path: str, raw_path, worker_id: int, config: RoundConfig) -> list[str]:
    argv = [
        sys.executable,
        "-m",
        "spikeshard",
        "worker",
        "--data",
        path,
        "--worker-id",
        str(worker_id),
        "--spike-rank",
        str(config.k),
        "--side",
        config.side.value,
        "--n-spikes",
        str(config.n_spikes),
        "--moment-mode",
        config.moment_mode.value,
        "--ipr-variant",
        config.ipr_variant,
    ]
    if raw_path is not None:
        argv += ["--raw", str(raw_path)]
    return argv


def _lines_stdio(shards, config: RoundConfig, workdir) -> list[str]:
    # empirical moments need the pre-rotation entries, so ship them alongside
    want_raw = config.moment_mode is MomentMode.EMPIRICAL
    with tempfile.TemporaryDirectory(dir=workdir) as tmp:
        procs = []
        for dataset in shards:
            path = Path(tmp) / f"shard_{dataset.worker_id}.csv"
            raw_path = None
            if want_raw and dataset.raw_entries is not None:
                raw_path = Path(tmp) / f"shard_{dataset.worker_id}.raw.csv"
            dump_csv(dataset, path, raw_path=raw_path)
            procs.append(
                subprocess.Popen(
                    _worker_argv(str(path), raw_path, dataset.worker_id, config),
                    stdout=subprocess.PIPE,
                    stderr=subprocess.PIPE,
                    text=True,
                )
            )
        lines = []
        for proc in procs:
            out, err = proc.communicate()
            if proc.returncode != 0:
                raise RuntimeError(f"worker process failed: {err.strip()}")
            lines.append(out.strip())
    return lines


def _lines_tcp(shards, config: RoundConfig) -> list[str]:
    server = socket.create_server(("127.0.0.1", 0))
    port = server.getsockname()[1]

    def send(dataset: LocalDataset) -> None:
        line = encode_report(compute_message(dataset, config))
        with socket.create_connection(("127.0.0.1", port)) as conn:
            conn.sendall(line.encode("ascii") + b"\n")

    threads = [threading.Thread(target=send, args=(d,)) for d in shards]
    for t in threads:
        t.start()
    lines = []
    with server:
        for _ in shards:
            conn, _addr = server.accept()
            with conn, conn.makefile("r", encoding="ascii") as fh:
                lines.append(fh.readline().strip())
    for t in threads:
        t.join()
    return lines


def run_round(
    shards: list[LocalDataset],
    config: RoundConfig = RoundConfig(),
    transport: str = "inprocess",
    workdir=None,
) -> tuple[AggregateResult, TransportStats]:
    """Execute one full round over the given shards.

    Every worker emits exactly one message; the coordinator decodes them all,
    excludes non-ok workers with a warning, aggregates the rest, and accounts
    for the traffic.  The result is identical for the ``inprocess``,
    ``stdio``, and ``tcp`` transports because they share one codec and the
    coordinator sorts by worker id.
    """
    shards = list(shards)
    if not shards:
        raise EmptyInput("need at least one worker")
    if transport == "inprocess":
        lines = _lines_inprocess(shards, config)
    elif transport == "stdio":
        lines = _lines_stdio(shards, config, workdir)
    elif transport == "tcp":
        lines = _lines_tcp(shards, config)
    else:
        raise ValueError(f"unknown transport {transport!r}")

    messages = sorted((decode_report(line) for line in lines), key=lambda m: m.worker_id)
    stats = TransportStats(
        messages_sent=len(messages),
        scalars_sent=sum(m.scalar_count() for m in messages),
        rounds=1,
    )
    estimates = []
    excluded = []
    for message in messages:
        if message.status in (ReportStatus.OK, ReportStatus.BOUNDARY):
            estimates.append(estimate_from_message(message))
        else:
            excluded.append(message.worker_id)
            warnings.warn(
                f"worker {message.worker_id} excluded ({message.status.value})",
                ExcludedWorkerWarning,
                stacklevel=2,
            )
    p = shards[0].p
    result = aggregate_reports(
        estimates,
        p=p,
        weight_mode=config.weight_mode,
        initial=config.initial,
        excluded=tuple(excluded),
    )
    return result, stats


def pooled_cost_model(m: int, p: int, n: int | None = None) -> TransportStats:
    """Traffic of the conventional alternative: every machine uploads its
    p x p covariance (symmetric, so p(p+1)/2 scalars each), independent of n."""
    if m < 1 or p < 1:
        raise ValueError("m and p must be positive")
    return TransportStats(messages_sent=m, scalars_sent=m * p * (p + 1) // 2, rounds=1)
