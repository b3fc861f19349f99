"""Coordinator-side mathematics for the one-round weighted estimator.

Each worker ships a single scalar record; the coordinator picks an initial
value, turns it into per-shard variance estimates, forms inverse-variance
weights (or their Gaussian closed form, or uniform weights), and combines the
local estimates into one weighted value with a standard error.  All
computations are pure functions of the report values; reports are processed
in worker-id order so results never depend on arrival order.
"""

from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DegenerateVariance,
    EmptyInput,
    FallbackWarning,
    LengthMismatch,
    NoValidReports,
)
from .localnode import LocalEstimate

__all__ = [
    "WeightMode",
    "WeightVector",
    "InitialStrategy",
    "AggregateResult",
    "initial_value",
    "shard_variance",
    "optimal_weights",
    "gaussian_weights",
    "uniform_weights",
    "combine",
    "mse_limit",
    "standardized_stat",
    "aggregate_reports",
]


class WeightMode(enum.Enum):
    """How aggregation weights were produced."""

    ORACLE = "oracle"
    ESTIMATED = "estimated"
    GAUSSIAN = "gaussian"
    UNIFORM = "uniform"


class InitialStrategy(enum.Enum):
    """Choice of the initial value fed into the weight formulas."""

    FIRST_MACHINE = "first"
    WORST_MACHINE = "worst"
    MEAN_OF_LOCALS = "mean"


@dataclass(frozen=True)
class WeightVector:
    """Normalized aggregation weights plus provenance.

    ``fallback`` marks weights that were replaced by the uniform rule because
    the requested mode degenerated on this input.
    """

    weights: tuple[float, ...]
    mode: WeightMode
    fallback: bool = False

    def __len__(self) -> int:
        return len(self.weights)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.weights, dtype=np.float64)


@dataclass(frozen=True)
class AggregateResult:
    """Final weighted estimate with its estimated standard error."""

    alpha: float
    stderr: float
    weights: WeightVector
    initial_value: float
    excluded_workers: tuple[int, ...] = field(default=())

    def to_dict(self) -> dict:
        return {
            "alpha": self.alpha,
            "stderr": self.stderr,
            "weights": list(self.weights.weights),
            "weight_mode": self.weights.mode.value,
            "fallback": self.weights.fallback,
            "initial_value": self.initial_value,
            "excluded_workers": list(self.excluded_workers),
        }


def initial_value(
    reports: list[LocalEstimate],
    strategy: InitialStrategy = InitialStrategy.MEAN_OF_LOCALS,
    truth: float | None = None,
) -> float:
    """Initial value for the weight formulas.

    ``FIRST_MACHINE`` takes the estimate with the lowest worker id,
    ``MEAN_OF_LOCALS`` (the default) the plain average, and ``WORST_MACHINE``
    the estimate farthest from ``truth`` -- a diagnostics-only strategy that
    requires the true value.
    """
    reports = sorted(reports, key=lambda r: r.worker_id)
    if not reports:
        raise NoValidReports("no reports to take an initial value from")
    alphas = np.array([r.alpha_hat for r in reports])
    if strategy is InitialStrategy.FIRST_MACHINE:
        return float(alphas[0])
    if strategy is InitialStrategy.MEAN_OF_LOCALS:
        return float(alphas.mean())
    if truth is None:
        raise ValueError("WORST_MACHINE strategy needs the true spike value")
    return float(alphas[np.argmax((alphas - truth) ** 2)])


def shard_variance(report: LocalEstimate, alpha_bar: float) -> float:
    """Per-shard variance estimate evaluated at the initial value.

    ``(gamma4_hat - 3) * abar^2 * u4sum_hat
    + 2 * abar^2 * (abar - 1)^2 / ((abar - 1)^2 - y)``.

    Raises DegenerateVariance when ``(abar - 1)^2 <= y`` (or when noisy
    nuisance plug-ins drive the value non-positive); callers fall back to
    uniform weights in that case.
    """
    gap = (alpha_bar - 1.0) ** 2 - report.y
    if gap <= 0.0:
        raise DegenerateVariance(
            f"(alpha_bar-1)^2 = {(alpha_bar - 1.0) ** 2!r} must exceed y = {report.y!r}"
        )
    ab2 = alpha_bar * alpha_bar
    value = (report.gamma4_hat - 3.0) * ab2 * report.u4sum_hat
    value += 2.0 * ab2 * (alpha_bar - 1.0) ** 2 / gap
    if value <= 0.0:
        raise DegenerateVariance(f"non-positive variance estimate {value!r}")
    return value


def optimal_weights(ns, sigma2s, mode: WeightMode = WeightMode.ORACLE) -> WeightVector:
    """Inverse-variance weights ``w_l = (n_l / s2_l) / sum(n_i / s2_i)``.

    These minimize the limiting mean square error of the weighted combination
    among all weights summing to one.
    """
    ns = np.asarray(ns, dtype=np.float64)
    sigma2s = np.asarray(sigma2s, dtype=np.float64)
    if ns.size == 0:
        raise EmptyInput("no shard sizes supplied")
    if ns.shape != sigma2s.shape:
        raise LengthMismatch(f"{ns.size} sizes vs {sigma2s.size} variances")
    if (ns <= 0).any() or (sigma2s <= 0).any():
        raise ValueError("shard sizes and variances must be positive")
    ratio = ns / sigma2s
    weights = ratio / ratio.sum()
    return WeightVector(tuple(float(w) for w in weights), mode)


def gaussian_weights(ns, p: int, alpha_bar: float) -> WeightVector:
    """Closed-form weights ``(n_l (abar-1)^2 - p) / (n (abar-1)^2 - m p)``.

    Algebraically identical to :func:`optimal_weights` fed with the Gaussian
    variance at each shard's ratio.  If any numerator is non-positive the
    whole vector degenerates; uniform weights are returned with the fallback
    flag set and a FallbackWarning.
    """
    ns = np.asarray(ns, dtype=np.float64)
    if ns.size == 0:
        raise EmptyInput("no shard sizes supplied")
    gap2 = (alpha_bar - 1.0) ** 2
    numer = ns * gap2 - p
    if (numer <= 0.0).any():
        warnings.warn(
            "closed-form weights degenerate (some n*(abar-1)^2 <= p); using uniform",
            FallbackWarning,
            stacklevel=2,
        )
        m = ns.size
        return WeightVector(tuple([1.0 / m] * m), WeightMode.UNIFORM, fallback=True)
    weights = numer / numer.sum()
    return WeightVector(tuple(float(w) for w in weights), WeightMode.GAUSSIAN)


def uniform_weights(m: int) -> WeightVector:
    """Plain averaging weights 1/m."""
    if m < 1:
        raise EmptyInput(f"machine count must be >= 1, got {m}")
    return WeightVector(tuple([1.0 / m] * m), WeightMode.UNIFORM)


def mse_limit(ns, sigma2s) -> float:
    """Limiting mean square error of the optimally weighted combination.

    Equals ``1 / sum(n_l / s2_l)``; for a single machine this is ``s2 / n``.
    """
    ns = np.asarray(ns, dtype=np.float64)
    sigma2s = np.asarray(sigma2s, dtype=np.float64)
    if ns.size == 0:
        raise EmptyInput("no shard sizes supplied")
    if (ns <= 0).any() or (sigma2s <= 0).any():
        raise ValueError("shard sizes and variances must be positive")
    return float(1.0 / np.sum(ns / sigma2s))


def standardized_stat(alpha_tilde: float, alpha_true: float, ns, sigma2s) -> float:
    """Standardized error ``(alpha_tilde - alpha) * sqrt(sum(n_l / s2_l))``.

    Asymptotically standard normal when the weighted estimator is consistent.
    """
    return float((alpha_tilde - alpha_true) / math.sqrt(mse_limit(ns, sigma2s)))


def combine(
    reports: list[LocalEstimate],
    weights: WeightVector,
    alpha_bar: float | None = None,
    excluded: tuple[int, ...] = (),
) -> AggregateResult:
    """Weighted combination of local estimates plus the standard error.

    The standard error is ``sqrt(1 / sum(n_l / s2_hat_l))`` with the per-shard
    variance estimates evaluated at ``alpha_bar`` (defaults to the mean of the
    local estimates).  Shards whose variance estimate degenerates are skipped
    in the standard error; if all degenerate it is NaN.
    """
    reports = list(reports)
    if not reports:
        raise EmptyInput("no reports to combine")
    if len(weights) != len(reports):
        raise LengthMismatch(f"{len(weights)} weights vs {len(reports)} reports")
    alphas = np.array([r.alpha_hat for r in reports])
    alpha = float(weights.as_array() @ alphas)
    if alpha_bar is None:
        alpha_bar = float(alphas.mean())
    inverse_sum = 0.0
    for report in reports:
        try:
            inverse_sum += report.n / shard_variance(report, alpha_bar)
        except DegenerateVariance:
            continue
    stderr = math.sqrt(1.0 / inverse_sum) if inverse_sum > 0.0 else float("nan")
    return AggregateResult(
        alpha=alpha,
        stderr=stderr,
        weights=weights,
        initial_value=float(alpha_bar),
        excluded_workers=tuple(excluded),
    )


def aggregate_reports(
    reports: list[LocalEstimate],
    p: int,
    weight_mode: WeightMode = WeightMode.GAUSSIAN,
    initial: InitialStrategy = InitialStrategy.MEAN_OF_LOCALS,
    truth: float | None = None,
    excluded: tuple[int, ...] = (),
) -> AggregateResult:
    """Full coordinator round: initial value, weights, weighted combination.

    Boundary-flagged reports are excluded up front (their estimates carry no
    information beyond the bulk edge) and listed in the result next to any
    worker ids already excluded upstream.  A degenerate variance in estimated
    mode falls back to uniform weights rather than failing the round.
    """
    reports = sorted(reports, key=lambda r: r.worker_id)
    valid = [r for r in reports if not r.boundary]
    dropped = tuple(r.worker_id for r in reports if r.boundary)
    if not valid:
        raise NoValidReports("all reports excluded or boundary-flagged")
    alpha_bar = initial_value(valid, initial, truth)
    ns = [r.n for r in valid]
    if weight_mode is WeightMode.UNIFORM:
        weights = uniform_weights(len(valid))
    elif weight_mode is WeightMode.GAUSSIAN:
        weights = gaussian_weights(ns, p, alpha_bar)
    elif weight_mode is WeightMode.ESTIMATED:
        try:
            sigma2s = [shard_variance(r, alpha_bar) for r in valid]
            weights = optimal_weights(ns, sigma2s, WeightMode.ESTIMATED)
        except DegenerateVariance:
            warnings.warn(
                "estimated weights degenerate; using uniform",
                FallbackWarning,
                stacklevel=2,
            )
            m = len(valid)
            weights = WeightVector(tuple([1.0 / m] * m), WeightMode.UNIFORM, fallback=True)
    else:
        raise ValueError(
            "oracle weights need true variances; call optimal_weights directly"
        )
    return combine(valid, weights, alpha_bar=alpha_bar, excluded=tuple(excluded) + dropped)
