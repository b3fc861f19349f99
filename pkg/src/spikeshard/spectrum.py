"""Bulk geometry and spike formulas for high-dimensional sample covariance spectra.

When the population covariance is the identity except for a handful of
"spiked" eigenvalues, the sample spectrum splits into a bulk supported on
``[(1 - sqrt(y))^2, (1 + sqrt(y))^2]``, where ``y = p/n`` is the aspect
ratio, plus isolated eigenvalues produced by population spikes lying outside
``[1 - sqrt(y), 1 + sqrt(y)]``.  This module holds the pure formula layer:
the forward map from a population spike to its limiting sample location, its
inverse (the basic spike estimator), and the asymptotic variance of that
estimator.  Everything here is a pure function of scalar inputs and safe to
call concurrently.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import NamedTuple

from .errors import DegenerateVariance, InvalidRatio, NotSpiked, SpikeInsideBulk

__all__ = [
    "SpikeSide",
    "BulkEdges",
    "VarianceModel",
    "LocationInverse",
    "bulk_edges",
    "spike_location",
    "spike_from_location",
    "asymptotic_variance",
    "gaussian_variance",
]


class SpikeSide(enum.Enum):
    """Which side of the bulk a spike sits on."""

    UPPER = "upper"
    LOWER = "lower"


@dataclass(frozen=True)
class BulkEdges:
    """Support endpoints of the population gap and of the sample bulk.

    ``pop_lo``/``pop_hi`` are ``1 -/+ sqrt(y)``: population eigenvalues inside
    this closed interval are indistinguishable from the unit bulk.  The sample
    spectrum concentrates on ``[samp_lo, samp_hi]``, which are exactly the
    squares of the population endpoints.
    """

    pop_lo: float
    pop_hi: float
    samp_lo: float
    samp_hi: float


@dataclass(frozen=True)
class VarianceModel:
    """Asymptotic variance of a spike estimator plus the nuisance inputs.

    ``fourth_moment`` is E[x^4] of the standardized data entries (3 for
    Gaussian), ``ipr`` the sum of fourth powers of the population spike
    eigenvector coordinates (its inverse participation ratio), and ``sigma2``
    the variance of ``sqrt(n) * (alpha_hat - alpha)``.
    """

    fourth_moment: float
    ipr: float
    sigma2: float


class LocationInverse(NamedTuple):
    """Inverse-map output: the spike estimate and a bulk-edge flag."""

    alpha: float
    boundary: bool


def _check_ratio(y: float) -> None:
    if not (0.0 < y < 1.0) or not math.isfinite(y):
        raise InvalidRatio(f"aspect ratio must lie in (0, 1), got {y!r}")


def bulk_edges(y: float) -> BulkEdges:
    """Return the population-gap and sample-bulk endpoints for ratio ``y``.

    Raises
    ------
    InvalidRatio
        If ``y`` is not strictly inside (0, 1).
    """
    _check_ratio(y)
    root = math.sqrt(y)
    pop_lo, pop_hi = 1.0 - root, 1.0 + root
    return BulkEdges(pop_lo, pop_hi, pop_lo * pop_lo, pop_hi * pop_hi)


def spike_location(alpha: float, y: float) -> float:
    """Map a population spike to the limiting location of its sample eigenvalue.

    The map is ``alpha + y * alpha / (alpha - 1)``; it is strictly increasing
    on each side of the bulk and sends spikes outside ``[1 - sqrt(y),
    1 + sqrt(y)]`` to locations outside the sample bulk.

    Raises
    ------
    SpikeInsideBulk
        If ``alpha`` lies inside the closed population interval, where the
        map carries no information.
    """
    edges = bulk_edges(y)
    if edges.pop_lo <= alpha <= edges.pop_hi:
        raise SpikeInsideBulk(
            f"alpha={alpha!r} lies inside [{edges.pop_lo}, {edges.pop_hi}] for y={y!r}"
        )
    return alpha + y * alpha / (alpha - 1.0)


def spike_from_location(lam: float, y: float, side: SpikeSide) -> LocationInverse:
    """Invert :func:`spike_location` at an observed sample eigenvalue.

    Solves ``alpha + y*alpha/(alpha - 1) = lam`` for ``alpha``; the quadratic
    has two roots and ``side`` selects the one above (+) or below (-) the
    bulk.  A zero discriminant means ``lam`` sits exactly on a bulk edge: the
    edge value ``1 -/+ sqrt(y)`` is returned with ``boundary=True`` so that
    downstream aggregation can reject it.

    Raises
    ------
    NotSpiked
        If the discriminant is negative, i.e. ``lam`` lies strictly inside
        the sample bulk.
    """
    _check_ratio(y)
    shifted = lam + 1.0 - y
    disc = shifted * shifted - 4.0 * lam
    if disc < 0.0:
        edges = bulk_edges(y)
        raise NotSpiked(
            f"sample eigenvalue {lam!r} lies inside the bulk "
            f"[{edges.samp_lo}, {edges.samp_hi}] for y={y!r}"
        )
    root = math.sqrt(disc)
    if side is SpikeSide.UPPER:
        alpha = 0.5 * (shifted + root)
    else:
        alpha = 0.5 * (shifted - root)
    return LocationInverse(alpha, disc == 0.0)


def asymptotic_variance(
    alpha: float, y: float, fourth_moment: float, ipr: float
) -> VarianceModel:
    """Variance of ``sqrt(n) * (alpha_hat - alpha)`` for a spike estimator.

    The value is ``(fourth_moment - 3) * alpha^2 * ipr
    + 2 * alpha^2 * (alpha - 1)^2 / ((alpha - 1)^2 - y)`` and is positive
    whenever the preconditions hold.

    Raises
    ------
    DegenerateVariance
        If ``(alpha - 1)^2 <= y`` (spike on or inside the detection edge).
    ValueError
        If ``fourth_moment < 1`` or ``ipr`` outside [0, 1].
    """
    _check_ratio(y)
    if fourth_moment < 1.0:
        raise ValueError(f"fourth moment must be >= 1, got {fourth_moment!r}")
    if not 0.0 <= ipr <= 1.0:
        raise ValueError(f"ipr must lie in [0, 1], got {ipr!r}")
    gap = (alpha - 1.0) ** 2 - y
    if gap <= 0.0:
        raise DegenerateVariance(
            f"(alpha-1)^2 = {(alpha - 1.0) ** 2!r} must exceed y = {y!r}"
        )
    alpha2 = alpha * alpha
    sigma2 = (fourth_moment - 3.0) * alpha2 * ipr + 2.0 * alpha2 * (alpha - 1.0) ** 2 / gap
    return VarianceModel(fourth_moment, ipr, sigma2)


def gaussian_variance(alpha: float, y: float) -> VarianceModel:
    """Asymptotic variance in the Gaussian case, where the kurtosis term drops."""
    return asymptotic_variance(alpha, y, 3.0, 0.0)
