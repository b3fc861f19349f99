"""Everything a single machine computes from its own shard.

The pipeline is sample covariance -> spectral decomposition -> spike estimate
via the inverse location map, plus the two nuisance quantities needed for
estimated aggregation weights: the entry fourth moment and the inverse
participation ratio of the spike's population eigenvector.  The latter is
recovered from the sample eigenvectors re-weighted by the roots of the
secular equation

    (1/p) * sum_k  lambda_k / (lambda_k - x)  =  1 / y,

whose p solutions interlace the sample eigenvalues.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import (
    InvalidShape,
    NoConvergence,
    RepeatedEigenvalues,
    WhiteningUnavailable,
)
from .sampler import LocalDataset
from .spectrum import SpikeSide, _check_ratio, spike_from_location

__all__ = [
    "SpectralSummary",
    "SpikeEstimate",
    "LocalEstimate",
    "MomentMode",
    "sample_covariance",
    "spectral_decompose",
    "estimate_spike",
    "secular_roots",
    "secular_residual",
    "ipr_estimate",
    "fourth_moment_estimate",
    "local_report",
]

_TIE_TOL = 1e-12
_MAX_BISECTIONS = 200


class MomentMode(enum.Enum):
    """How a worker obtains the entry fourth moment."""

    GAUSSIAN = "gaussian"
    EMPIRICAL = "empirical"


@dataclass
class SpectralSummary:
    """Descending eigenvalues, aligned eigenvectors, and the shard's ratio.

    ``eigenvectors[:, t]`` is the eigenvector paired with ``eigenvalues[t]``;
    it may be ``None`` on fast paths that only need the spectrum.
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray | None
    y: float


class SpikeEstimate(NamedTuple):
    """Local spike estimate with its 1-based position in the spectrum."""

    alpha: float
    eigen_index: int
    boundary: bool


@dataclass(frozen=True)
class LocalEstimate:
    """The full per-worker record; this is the only payload a worker transmits."""

    worker_id: int
    n: int
    y: float
    k: int
    j: int
    alpha_hat: float
    gamma4_hat: float
    u4sum_hat: float
    boundary: bool = False


def sample_covariance(data: LocalDataset) -> np.ndarray:
    """Return S = Y Y^T / n for the shard's observation matrix Y (p x n)."""
    gram = data.gram()
    return (gram + gram.T) / (2.0 * data.n)


def _eigh_descending(matrix: np.ndarray, vectors: bool):
    try:
        if vectors:
            vals, vecs = np.linalg.eigh(matrix)
            return vals[::-1].copy(), vecs[:, ::-1].copy()
        vals = np.linalg.eigvalsh(matrix)
        return vals[::-1].copy(), None
    except np.linalg.LinAlgError as exc:
        raise NoConvergence(f"eigensolver failed: {exc}") from exc


def spectral_decompose(matrix: np.ndarray, y: float) -> SpectralSummary:
    """Eigendecompose a symmetric matrix into a :class:`SpectralSummary`.

    Eigenvalues come out descending; each eigenvector's sign is fixed so that
    its first nonzero coordinate is positive, making results deterministic.
    """
    vals, vecs = _eigh_descending(matrix, vectors=True)
    first = (vecs != 0.0).argmax(axis=0)
    signs = np.sign(vecs[first, np.arange(vecs.shape[1])])
    signs[signs == 0] = 1.0
    vecs *= signs
    return SpectralSummary(eigenvalues=vals, eigenvectors=vecs, y=float(y))


def estimate_spike(
    summary: SpectralSummary, k: int, side: SpikeSide, n_spikes: int
) -> SpikeEstimate:
    """Estimate spike ``k`` (1-based, global ordering) from the shard spectrum.

    Upper-side spikes read the k-th largest sample eigenvalue; lower-side
    spikes read position ``p - n_spikes + k``.  Raises NotSpiked when that
    eigenvalue falls inside the shard's bulk.
    """
    p = summary.eigenvalues.shape[0]
    if not 1 <= k <= n_spikes:
        raise ValueError(f"spike index k={k} outside 1..{n_spikes}")
    if n_spikes > p:
        raise ValueError(f"n_spikes={n_spikes} exceeds dimension {p}")
    j = k if side is SpikeSide.UPPER else p - n_spikes + k
    lam = float(summary.eigenvalues[j - 1])
    inverse = spike_from_location(lam, summary.y, side)
    return SpikeEstimate(alpha=inverse.alpha, eigen_index=j, boundary=inverse.boundary)


def secular_residual(eigenvalues: np.ndarray, y: float, x: np.ndarray) -> np.ndarray:
    """Evaluate (1/p) sum_k lam_k/(lam_k - x) - 1/y at each point of ``x``."""
    lam = np.asarray(eigenvalues, dtype=np.float64)
    x = np.atleast_1d(np.asarray(x, dtype=np.float64))
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = lam[None, :] / (lam[None, :] - x[:, None])
    return terms.mean(axis=1) - 1.0 / y


def secular_roots(eigenvalues: np.ndarray, y: float) -> np.ndarray:
    """Solve the secular equation, one root per inter-eigenvalue gap.

    For a strictly descending positive spectrum ``lam_1 > ... > lam_p`` the
    equation has exactly one solution in each interval ``(lam_{j+1}, lam_j)``
    and one in ``(0, lam_p)``; the function is strictly increasing between
    poles, so bracketed bisection cannot fail.  Brackets start a fraction
    1e-14 of the gap away from each pole and shrink until they collapse to
    adjacent floats (at most 200 iterations).

    Returns the roots in descending order.

    Raises
    ------
    RepeatedEigenvalues
        If two adjacent eigenvalues coincide within 1e-12 (relative), which
        would merge two brackets.
    """
    lam = np.asarray(eigenvalues, dtype=np.float64)
    if lam.ndim != 1 or lam.size == 0:
        raise ValueError("eigenvalues must be a non-empty 1-D array")
    if not np.isfinite(lam).all():
        raise ValueError("eigenvalues must be finite")
    _check_ratio(y)
    if lam[-1] <= 0.0:
        raise ValueError("eigenvalues must be strictly positive")
    p = lam.size
    if p > 1:
        gaps = lam[:-1] - lam[1:]
        if (gaps < 0).any():
            raise ValueError("eigenvalues must be sorted in descending order")
        tol = _TIE_TOL * np.maximum(1.0, np.abs(lam[:-1]))
        if (gaps <= tol).any():
            raise RepeatedEigenvalues("adjacent eigenvalues coincide within 1e-12")

    lower = np.empty(p)
    lower[: p - 1] = lam[1:]
    lower[p - 1] = 0.0
    width = lam - lower
    a = np.maximum(lower + 1e-14 * width, np.nextafter(lower, np.inf))
    a[p - 1] = 0.0  # the secular function is already finite and negative at 0
    b = np.minimum(lam - 1e-14 * width, np.nextafter(lam, -np.inf))

    target = 1.0 / y
    with np.errstate(divide="ignore", invalid="ignore"):
        for _ in range(_MAX_BISECTIONS):
            mid = 0.5 * (a + b)
            open_mask = (mid > a) & (mid < b)
            if not open_mask.any():
                break
            values = (lam[None, :] / (lam[None, :] - mid[:, None])).mean(axis=1)
            negative = values < target
            a = np.where(open_mask & negative, mid, a)
            b = np.where(open_mask & ~negative, mid, b)
        # brackets are now a float apart; keep the endpoint with smaller residual
        res_a = np.abs((lam[None, :] / (lam[None, :] - a[:, None])).mean(axis=1) - target)
        res_b = np.abs((lam[None, :] / (lam[None, :] - b[:, None])).mean(axis=1) - target)
    return np.where(res_a <= res_b, a, b)


def _guarded_ratio(num: np.ndarray, den: np.ndarray) -> np.ndarray:
    # term-wise convention: anything of the form 0/0 counts as 0
    num = np.asarray(num, dtype=np.float64)
    den = np.asarray(den, dtype=np.float64)
    out = np.zeros(np.broadcast_shapes(num.shape, den.shape))
    np.divide(num, den, out=out, where=den != 0.0)
    return out


def ipr_estimate(
    summary: SpectralSummary,
    eigen_index: int,
    variant: str = "v_k",
    clamp: bool = True,
) -> float:
    """Estimate the inverse participation ratio of the spike's population vector.

    The estimator is ``sum_j ( sum_t theta(t) * u_hat[j, t]^2 )^2`` where the
    weights combine sample eigenvalues with the secular roots ``v``:

    * at the spike position ``theta = 1 + sum_{j != k} (lam_j/(lam_k - lam_j)
      - v_j/(lam_k - v_j))``,
    * elsewhere ``theta(t) = -(lam_k/(lam_t - lam_k) - v/(lam_t - v))`` with
      ``v = v_k`` (default) or ``v = v_t`` depending on ``variant``.

    The ``v_k`` variant is the one validated by the Monte Carlo consistency
    check in the test suite; ``v_t`` is retained as a configuration switch
    and is not consistent.
    """
    if summary.eigenvectors is None:
        raise ValueError("ipr_estimate needs eigenvectors; use spectral_decompose")
    if variant not in ("v_k", "v_t"):
        raise ValueError(f"unknown variant {variant!r}")
    lam = summary.eigenvalues
    p = lam.shape[0]
    if not 1 <= eigen_index <= p:
        raise ValueError(f"eigen_index {eigen_index} outside 1..{p}")
    kk = eigen_index - 1
    roots = secular_roots(lam, summary.y)

    others = np.arange(p) != kk
    theta = np.empty(p)
    vref = roots[kk] if variant == "v_k" else roots[others]
    theta[others] = -(
        _guarded_ratio(lam[kk], lam[others] - lam[kk])
        - _guarded_ratio(vref, lam[others] - vref)
    )
    theta[kk] = 1.0 + np.sum(
        _guarded_ratio(lam[others], lam[kk] - lam[others])
        - _guarded_ratio(roots[others], lam[kk] - roots[others])
    )
    coord_mass = (summary.eigenvectors**2) @ theta
    raw = float(np.sum(coord_mass**2))
    if not clamp:
        return raw
    return min(1.0, max(0.0, raw))


def fourth_moment_estimate(
    data: LocalDataset,
    mode: MomentMode = MomentMode.GAUSSIAN,
    root: np.ndarray | None = None,
) -> float:
    """Entry fourth moment: exactly 3 under the Gaussian assumption, or the
    mean fourth power of the whitened entries in empirical mode.

    Empirical mode needs the raw pre-rotation entries; if the dataset does
    not carry them, a known covariance root can be supplied to whiten the
    observations instead.
    """
    if mode is MomentMode.GAUSSIAN:
        return 3.0
    if data.raw_entries is not None:
        entries = data.raw_entries
    elif root is not None:
        entries = np.linalg.solve(root, data.observations)
    else:
        raise WhiteningUnavailable(
            "empirical fourth moment needs raw entries or a covariance root"
        )
    return float(np.mean(entries**4))


def local_report(
    data: LocalDataset,
    k: int = 1,
    side: SpikeSide = SpikeSide.UPPER,
    n_spikes: int = 1,
    moment_mode: MomentMode = MomentMode.GAUSSIAN,
    ipr_variant: str = "v_k",
    estimate_ipr: bool | None = None,
    root: np.ndarray | None = None,
) -> LocalEstimate:
    """Run the full single-machine pipeline and bundle the transmitted record.

    With the default Gaussian moment mode the kurtosis correction vanishes,
    so the eigenvector work is skipped and only the spectrum is computed;
    pass ``estimate_ipr=True`` to force it.  Raises NotSpiked (via the
    inverse map) when the target eigenvalue sits inside this shard's bulk.
    """
    if data.n <= data.p:
        raise InvalidShape(f"shard n={data.n} must exceed p={data.p}")
    y = data.p / data.n
    covariance = sample_covariance(data)
    want_ipr = estimate_ipr if estimate_ipr is not None else moment_mode is MomentMode.EMPIRICAL
    if want_ipr:
        summary = spectral_decompose(covariance, y)
    else:
        vals, _ = _eigh_descending(covariance, vectors=False)
        summary = SpectralSummary(eigenvalues=vals, eigenvectors=None, y=y)
    spike = estimate_spike(summary, k, side, n_spikes)
    u4sum = ipr_estimate(summary, spike.eigen_index, ipr_variant) if want_ipr else 0.0
    gamma4 = fourth_moment_estimate(data, moment_mode, root)
    return LocalEstimate(
        worker_id=data.worker_id,
        n=data.n,
        y=y,
        k=k,
        j=spike.eigen_index,
        alpha_hat=spike.alpha,
        gamma4_hat=gamma4,
        u4sum_hat=u4sum,
        boundary=spike.boundary,
    )
