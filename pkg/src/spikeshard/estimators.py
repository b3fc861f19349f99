"""Scikit-learn style front ends over the estimation pipeline.

Both classes follow the usual estimator contract: all constructor arguments
are stored verbatim, ``fit`` validates its input and sets trailing-underscore
attributes, and ``get_params``/``set_params``/``clone`` work out of the box.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array

from .aggregate import InitialStrategy, WeightMode, aggregate_reports, shard_variance
from .errors import DegenerateVariance, InvalidShape, SpikeShardError
from .ingest import split_rows
from .localnode import MomentMode, local_report
from .sampler import LocalDataset
from .spectrum import SpikeSide

__all__ = ["SpikedEigenvalueEstimator", "DistributedSpikedEigenvalueEstimator"]


class SpikedEigenvalueEstimator(BaseEstimator):
    """Estimate one spiked population eigenvalue from a single data matrix.

    Parameters
    ----------
    spike_rank : int, default=1
        Which spike to estimate, 1-based in the global ordering
        (largest first for the upper side).
    side : {"upper", "lower"}, default="upper"
        Whether the spike sits above or below the unit bulk.
    n_spikes : int, default=1
        Total number of spikes assumed in the population.
    moment_mode : {"gaussian", "empirical"}, default="gaussian"
        Entry fourth-moment convention for the variance estimate.  The
        empirical mode needs raw i.i.d. entries and is unavailable for
        observed data matrices.
    ipr_variant : {"v_k", "v_t"}, default="v_k"
        Index convention inside the eigenvector-mass estimator; the default
        is the consistent one.

    Attributes
    ----------
    alpha_ : float
        Estimated spike.
    eigen_index_ : int
        1-based position of the sample eigenvalue that was inverted.
    boundary_ : bool
        True when the eigenvalue sat exactly on the bulk edge.
    aspect_ratio_ : float
        p / n of the fitted data.
    variance_ : float
        Plug-in asymptotic variance of ``sqrt(n) * (alpha_ - alpha)``
        (NaN when degenerate).
    stderr_ : float
        ``sqrt(variance_ / n)``.
    fourth_moment_, ipr_ : float
        Nuisance estimates that entered the variance.
    n_samples_, n_features_ : int
        Shape of the fitted data.
    """

    def __init__(
        self,
        spike_rank: int = 1,
        side: str = "upper",
        n_spikes: int = 1,
        moment_mode: str = "gaussian",
        ipr_variant: str = "v_k",
    ):
        self.spike_rank = spike_rank
        self.side = side
        self.n_spikes = n_spikes
        self.moment_mode = moment_mode
        self.ipr_variant = ipr_variant

    def fit(self, X, y=None):
        """Fit on an (n_samples, n_features) matrix with n_samples > n_features."""
        X = check_array(X, dtype=np.float64)
        n, p = X.shape
        if n <= p:
            raise InvalidShape(f"need n_samples > n_features, got {n} <= {p}")
        dataset = LocalDataset(worker_id=0, observations=X.T.copy())
        estimate = local_report(
            dataset,
            k=self.spike_rank,
            side=SpikeSide(self.side),
            n_spikes=self.n_spikes,
            moment_mode=MomentMode(self.moment_mode),
            ipr_variant=self.ipr_variant,
        )
        self.alpha_ = estimate.alpha_hat
        self.eigen_index_ = estimate.j
        self.boundary_ = estimate.boundary
        self.aspect_ratio_ = estimate.y
        self.fourth_moment_ = estimate.gamma4_hat
        self.ipr_ = estimate.u4sum_hat
        try:
            self.variance_ = shard_variance(estimate, estimate.alpha_hat)
            self.stderr_ = float(np.sqrt(self.variance_ / n))
        except DegenerateVariance:
            self.variance_ = float("nan")
            self.stderr_ = float("nan")
        self.n_samples_ = n
        self.n_features_ = p
        return self


class DistributedSpikedEigenvalueEstimator(BaseEstimator):
    """One-round distributed spike estimation over row shards of a matrix.

    ``fit`` splits the rows across ``n_machines`` simulated workers (seeded
    shuffle, contiguous shards), runs the local pipeline on each, and
    combines the local estimates with inverse-variance style weights.
    Pre-sharded data can be supplied directly through :meth:`fit_shards`.

    Parameters
    ----------
    n_machines : int, default=10
        Number of shards for :meth:`fit`.
    weight_mode : {"gaussian", "estimated", "uniform"}, default="gaussian"
        Closed-form Gaussian weights, estimated inverse-variance weights, or
        plain averaging.
    initial : {"mean", "first"}, default="mean"
        Initial-value strategy for the weight formulas.
    spike_rank, side, n_spikes, moment_mode, ipr_variant
        As in :class:`SpikedEigenvalueEstimator`.
    random_state : int, default=0
        Seed for the row shuffle.

    Attributes
    ----------
    alpha_ : float
        Combined estimate.
    stderr_ : float
        Estimated standard error of ``alpha_``.
    weights_ : ndarray
        Aggregation weights over the included workers.
    weight_mode_ : str
        Mode that actually produced the weights (may be "uniform" after a
        degenerate fallback).
    fallback_ : bool
        True when the requested weights degenerated.
    initial_value_ : float
        Initial value used in the weight formulas.
    excluded_workers_ : tuple of int
        Workers whose shard produced no usable estimate.
    reports_ : list
        Per-worker records, in worker-id order.
    n_machines_ : int
        Number of shards actually used.
    """

    def __init__(
        self,
        n_machines: int = 10,
        weight_mode: str = "gaussian",
        initial: str = "mean",
        spike_rank: int = 1,
        side: str = "upper",
        n_spikes: int = 1,
        moment_mode: str = "gaussian",
        ipr_variant: str = "v_k",
        random_state: int = 0,
    ):
        self.n_machines = n_machines
        self.weight_mode = weight_mode
        self.initial = initial
        self.spike_rank = spike_rank
        self.side = side
        self.n_spikes = n_spikes
        self.moment_mode = moment_mode
        self.ipr_variant = ipr_variant
        self.random_state = random_state

    def fit(self, X, y=None):
        """Shard an (n_samples, n_features) matrix by rows and aggregate."""
        X = check_array(X, dtype=np.float64)
        shards = split_rows(X, self.n_machines, seed=self.random_state)
        return self._fit_datasets(shards)

    def fit_shards(self, shards):
        """Fit on pre-sharded data: a list of (n_l, p) matrices."""
        datasets = []
        for worker, shard in enumerate(shards):
            arr = check_array(shard, dtype=np.float64)
            datasets.append(LocalDataset(worker_id=worker, observations=arr.T.copy()))
        if not datasets:
            raise InvalidShape("need at least one shard")
        p = datasets[0].p
        if any(d.p != p for d in datasets):
            raise InvalidShape("shards disagree on the number of features")
        return self._fit_datasets(datasets)

    def _fit_datasets(self, datasets):
        side = SpikeSide(self.side)
        moment_mode = MomentMode(self.moment_mode)
        reports = []
        excluded = []
        for dataset in datasets:
            try:
                reports.append(
                    local_report(
                        dataset,
                        k=self.spike_rank,
                        side=side,
                        n_spikes=self.n_spikes,
                        moment_mode=moment_mode,
                        ipr_variant=self.ipr_variant,
                    )
                )
            except SpikeShardError:
                excluded.append(dataset.worker_id)
        result = aggregate_reports(
            reports,
            p=datasets[0].p,
            weight_mode=WeightMode(self.weight_mode),
            initial=InitialStrategy(self.initial),
            excluded=tuple(excluded),
        )
        self.alpha_ = result.alpha
        self.stderr_ = result.stderr
        self.weights_ = result.weights.as_array()
        self.weight_mode_ = result.weights.mode.value
        self.fallback_ = result.weights.fallback
        self.initial_value_ = result.initial_value
        self.excluded_workers_ = result.excluded_workers
        self.reports_ = reports
        self.n_machines_ = len(datasets)
        return self
