"""Distributed estimation of spiked covariance eigenvalues from sharded data.

Each machine reduces its shard to a handful of scalars (shard size, aspect
ratio, a local spike estimate, nuisance moments); one communication round
later the coordinator combines them with inverse-variance style weights.
The package also ships the synthetic-data sampler, the wire protocol, and the
Monte Carlo harness used to validate the estimator's consistency, normality,
and error rate against pooled and plain-average baselines.
"""

from .aggregate import (
    AggregateResult,
    InitialStrategy,
    WeightMode,
    WeightVector,
    aggregate_reports,
    combine,
    gaussian_weights,
    initial_value,
    mse_limit,
    optimal_weights,
    shard_variance,
    standardized_stat,
    uniform_weights,
)
from .estimators import DistributedSpikedEigenvalueEstimator, SpikedEigenvalueEstimator
from .experiments import (
    CellResult,
    ExperimentConfig,
    NormalityResult,
    RateResult,
    fit_rate,
    pooled_estimate,
    rate_check,
    run_initials,
    run_mse_grid,
    run_normality,
    run_sweeps,
)
from .ingest import TabularDataset, analyze_real, load_csv, split_rows
from .localnode import (
    LocalEstimate,
    MomentMode,
    SpectralSummary,
    estimate_spike,
    fourth_moment_estimate,
    ipr_estimate,
    local_report,
    sample_covariance,
    secular_roots,
    spectral_decompose,
)
from .protocol import (
    ReportMessage,
    ReportStatus,
    RoundConfig,
    TransportStats,
    decode_report,
    encode_report,
    pooled_cost_model,
    run_round,
)
from .sampler import (
    EntryDistribution,
    Fixed,
    LocalDataset,
    PartitionPlan,
    SpikedModel,
    UniformRange,
    build_covariance_root,
    make_partition,
    sample_local,
)
from .spectrum import (
    BulkEdges,
    SpikeSide,
    VarianceModel,
    asymptotic_variance,
    bulk_edges,
    gaussian_variance,
    spike_from_location,
    spike_location,
)

__version__ = "0.1.0"

__all__ = [
    "AggregateResult",
    "BulkEdges",
    "CellResult",
    "DistributedSpikedEigenvalueEstimator",
    "EntryDistribution",
    "ExperimentConfig",
    "Fixed",
    "InitialStrategy",
    "LocalDataset",
    "LocalEstimate",
    "MomentMode",
    "NormalityResult",
    "PartitionPlan",
    "RateResult",
    "ReportMessage",
    "ReportStatus",
    "RoundConfig",
    "SpectralSummary",
    "SpikeSide",
    "SpikedEigenvalueEstimator",
    "SpikedModel",
    "TabularDataset",
    "TransportStats",
    "UniformRange",
    "VarianceModel",
    "WeightMode",
    "WeightVector",
    "aggregate_reports",
    "analyze_real",
    "asymptotic_variance",
    "build_covariance_root",
    "bulk_edges",
    "combine",
    "decode_report",
    "encode_report",
    "estimate_spike",
    "fit_rate",
    "fourth_moment_estimate",
    "gaussian_variance",
    "gaussian_weights",
    "initial_value",
    "ipr_estimate",
    "load_csv",
    "local_report",
    "make_partition",
    "mse_limit",
    "optimal_weights",
    "pooled_cost_model",
    "pooled_estimate",
    "rate_check",
    "run_initials",
    "run_mse_grid",
    "run_normality",
    "run_round",
    "run_sweeps",
    "sample_covariance",
    "sample_local",
    "secular_roots",
    "shard_variance",
    "spectral_decompose",
    "spike_from_location",
    "spike_location",
    "split_rows",
    "standardized_stat",
    "uniform_weights",
]
