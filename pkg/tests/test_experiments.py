"""Monte Carlo harness tests: determinism, same-sample discipline, rate fits."""

import io

import numpy as np
import pytest

from spikeshard.aggregate import WeightMode, aggregate_reports
from spikeshard.errors import EmptyInput, InvalidShape
from spikeshard.experiments import (
    CellResult,
    ExperimentConfig,
    fit_rate,
    pooled_estimate,
    rate_check,
    run_initials,
    run_mse_grid,
    run_normality,
    run_sweeps,
    summarize_normality,
    write_cells_csv,
    write_initials_csv,
    write_rate_csv,
)
from spikeshard.experiments import _draw_shards, _shard_reports
from spikeshard.localnode import local_report
from spikeshard.sampler import LocalDataset, SpikedModel, sample_local


def test_pooled_single_shard_equals_local_estimate():
    model = SpikedModel(p=25, spikes=(9.0,))
    shard = sample_local(model, 200, seed=1)
    assert pooled_estimate([shard]) == local_report(shard).alpha_hat


def test_pooled_matches_concatenation():
    model = SpikedModel(p=20, spikes=(8.0,))
    shards = [sample_local(model, n, seed=2, worker_id=i) for i, n in enumerate([100, 140])]
    merged = LocalDataset(0, np.hstack([d.observations for d in shards]))
    assert pooled_estimate(shards) == pytest.approx(local_report(merged).alpha_hat, rel=1e-12)


def test_pooled_validation():
    with pytest.raises(EmptyInput):
        pooled_estimate([])
    with pytest.raises(InvalidShape):
        pooled_estimate([LocalDataset(0, np.zeros((30, 10))), LocalDataset(1, np.zeros((29, 10)))])
    with pytest.raises(InvalidShape):
        pooled_estimate([LocalDataset(0, np.zeros((30, 10)))])  # pooled n <= p


def test_grid_rerun_bit_identical():
    config = ExperimentConfig(alpha=10.0, p_grid=(30,), m_grid=(4,), reps=3, seed=11)
    first = run_mse_grid(config)
    second = run_mse_grid(config)
    assert first == second
    assert first[0].failures == 0


def test_grid_same_sample_discipline():
    # reproduce rep 0 by hand and confirm the cell used those exact shards
    config = ExperimentConfig(alpha=10.0, p_grid=(30,), m_grid=(4,), reps=1, seed=13)
    cell = run_mse_grid(config)[0]
    shards = _draw_shards(config, 30, 4, 0, 0)
    reports = _shard_reports(shards, config)
    pooled = pooled_estimate(shards, 1, config.side, 1)
    weighted = aggregate_reports(reports, 30, config.weight_mode, config.initial).alpha
    average = aggregate_reports(reports, 30, WeightMode.UNIFORM).alpha
    assert cell.mse_pooled == (pooled - 10.0) ** 2
    assert cell.mse_weighted == (weighted - 10.0) ** 2
    assert cell.mse_avg == (average - 10.0) ** 2


def test_sweep_requires_singleton_axis():
    with pytest.raises(ValueError):
        run_sweeps(ExperimentConfig(p_grid=(20, 30), m_grid=(2, 3), reps=1))
    with pytest.raises(ValueError):
        ExperimentConfig(p_grid=(), m_grid=(2,), reps=1)


def test_sweep_runs_with_fixed_p():
    config = ExperimentConfig(alpha=10.0, p_grid=(20,), m_grid=(2, 4), reps=2, seed=17)
    cells = run_sweeps(config)
    assert [c.m for c in cells] == [2, 4]


def test_sweep_weighted_mse_decreases_in_m():
    # at fixed p the total sample grows with m, so the weighted error falls
    config = ExperimentConfig(alpha=10.0, p_grid=(50,), m_grid=(5, 40), reps=40, seed=37)
    low, high = run_sweeps(config)
    assert high.mse_weighted < low.mse_weighted
    for cell in (low, high):
        assert cell.mse_pooled <= 1.10 * cell.mse_weighted
        assert cell.mse_weighted <= 1.10 * cell.mse_avg


def test_initials_same_streams_and_spread():
    config = ExperimentConfig(alpha=10.0, p_grid=(30,), m_grid=(5,), reps=10, seed=19)
    cells = run_initials(config)
    assert len(cells) == 3
    mses = np.array([c.mse for c in cells])
    assert np.ptp(mses) / mses.mean() <= 0.05


def test_normality_requires_enough_reps():
    with pytest.raises(ValueError):
        run_normality(ExperimentConfig(reps=100))


def test_summarize_normality_rejects_degenerate():
    with pytest.raises(ValueError):
        summarize_normality(np.zeros(500))
    with pytest.raises(ValueError):
        summarize_normality([1.0])
    result = summarize_normality(np.random.default_rng(0).standard_normal(500))
    assert result.ks_distance < 0.08
    assert int(result.bin_counts.sum()) <= 500


def test_fit_rate_exact_inverse_law():
    ns = [1000, 2000, 4000, 8000]
    mses = [5.0 / n for n in ns]
    assert fit_rate(ns, mses) == pytest.approx(-1.0, abs=1e-12)


def test_fit_rate_degenerate_and_errors():
    with pytest.warns(UserWarning):
        assert fit_rate([100, 100], [1.0, 2.0]) == 0.0
    with pytest.raises(ValueError):
        fit_rate([100], [1.0])
    with pytest.raises(ValueError):
        fit_rate([10, 20], [0.0, 1.0])


def test_rate_check_small_scale():
    config = ExperimentConfig(
        alpha=10.0, p_grid=(20,), m_grid=(4,), reps=20, n_totals=(160, 640, 2560), seed=23
    )
    result = rate_check(config)
    mses = [e for _, e in result.points]
    assert mses[0] > mses[1] > mses[2]
    assert -1.5 <= result.slope <= -0.5


def test_rate_check_needs_three_points():
    with pytest.raises(ValueError):
        rate_check(ExperimentConfig(n_totals=(100, 200)))


def test_config_from_dict_round_trip():
    config = ExperimentConfig.from_dict(
        {
            "alpha": 0.01,
            "p_grid": [40],
            "m_grid": [3],
            "reps": 2,
            "entry_dist": "rademacher",
            "partition": {"rule": "fixed", "sizes": [100, 120, 140]},
            "weight_mode": "uniform",
            "initial": "first",
            "seed": 5,
        }
    )
    assert config.alpha == 0.01
    assert config.side.value == "lower"
    assert config.partition.sizes == (100, 120, 140)
    assert config.weight_mode is WeightMode.UNIFORM
    cells = run_mse_grid(config)
    assert cells[0].p == 40 and cells[0].m == 3


def test_cells_csv_round_trip():
    cells = [CellResult(100, 50, 300, 6.83e-3, 6.85e-3, 8.56e-3, 0)]
    buffer = io.StringIO()
    write_cells_csv(cells, buffer)
    lines = buffer.getvalue().strip().splitlines()
    assert lines[0] == "p,m,reps,mse_pooled,mse_weighted,mse_avg,failures"
    row = lines[1].split(",")
    assert int(row[0]) == 100 and int(row[1]) == 50
    assert float(row[3]) == 6.83e-3 and float(row[5]) == 8.56e-3


def test_initials_and_rate_csv_headers():
    config = ExperimentConfig(alpha=10.0, p_grid=(20,), m_grid=(3,), reps=2, seed=29)
    buffer = io.StringIO()
    write_initials_csv(run_initials(config), buffer)
    assert buffer.getvalue().splitlines()[0] == "p,m,reps,strategy,mse,failures"
    config = ExperimentConfig(
        alpha=10.0, p_grid=(20,), m_grid=(2,), reps=2, n_totals=(100, 200, 400), seed=31
    )
    buffer = io.StringIO()
    write_rate_csv(rate_check(config), buffer)
    assert buffer.getvalue().splitlines()[0] == "n_total,mse,reps"
