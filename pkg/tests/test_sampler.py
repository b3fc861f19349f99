"""Sampler tests: covariance roots, shard generation, partitions, CSV fixtures."""

import numpy as np
import pytest

from spikeshard.errors import InvalidRule, InvalidShape
from spikeshard.sampler import (
    EntryDistribution,
    Fixed,
    SpikedModel,
    UniformRange,
    build_covariance_root,
    dump_csv,
    load_dataset_csv,
    make_partition,
    sample_local,
)


def test_root_diagonal():
    model = SpikedModel(p=3, spikes=(4.0,))
    assert np.array_equal(build_covariance_root(model), np.diag([2.0, 1.0, 1.0]))


def test_root_null_model():
    model = SpikedModel(p=2, spikes=())
    assert np.array_equal(build_covariance_root(model), np.eye(2))


@pytest.mark.parametrize("rotation", ["identity", "random"])
def test_population_spectrum(rotation):
    model = SpikedModel(p=12, spikes=(6.0, 3.0, 0.1), rotation=rotation, rotation_seed=5)
    root = build_covariance_root(model)
    assert np.array_equal(root, root.T)
    spectrum = np.sort(np.linalg.eigvalsh(root @ root.T))[::-1]
    expected = np.sort(np.array([6.0, 3.0, 0.1] + [1.0] * 9))[::-1]
    assert np.max(np.abs(spectrum - expected)) <= 1e-10


def test_model_validation():
    with pytest.raises(ValueError):
        SpikedModel(p=2, spikes=(4.0, 3.0, 2.0))
    with pytest.raises(ValueError):
        SpikedModel(p=5, spikes=(3.0, 4.0))  # not decreasing
    with pytest.raises(ValueError):
        SpikedModel(p=5, spikes=(1.0,))
    with pytest.raises(ValueError):
        SpikedModel(p=5, spikes=(-2.0,))
    with pytest.raises(ValueError):
        SpikedModel(p=5, rotation="sideways")


def test_sample_determinism():
    model = SpikedModel(p=10, spikes=(5.0,))
    a = sample_local(model, 50, seed=123, worker_id=2)
    b = sample_local(model, 50, seed=123, worker_id=2)
    c = sample_local(model, 50, seed=123, worker_id=3)
    assert np.array_equal(a.observations, b.observations)
    assert not np.array_equal(a.observations, c.observations)


def test_sample_rejects_small_n():
    model = SpikedModel(p=10)
    with pytest.raises(InvalidShape):
        sample_local(model, 10, seed=0)


def test_rademacher_support():
    model = SpikedModel(p=5, entry_dist=EntryDistribution.RADEMACHER)
    data = sample_local(model, 200, seed=1)
    assert set(np.unique(data.raw_entries)) == {-1.0, 1.0}


def test_null_model_moments():
    model = SpikedModel(p=8)
    data = sample_local(model, 10000, seed=2)
    means = data.observations.mean(axis=1)
    variances = data.observations.var(axis=1)
    assert np.max(np.abs(means)) <= 0.05
    assert np.max(np.abs(variances - 1.0)) <= 0.05


@pytest.mark.parametrize(
    "dist", [EntryDistribution.GAUSSIAN, EntryDistribution.RADEMACHER, EntryDistribution.UNIFORM_SCALED]
)
def test_entry_fourth_moments(dist):
    model = SpikedModel(p=100, entry_dist=dist)
    data = sample_local(model, 10000, seed=3)  # 1e6 raw draws
    empirical = float(np.mean(data.raw_entries**4))
    assert empirical == pytest.approx(dist.fourth_moment, rel=0.05)


def test_partition_fixed_passthrough():
    plan = make_partition(p=50, m=2, rule=Fixed((100, 200)), seed=0)
    assert plan.sizes == (100, 200)
    assert plan.total == 300


def test_partition_uniform_range():
    plan = make_partition(p=100, m=40, rule=UniformRange(2.0, 8.0), seed=9)
    assert plan.m == 40
    assert all(200 <= size <= 800 for size in plan.sizes)
    again = make_partition(p=100, m=40, rule=UniformRange(2.0, 8.0), seed=9)
    assert plan.sizes == again.sizes
    # every shard keeps y < 1
    assert all(size > 100 for size in plan.sizes)


def test_partition_rejects_bad_rules():
    with pytest.raises(InvalidRule):
        make_partition(p=10, m=3, rule=UniformRange(1.0, 4.0))
    with pytest.raises(InvalidRule):
        make_partition(p=10, m=3, rule=UniformRange(3.0, 2.0))
    with pytest.raises(InvalidRule):
        make_partition(p=10, m=3, rule=Fixed((20, 30)))
    with pytest.raises(InvalidShape):
        make_partition(p=10, m=2, rule=Fixed((20, 10)))
    with pytest.raises(ValueError):
        make_partition(p=10, m=0)


def test_dump_load_round_trip(tmp_path):
    model = SpikedModel(p=7, spikes=(4.0,))
    data = sample_local(model, 30, seed=8, worker_id=5)
    path = tmp_path / "shard.csv"
    dump_csv(data, path)
    loaded = load_dataset_csv(path, worker_id=5)
    assert np.array_equal(loaded.observations, data.observations)
    assert loaded.worker_id == 5
