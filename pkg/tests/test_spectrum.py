"""Formula-layer tests: bulk edges, the spike map and its inverse, variances."""

import math

import numpy as np
import pytest

from spikeshard.errors import (
    DegenerateVariance,
    InvalidRatio,
    NotSpiked,
    SpikeInsideBulk,
)
from spikeshard.spectrum import (
    SpikeSide,
    asymptotic_variance,
    bulk_edges,
    gaussian_variance,
    spike_from_location,
    spike_location,
)


def _random_spike(rng):
    """Draw (alpha, y, side) with alpha strictly outside the population interval."""
    y = float(rng.uniform(0.02, 0.95))
    root = math.sqrt(y)
    if rng.random() < 0.5:
        alpha = 1.0 + root + float(rng.uniform(0.05, 40.0))
        return alpha, y, SpikeSide.UPPER
    alpha = (1.0 - root) * float(rng.uniform(0.05, 0.95))
    return alpha, y, SpikeSide.LOWER


def test_bulk_edges_quarter():
    edges = bulk_edges(0.25)
    assert edges.pop_lo == 0.5
    assert edges.pop_hi == 1.5
    assert edges.samp_lo == 0.25
    assert edges.samp_hi == 2.25


def test_bulk_edges_half():
    # (1 -/+ sqrt(1/2))^2 == 3/2 -/+ sqrt(2), an independent algebraic form
    edges = bulk_edges(0.5)
    assert edges.samp_lo == pytest.approx(1.5 - math.sqrt(2.0), rel=1e-14)
    assert edges.samp_hi == pytest.approx(1.5 + math.sqrt(2.0), rel=1e-14)


def test_bulk_edges_degenerate_limit():
    edges = bulk_edges(1e-18)
    for value in (edges.pop_lo, edges.pop_hi, edges.samp_lo, edges.samp_hi):
        assert value == pytest.approx(1.0, abs=1e-8)


def test_bulk_edges_square_identity():
    rng = np.random.default_rng(11)
    for y in rng.uniform(0.001, 0.999, size=100):
        edges = bulk_edges(float(y))
        assert edges.samp_lo == edges.pop_lo**2
        assert edges.samp_hi == edges.pop_hi**2


@pytest.mark.parametrize("y", [0.0, 1.0, -0.3, 2.0, float("nan")])
def test_bulk_edges_rejects_bad_ratio(y):
    with pytest.raises(InvalidRatio):
        bulk_edges(y)


def test_spike_location_known_values():
    # alpha + y*alpha/(alpha-1) evaluated by hand: 10 + 5/9 and 37/4950
    assert spike_location(10.0, 0.5) == pytest.approx(95.0 / 9.0, rel=1e-15)
    assert spike_location(0.01, 0.25) == pytest.approx(37.0 / 4950.0, rel=1e-13)


def test_spike_location_zero_ratio_limit():
    assert spike_location(10.0, 1e-14) == pytest.approx(10.0, abs=1e-10)


def test_spike_location_outside_sample_bulk():
    rng = np.random.default_rng(3)
    for _ in range(200):
        alpha, y, side = _random_spike(rng)
        location = spike_location(alpha, y)
        edges = bulk_edges(y)
        if side is SpikeSide.UPPER:
            assert location > edges.samp_hi
        else:
            assert 0.0 < location < edges.samp_lo


def test_spike_location_rejects_bulk():
    for alpha in (0.5, 0.9, 1.0, 1.2, 1.5):
        with pytest.raises(SpikeInsideBulk):
            spike_location(alpha, 0.25)


def test_spike_location_monotone_adjacent_pairs():
    rng = np.random.default_rng(4)
    for _ in range(300):
        y = float(rng.uniform(0.05, 0.95))
        root = math.sqrt(y)
        if rng.random() < 0.5:
            a = 1.0 + root + float(rng.uniform(1e-6, 30.0))
            b = a + float(rng.uniform(1e-9, 1.0))
        else:
            b = (1.0 - root) * float(rng.uniform(0.05, 0.999))
            a = b * float(rng.uniform(0.01, 0.999))
        assert spike_location(a, y) < spike_location(b, y)


def test_inverse_round_trip_known():
    lam = spike_location(10.0, 0.5)
    recovered = spike_from_location(lam, 0.5, SpikeSide.UPPER)
    assert recovered.alpha == pytest.approx(10.0, abs=1e-10)
    assert not recovered.boundary


def test_inverse_lower_round_trip():
    lam = spike_location(0.01, 0.25)
    recovered = spike_from_location(lam, 0.25, SpikeSide.LOWER)
    assert recovered.alpha == pytest.approx(0.01, abs=1e-12)


def test_inverse_boundary_flagged():
    # lam = (1 + sqrt(0.25))^2 = 2.25 has zero discriminant exactly
    result = spike_from_location(2.25, 0.25, SpikeSide.UPPER)
    assert result.alpha == 1.5
    assert result.boundary


def test_inverse_rejects_bulk_interior():
    # discriminant (2 + 1 - 0.5)^2 - 8 = -1.75
    with pytest.raises(NotSpiked):
        spike_from_location(2.0, 0.5, SpikeSide.UPPER)


def test_round_trip_random():
    rng = np.random.default_rng(7)
    for _ in range(500):
        alpha, y, side = _random_spike(rng)
        recovered = spike_from_location(spike_location(alpha, y), y, side)
        assert abs(recovered.alpha - alpha) <= 1e-10 * max(1.0, abs(alpha))


def test_gaussian_variance_known():
    # 2 * 100 * 81 / (81 - 0.5) written as the frozen fraction 16200/80.5
    assert gaussian_variance(10.0, 0.5).sigma2 == pytest.approx(16200.0 / 80.5, rel=1e-14)
    assert gaussian_variance(0.01, 0.25).sigma2 == pytest.approx(0.00019602 / 0.7301, rel=1e-12)


def test_variance_kurtosis_term():
    base = 16200.0 / 80.5
    assert asymptotic_variance(10.0, 0.5, 1.0, 1.0).sigma2 == pytest.approx(base - 200.0, rel=1e-12)
    assert asymptotic_variance(10.0, 0.5, 7.0, 0.0).sigma2 == pytest.approx(base, rel=1e-14)
    for ipr in (0.0, 0.3, 1.0):
        assert asymptotic_variance(10.0, 0.5, 3.0, ipr).sigma2 == pytest.approx(base, rel=1e-14)


def test_variance_positive_on_random_inputs():
    rng = np.random.default_rng(9)
    for _ in range(300):
        alpha, y, _ = _random_spike(rng)
        if (alpha - 1.0) ** 2 <= y:
            continue
        fourth = float(rng.uniform(1.0, 9.0))
        ipr = float(rng.uniform(0.0, 1.0))
        assert asymptotic_variance(alpha, y, fourth, ipr).sigma2 > 0.0


def test_variance_diverges_at_threshold():
    y = 0.4
    eps = 1e-3
    near = 1.0 + math.sqrt(y * (1.0 + eps))
    far = 1.0 + math.sqrt(y * (1.0 + 2.0 * eps))
    assert gaussian_variance(near, y).sigma2 > gaussian_variance(far, y).sigma2


def test_variance_degenerate():
    with pytest.raises(DegenerateVariance):
        asymptotic_variance(1.2, 0.5, 3.0, 0.0)


def test_variance_rejects_bad_nuisance():
    with pytest.raises(ValueError):
        asymptotic_variance(10.0, 0.5, 0.5, 0.0)
    with pytest.raises(ValueError):
        asymptotic_variance(10.0, 0.5, 3.0, 1.5)
