import numpy as np
import pytest
from scipy import ndimage

from btrt.rng import RngStream
from btrt.simulate import SimConfig, gen_dataset, gen_regions, simulate


def test_single_point_region():
    cfg = SimConfig(dims=(9, 9), regions=1, radius_min=0, radius_max=0, n=1)
    coef = gen_regions(RngStream(1), cfg)
    assert np.count_nonzero(coef) == 1
    assert coef.max() == 1.0


def test_center_value_equals_peak():
    cfg = SimConfig(dims=(30, 30), regions=3, radius_min=2, radius_max=4, n=1)
    coef = gen_regions(RngStream(2), cfg)
    labels, count = ndimage.label(coef > 0)
    assert count == 3
    for lab in range(1, 4):
        assert coef[labels == lab].max() == pytest.approx(1.0)


def test_values_in_unit_interval_and_boundary_value():
    cfg = SimConfig(dims=(40, 40), regions=3, radius_min=3, radius_max=5, n=1)
    coef = gen_regions(RngStream(3), cfg)
    nz = coef[coef > 0]
    assert nz.min() >= 0.2 - 1e-12
    assert nz.max() <= 1.0 + 1e-12


def test_nonzero_fraction_tracks_region_areas():
    cfg = SimConfig(dims=(50, 50), regions=3, radius_min=4, radius_max=4, n=1)
    coef = gen_regions(RngStream(4), cfg)
    # discrete disk of radius 4 has 49 cells
    expected = 3 * 49 / 2500
    actual = np.count_nonzero(coef) / coef.size
    assert abs(actual - expected) / expected < 0.2


def test_regions_are_disjoint_and_connected():
    for seed in range(5):
        cfg = SimConfig(dims=(50, 50), regions=3, radius_min=4, radius_max=6, n=1)
        coef = gen_regions(RngStream(seed), cfg)
        _, count = ndimage.label(coef > 0)
        assert count == 3


def test_placement_failure_raises():
    cfg = SimConfig(dims=(13, 13), regions=6, radius_min=3, radius_max=3, n=1)
    with pytest.raises(RuntimeError):
        gen_regions(RngStream(5), cfg)


def test_radius_must_fit_dims():
    with pytest.raises(ValueError):
        SimConfig(dims=(8, 8), radius_min=4, radius_max=4)


def test_dataset_noiseless_reduces_to_linear_model():
    cfg = SimConfig(dims=(6, 6), regions=1, radius_min=1, radius_max=2, n=50,
                    noise_variance=0.0)
    coef = np.zeros((6, 6))
    data, truth = gen_dataset(RngStream(6), cfg, coef)
    np.testing.assert_allclose(data.y, data.eta @ np.array(cfg.gamma_true), atol=1e-12)


def test_dataset_residual_variance():
    cfg = SimConfig(dims=(8, 8), regions=1, radius_min=2, radius_max=2, n=1000,
                    noise_variance=2.0)
    coef = gen_regions(RngStream(7), cfg)
    data, truth = gen_dataset(RngStream(8), cfg, coef)
    resid = data.y - data.X.reshape(1000, -1) @ coef.reshape(-1) - data.eta @ truth.gamma
    assert resid.var() == pytest.approx(2.0, rel=0.1)


def test_dataset_reproducible():
    cfg = SimConfig(dims=(9, 9), n=20, regions=2, radius_min=1, radius_max=1)
    d1, t1 = simulate(cfg)
    d2, t2 = simulate(cfg)
    np.testing.assert_array_equal(d1.X, d2.X)
    np.testing.assert_array_equal(d1.y, d2.y)
    np.testing.assert_array_equal(t1.coef, t2.coef)


def test_true_predictor_recovers_unit_slope():
    cfg = SimConfig(dims=(10, 10), regions=2, radius_min=2, radius_max=3, n=800)
    data, truth = simulate(cfg)
    predictor = (
        data.X.reshape(800, -1) @ truth.coef.reshape(-1) + data.eta @ truth.gamma
    )
    slope = float(predictor @ data.y) / float(predictor @ predictor)
    assert slope == pytest.approx(1.0, abs=0.02)


def test_q_zero_supported():
    cfg = SimConfig(dims=(9, 9), n=30, regions=2, gamma_true=(), radius_min=1, radius_max=1)
    data, truth = simulate(cfg)
    assert data.q == 0
    assert data.eta.shape == (30, 0)
