import math
import time

import numpy as np
import pytest

from dear.bandwidth import (BandwidthReport, adaptive_bandwidths,
                            dpi_density_bandwidth, dpi_regression_bandwidth,
                            rule_of_thumb_bandwidth)
from dear.errors import InvalidSampleError


class TestRuleOfThumb:
    def test_normal_reference_value(self):
        # standardized sample with IQR/1.34 > 1 so sd drives the value:
        # 1.06 * 1000^(-1/5) = 0.2662620...
        rng = np.random.default_rng(0)
        x = rng.uniform(-1, 1, 1000)
        x = (x - x.mean()) / x.std()
        assert rule_of_thumb_bandwidth(x) == pytest.approx(1.06 * 1000 ** -0.2, rel=1e-12)
        assert rule_of_thumb_bandwidth(x) == pytest.approx(0.2662600, abs=1e-6)

    def test_scale_equivariance(self):
        rng = np.random.default_rng(1)
        x = rng.standard_normal(300)
        assert rule_of_thumb_bandwidth(2.0 * x) == pytest.approx(
            2.0 * rule_of_thumb_bandwidth(x), rel=1e-12)

    def test_translation_invariance(self):
        rng = np.random.default_rng(2)
        x = rng.standard_normal(300)
        assert rule_of_thumb_bandwidth(x + 17.3) == pytest.approx(
            rule_of_thumb_bandwidth(x), rel=1e-12)

    def test_two_points(self):
        h = rule_of_thumb_bandwidth([0.0, 1.0])
        assert h > 0 and math.isfinite(h)

    def test_degenerate_sample(self):
        with pytest.raises(InvalidSampleError):
            rule_of_thumb_bandwidth([3.0, 3.0, 3.0])


class TestDensityPlugIn:
    def test_normal_sample_band(self):
        # oracle calibration: the two-stage plug-in tracks the normal
        # reference within [0.7, 1.3] on standard normal samples
        rng = np.random.default_rng(10)
        ref = 1.06 * 1000 ** -0.2
        hits = 0
        for _ in range(40):
            h = dpi_density_bandwidth(rng.standard_normal(1000))
            hits += 0.7 * ref <= h <= 1.3 * ref
        assert hits >= 37

    def test_scale_equivariance(self):
        rng = np.random.default_rng(3)
        x = rng.standard_normal(500)
        c = 3.7
        assert dpi_density_bandwidth(c * x) == pytest.approx(
            c * dpi_density_bandwidth(x), rel=1e-8)

    def test_translation_invariance(self):
        rng = np.random.default_rng(4)
        x = rng.standard_normal(500)
        assert dpi_density_bandwidth(x - 40.0) == pytest.approx(
            dpi_density_bandwidth(x), rel=1e-9)

    def test_bimodal_smaller_than_matched_normal_reference(self):
        rng = np.random.default_rng(5)
        wins = 0
        for _ in range(20):
            z = rng.standard_normal(1000)
            x = np.where(rng.random(1000) < 0.5, z - 3.0, z + 3.0)
            ref = 1.06 * float(np.std(x)) * 1000 ** -0.2
            wins += dpi_density_bandwidth(x) < ref
        assert wins >= 18

    def test_degenerate_sample(self):
        with pytest.raises(InvalidSampleError):
            dpi_density_bandwidth(np.zeros(100))

    def test_small_sample_falls_back(self):
        rng = np.random.default_rng(6)
        rep = BandwidthReport()
        h = dpi_density_bandwidth(rng.standard_normal(10), rep)
        assert h > 0 and rep.selector_used == "RuleOfThumb"


class TestRegressionPlugIn:
    def test_near_linear_data_gives_large_bandwidth(self):
        # curvature is undetectable on linear data, so the selector smooths
        # maximally; the fit-noise curvature passes the detection test in a
        # minority of draws (oracle-measured ~20%), hence majority asserts
        rng = np.random.default_rng(7)
        hs = []
        for _ in range(20):
            x = rng.uniform(0, 1, 500)
            y = 2.0 * x + 1.0 + rng.normal(0, 0.01, 500)
            hs.append(dpi_regression_bandwidth(x, y))
        hs = np.array(hs)
        assert np.median(hs) >= 0.5
        assert (hs >= 0.5).mean() >= 0.6

    def test_higher_curvature_gives_smaller_bandwidth(self):
        rng = np.random.default_rng(8)
        wins = 0
        for _ in range(15):
            x1 = rng.uniform(0, 1, 500)
            h_fast = dpi_regression_bandwidth(x1, np.sin(8 * x1) + rng.normal(0, 0.1, 500))
            x2 = rng.uniform(0, 1, 500)
            h_slow = dpi_regression_bandwidth(x2, np.sin(2 * x2) + rng.normal(0, 0.1, 500))
            wins += h_fast < h_slow
        assert wins >= 13

    def test_constant_covariate_falls_back(self):
        rep = BandwidthReport()
        h = dpi_regression_bandwidth(np.full(100, 2.0), np.random.default_rng(0).normal(size=100))
        dpi_regression_bandwidth(np.full(100, 2.0),
                                 np.random.default_rng(0).normal(size=100), rep)
        assert h > 0
        assert rep.selector_used == "RuleOfThumb"

    def test_positive_and_capped_by_span(self):
        rng = np.random.default_rng(9)
        for _ in range(10):
            x = rng.uniform(-3, 5, 400)
            y = np.sin(x) + 0.2 * rng.standard_normal(400)
            h = dpi_regression_bandwidth(x, y)
            assert 0 < h <= (x.max() - x.min()) + 1e-12


class TestAdaptiveBandwidths:
    def test_two_symmetric_points(self):
        out = adaptive_bandwidths(np.array([-1.0, 1.0]), 0.5)
        np.testing.assert_allclose(out, [0.5, 0.5], rtol=1e-12)

    def test_geometric_mean_identity(self):
        rng = np.random.default_rng(11)
        for _ in range(5):
            r = rng.standard_normal(200)
            h_r = 0.3
            out = adaptive_bandwidths(r, h_r)
            log_mean = np.mean(np.log(out / h_r))
            assert abs(log_mean) <= 1e-10

    def test_tail_points_get_wider_kernels(self):
        rng = np.random.default_rng(12)
        r = np.exp(rng.standard_normal(500))  # lognormal: heavy right tail
        h_r = dpi_density_bandwidth(r)
        out = adaptive_bandwidths(r, h_r)
        tail = out[r > np.quantile(r, 0.95)]
        modal = out[(r > np.quantile(r, 0.3)) & (r < np.quantile(r, 0.6))]
        assert tail.mean() > 1.5 * modal.mean()

    def test_all_positive(self):
        rng = np.random.default_rng(13)
        out = adaptive_bandwidths(rng.standard_normal(100), 0.2)
        assert np.all(out > 0) and np.all(np.isfinite(out))

    def test_invalid_pilot(self):
        with pytest.raises(InvalidSampleError):
            adaptive_bandwidths(np.array([0.0, 1.0]), 0.0)


def test_udpi_runtime_at_n2000():
    rng = np.random.default_rng(14)
    x = rng.uniform(0, 1, 2000)
    y = np.sin(2 * math.pi * x) + 0.3 * rng.standard_normal(2000)
    # warm any jitted helpers before timing
    dpi_density_bandwidth(rng.standard_normal(100))
    t0 = time.perf_counter()
    h_reg = dpi_regression_bandwidth(x, y)
    h_den = dpi_density_bandwidth(y)
    elapsed = time.perf_counter() - t0
    assert h_reg > 0 and h_den > 0
    assert elapsed < 1.0
