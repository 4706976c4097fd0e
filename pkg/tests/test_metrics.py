import math

import numpy as np
import pytest

from dear.density import PredictiveDensity
from dear.metrics import (INTERVAL_PAIRS, QUANTILE_LEVELS, coverage_dev, crps,
                          evaluate, pinaw, rmse)

from oracles import crps_gaussian_mixture


class TestRmse:
    def test_identical(self):
        assert rmse([1.0, 2.0, 3.0], [1.0, 2.0, 3.0]) == 0.0

    def test_unit_offset(self):
        a = np.arange(10.0)
        assert rmse(a + 1.0, a) == pytest.approx(1.0)

    def test_hand_computed(self):
        assert rmse([0.0, 0.0], [3.0, 4.0]) == pytest.approx(math.sqrt(12.5), rel=1e-12)
        assert rmse([0.0, 0.0], [3.0, 4.0]) == pytest.approx(3.5355, abs=1e-4)

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            rmse([1.0], [1.0, 2.0])


def _mixture_and_params(rng, n=None):
    n = n or int(rng.integers(1, 8))
    d = PredictiveDensity(
        centers=rng.normal(0, 1.5, n),
        bandwidths=rng.uniform(0.1, 1.2, n),
        location=float(rng.normal(0, 2)),
        scale=float(rng.uniform(0.4, 3.0)),
        weights=rng.uniform(0.2, 1.0, n))
    means = d.location + d.scale * d.centers
    sds = d.scale * d.bandwidths
    return d, d.weights, means, sds


class TestCrps:
    def test_point_mass_limit(self):
        for dist in (0.7, 2.5):
            d = PredictiveDensity([0.0], [1e-6], 3.0, 1.0)
            assert crps(d, 3.0 + dist) == pytest.approx(dist, abs=1e-3)

    def test_standard_gaussian_closed_form(self):
        d = PredictiveDensity([0.0], [1.0], 0.0, 1.0)
        expected = 2.0 / math.sqrt(2.0 * math.pi) - 1.0 / math.sqrt(math.pi)
        assert crps(d, 0.0) == pytest.approx(expected, abs=1e-7)
        assert crps(d, 0.0) == pytest.approx(0.233694, abs=1e-6)

    def test_matches_mixture_oracle(self):
        rng = np.random.default_rng(0)
        for _ in range(100):
            d, w, means, sds = _mixture_and_params(rng)
            y = float(rng.normal(d.location, 2.0 * d.scale))
            assert crps(d, y) == pytest.approx(
                crps_gaussian_mixture(w, means, sds, y), abs=1e-6)

    def test_minimized_at_median(self):
        rng = np.random.default_rng(1)
        d, *_ = _mixture_and_params(rng, n=4)
        med = d.quantile(0.5)
        grid = np.linspace(med - 3 * d.scale, med + 3 * d.scale, 41)
        vals = [crps(d, float(y)) for y in grid]
        argmin = grid[int(np.argmin(vals))]
        # interior minimum near the median
        assert abs(argmin - med) < 0.35 * d.scale
        assert vals[0] > min(vals) and vals[-1] > min(vals)

    def test_nonnegative_and_translation_invariant(self):
        rng = np.random.default_rng(2)
        d, w, means, sds = _mixture_and_params(rng, n=3)
        y = float(rng.normal())
        base = crps(d, y)
        assert base >= 0.0
        shifted = PredictiveDensity(d.centers, d.bandwidths, d.location + 11.5,
                                    d.scale, d.weights)
        assert crps(shifted, y + 11.5) == pytest.approx(base, abs=1e-7)


class TestIntervalMetrics:
    def test_coverage_dev_all_covered(self):
        iv = [(0.0, 1.0)] * 10
        assert coverage_dev(iv, np.full(10, 0.5), 0.9) == pytest.approx(0.1)

    def test_coverage_dev_exact(self):
        iv = [(0.0, 1.0)] * 10
        a = np.array([0.5] * 9 + [5.0])
        assert coverage_dev(iv, a, 0.9) == pytest.approx(0.0, abs=1e-12)

    def test_coverage_dev_none_covered(self):
        iv = [(0.0, 1.0)] * 4
        assert coverage_dev(iv, np.full(4, 9.0), 0.5) == pytest.approx(0.5)

    def test_dev_bounds(self):
        rng = np.random.default_rng(3)
        for _ in range(20):
            nominal = float(rng.uniform(0.05, 0.95))
            iv = np.column_stack([rng.normal(size=30), rng.normal(size=30) + 2.0])
            dev = coverage_dev(iv, rng.normal(size=30), nominal)
            assert 0.0 <= dev <= max(nominal, 1.0 - nominal) + 1e-12

    def test_pinaw_constant_width(self):
        iv = [(0.0, 0.5)] * 8
        assert pinaw(iv, 2.0) == pytest.approx(0.25)

    def test_pinaw_zero_width(self):
        assert pinaw([(1.0, 1.0)] * 3, 5.0) == 0.0

    def test_pinaw_mean(self):
        assert pinaw([(0.0, 1.0), (0.0, 3.0)], 2.0) == pytest.approx(1.0)

    def test_pinaw_bad_range(self):
        with pytest.raises(ValueError):
            pinaw([(0.0, 1.0)], 0.0)


class _Fc:
    def __init__(self, mean, density=None):
        self.mean = mean
        self.density = density


class TestEvaluate:
    def test_levels_structure(self):
        assert len(QUANTILE_LEVELS) == 38
        assert 0.5 not in QUANTILE_LEVELS
        assert len(INTERVAL_PAIRS) == 19
        for lo, hi in INTERVAL_PAIRS:
            assert lo + hi == pytest.approx(1.0)

    def test_perfect_point_forecasts(self):
        rng = np.random.default_rng(4)
        actual = rng.normal(size=25)
        fcs = [_Fc(float(y), PredictiveDensity([0.0], [1e-7], float(y), 1.0))
               for y in actual]
        rep = evaluate(fcs, actual)
        assert rep.rmse == pytest.approx(0.0, abs=1e-12)
        assert rep.apinaw == pytest.approx(0.0, abs=1e-4)
        assert rep.crps_mean < 1e-6

    def test_widening_scales_apinaw(self):
        rng = np.random.default_rng(5)
        actual = rng.normal(size=20)
        def reports(width):
            fcs = [_Fc(float(y), PredictiveDensity([0.0], [width], float(y), 1.0))
                   for y in actual]
            return evaluate(fcs, actual, target_range=4.0)
        r1, r3 = reports(0.5), reports(1.5)
        assert r3.apinaw == pytest.approx(3.0 * r1.apinaw, rel=1e-3)

    def test_mean_only_methods_get_nan_density_metrics(self):
        actual = np.arange(5.0)
        rep = evaluate([_Fc(float(y)) for y in actual], actual)
        assert rep.rmse == 0.0
        assert math.isnan(rep.crps_mean) and math.isnan(rep.adev)

    def test_clamped_quantiles(self):
        rng = np.random.default_rng(6)
        actual = rng.normal(size=10)
        fcs = [_Fc(float(y), PredictiveDensity([0.0], [1.0], float(y), 1.0))
               for y in actual]
        rep = evaluate(fcs, actual, clamp_bounds=(-0.1, 0.1))
        # every interval is inside the clamp box, so widths <= 0.2
        for _, _, pw in rep.per_level:
            assert pw <= 0.2 / rep.target_range + 1e-12

    def test_calibrated_forecasts_have_small_adev(self):
        rng = np.random.default_rng(7)
        n = 500
        actual = rng.standard_normal(n)
        fcs = [_Fc(0.0, PredictiveDensity([0.0], [1.0], 0.0, 1.0)) for _ in range(n)]
        rep = evaluate(fcs, actual)
        assert rep.adev < 0.05

    def test_averages_match_levels(self):
        rng = np.random.default_rng(8)
        actual = rng.normal(size=15)
        fcs = [_Fc(float(y) + 0.1, PredictiveDensity([0.0], [0.8], float(y), 1.2))
               for y in actual]
        rep = evaluate(fcs, actual)
        assert rep.adev == pytest.approx(np.mean([d for _, d, _ in rep.per_level]))
        assert rep.apinaw == pytest.approx(np.mean([p for _, _, p in rep.per_level]))
        assert rep.n_test == 15

    def test_report_serialization(self):
        actual = np.arange(4.0)
        fcs = [_Fc(float(y), PredictiveDensity([0.0], [0.5], float(y), 1.0))
               for y in actual]
        rep = evaluate(fcs, actual)
        text = rep.as_text()
        assert "rmse=" in text and "apinaw=" in text
        csv_rows = rep.as_csv().strip().splitlines()
        assert csv_rows[0] == "nominal,dev,pinaw"
        assert len(csv_rows) == 20  # header + 19 levels
