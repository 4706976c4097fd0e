import math

import numpy as np
import pytest

from dear.errors import InsufficientDataError, InvalidSampleError
from dear.tseries import (ArFit, acf, chisq_cdf, fit_ar_ls, ljung_box,
                          select_order, spectral_radius)

from oracles import chisq_cdf_quadrature, simulate_ar


class TestAcf:
    def test_lag_zero_is_one(self):
        rng = np.random.default_rng(0)
        assert acf(rng.standard_normal(50), 3)[0] == 1.0

    def test_iid_noise_is_small(self):
        rng = np.random.default_rng(1)
        rho = acf(rng.standard_normal(10_000), 5)
        assert np.all(np.abs(rho[1:]) < 0.03)

    def test_ar1_matches_theory(self):
        rng = np.random.default_rng(2)
        u = simulate_ar([0.6], 10_000, rng)
        rho = acf(u, 3)
        for k in (1, 2, 3):
            assert rho[k] == pytest.approx(0.6 ** k, abs=0.05)

    def test_zero_variance_rejected(self):
        with pytest.raises(InvalidSampleError):
            acf(np.full(100, 1.5), 2)

    def test_short_series_rejected(self):
        with pytest.raises(InsufficientDataError):
            acf(np.arange(5.0), 5)


class TestFitArLs:
    def test_noiseless_recursion_exact(self):
        u = np.empty(50)
        u[0] = 1.0
        for t in range(1, 50):
            u[t] = 0.5 * u[t - 1]
        fit = fit_ar_ls(u, 1)
        assert fit.coef[0] == pytest.approx(0.5, abs=1e-12)

    def test_ar1_monte_carlo(self):
        rng = np.random.default_rng(3)
        hits = 0
        for _ in range(30):
            u = simulate_ar([0.6], 5000, rng, innovation_sd=0.1)
            hits += 0.55 <= fit_ar_ls(u, 1).coef[0] <= 0.65
        assert hits >= 28

    def test_ar2_monte_carlo(self):
        rng = np.random.default_rng(4)
        hits = 0
        for _ in range(30):
            u = simulate_ar([0.5, -0.3], 5000, rng)
            coef = fit_ar_ls(u, 2).coef
            hits += abs(coef[0] - 0.5) <= 0.05 and abs(coef[1] + 0.3) <= 0.05
        assert hits >= 28

    def test_residuals_orthogonal_to_lags(self):
        rng = np.random.default_rng(5)
        u = simulate_ar([0.4, 0.2], 3000, rng)
        fit = fit_ar_ls(u, 2)
        y = u[2:]
        resid = y - (fit.coef[0] * u[1:-1] + fit.coef[1] * u[:-2])
        assert abs(resid @ u[1:-1]) < 1e-8 * u.size
        assert abs(resid @ u[:-2]) < 1e-8 * u.size

    def test_order_zero_identity_model(self):
        fit = fit_ar_ls(np.arange(20.0), 0)
        assert fit.order == 0 and fit.coef.size == 0
        assert fit.predict_next(np.array([1.0])) == 0.0

    def test_too_short_rejected(self):
        with pytest.raises(InsufficientDataError):
            fit_ar_ls(np.arange(5.0), 2)

    def test_nonstationary_warns(self):
        rng = np.random.default_rng(6)
        u = np.empty(300)
        u[0] = 0.1
        for t in range(1, 300):  # mildly explosive recursion
            u[t] = 1.05 * u[t - 1] + 1e-6 * rng.standard_normal()
        with pytest.warns(UserWarning, match="non-stationary"):
            fit = fit_ar_ls(u, 1)
        assert spectral_radius(fit) >= 1.0


class TestSelectOrder:
    def test_white_noise_picks_zero(self):
        rng = np.random.default_rng(7)
        hits = sum(select_order(rng.standard_normal(2000), 5) == 0 for _ in range(30))
        assert hits >= 27  # >= 90 percent of seeds

    def test_ar1_picks_one(self):
        rng = np.random.default_rng(8)
        hits = sum(select_order(simulate_ar([0.6], 2000, rng), 5) == 1 for _ in range(30))
        assert hits >= 24  # >= 80 percent of seeds

    def test_ar2_picks_two(self):
        rng = np.random.default_rng(9)
        hits = sum(select_order(simulate_ar([0.5, -0.3], 2000, rng), 5) == 2
                   for _ in range(30))
        assert hits >= 24

    def test_short_series_rejected(self):
        with pytest.raises(InsufficientDataError):
            select_order(np.arange(30.0), 5)

    def test_unknown_criterion(self):
        with pytest.raises(ValueError):
            select_order(np.random.default_rng(0).standard_normal(200), 3, "cp")


class TestLjungBox:
    def test_zero_acf_gives_zero_statistic(self):
        # lag-1 and lag-2 sample autocovariances vanish identically here
        x = np.array([1.0, 0.0, 0.0, 0.0, -1.0])
        res = ljung_box(x, 2, 0.05)
        assert res.statistic == pytest.approx(0.0, abs=1e-15)
        assert res.p_value == pytest.approx(1.0)
        assert not res.rejected

    def test_formula_and_tail(self):
        # spot-check the arithmetic the test statistic is defined by:
        # n=100, rho1=0.3 -> Q = 100*102*0.09/99, p ~ 0.00233, rejected
        q = 100 * 102 * 0.09 / 99
        assert q == pytest.approx(9.272727272727273, rel=1e-12)
        p = 1.0 - chisq_cdf(q, 1)
        assert p == pytest.approx(0.002326, abs=2e-6)
        assert p < 0.05

    def test_statistic_matches_acf_composition(self):
        rng = np.random.default_rng(10)
        x = simulate_ar([0.3], 400, rng)
        res = ljung_box(x, 3, 0.05)
        rho = acf(x, 3)
        n = x.size
        q = n * (n + 2) * sum(rho[k] ** 2 / (n - k) for k in (1, 2, 3))
        assert res.statistic == pytest.approx(q, rel=1e-12)
        assert res.p_value == pytest.approx(1.0 - chisq_cdf_quadrature(q, 3), abs=1e-9)

    def test_affine_invariance(self):
        rng = np.random.default_rng(11)
        x = simulate_ar([0.4], 300, rng)
        a = ljung_box(x, 2, 0.05)
        b = ljung_box(5.0 * x - 7.0, 2, 0.05)
        assert a.statistic == pytest.approx(b.statistic, rel=1e-10)

    def test_calibration_quick(self):
        rng = np.random.default_rng(12)
        rejections = sum(ljung_box(rng.standard_normal(500), 1, 0.05).rejected
                         for _ in range(200))
        assert 0.02 <= rejections / 200 <= 0.08


class TestChisqCdf:
    def test_at_zero(self):
        for df in (1, 2, 5):
            assert chisq_cdf(0.0, df) == 0.0

    def test_df2_closed_form(self):
        assert chisq_cdf(2.0, 2) == pytest.approx(1.0 - math.exp(-1.0), abs=1e-12)

    def test_familiar_95_point(self):
        assert chisq_cdf(3.84, 1) == pytest.approx(0.9500, abs=5e-5)

    def test_quadrature_oracle_agreement(self):
        rng = np.random.default_rng(13)
        for _ in range(60):
            df = int(rng.integers(1, 12))
            x = float(rng.uniform(0, 4 * df + 5))
            assert chisq_cdf(x, df) == pytest.approx(
                chisq_cdf_quadrature(x, df), abs=1e-10)

    def test_monotone_and_bounded(self):
        xs = np.linspace(0, 40, 400)
        vals = np.array([chisq_cdf(float(x), 3) for x in xs])
        assert np.all(np.diff(vals) >= -1e-15)
        assert np.all((vals >= 0) & (vals < 1.0 + 1e-15))

    def test_bad_df(self):
        with pytest.raises(ValueError):
            chisq_cdf(1.0, 0)


def test_arfit_validation():
    with pytest.raises(ValueError):
        ArFit(2, np.array([0.5]), 1.0)
    fit = ArFit(2, np.array([0.5, -0.3]), 1.0)
    assert fit.predict_next(np.array([1.0, 2.0])) == pytest.approx(0.5 - 0.6)
    with pytest.raises(InsufficientDataError):
        fit.predict_next(np.array([1.0]))
