"""Predictive kernel-mixture densities: pdf, cdf, quantiles.

A PredictiveDensity is a location-scale Gaussian mixture: standardized
centers with per-center bandwidths (and optional per-center weights for
the conventional-estimator variant), shifted by `location` and stretched
by `scale`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _backend

__all__ = ["PredictiveDensity", "pdf", "cdf", "quantile", "gaussian_cdf"]

_SQRT2 = math.sqrt(2.0)


def gaussian_cdf(z: float) -> float:
    """Standard normal CDF via the complementary error function."""
    return 0.5 * math.erfc(-z / _SQRT2)


@dataclass(frozen=True)
class PredictiveDensity:
    """Location-scale Gaussian mixture supporting pdf/cdf/quantile queries."""

    centers: np.ndarray
    bandwidths: np.ndarray
    location: float = 0.0
    scale: float = 1.0
    weights: np.ndarray | None = None

    def __post_init__(self):
        c = np.ascontiguousarray(np.asarray(self.centers, dtype=float).ravel())
        b = np.asarray(self.bandwidths, dtype=float).ravel()
        if b.size == 1 and c.size > 1:
            b = np.full(c.size, float(b[0]))
        b = np.ascontiguousarray(b)
        if c.size == 0:
            raise ValueError("mixture needs at least one center")
        if c.size != b.size:
            raise ValueError("centers and bandwidths differ in length")
        if not np.all(b > 0):
            raise ValueError("bandwidths must be positive")
        if not self.scale > 0:
            raise ValueError("scale must be positive")
        if self.weights is None:
            w = np.full(c.size, 1.0 / c.size)
        else:
            w = np.asarray(self.weights, dtype=float).ravel()
            if w.size != c.size:
                raise ValueError("weights and centers differ in length")
            if np.any(w < 0) or w.sum() <= 0:
                raise ValueError("weights must be nonnegative with positive sum")
            w = np.ascontiguousarray(w / w.sum())
        object.__setattr__(self, "centers", c)
        object.__setattr__(self, "bandwidths", b)
        object.__setattr__(self, "weights", w)

    # standardized coordinate of a physical value
    def _z(self, y):
        return (np.asarray(y, dtype=float) - self.location) / self.scale

    def support(self, spread: float = 9.0):
        """Physical interval outside which pdf/cdf tails are negligible."""
        lo = float(np.min(self.centers - spread * self.bandwidths))
        hi = float(np.max(self.centers + spread * self.bandwidths))
        return (self.location + self.scale * lo, self.location + self.scale * hi)

    def mean(self) -> float:
        """Exact mixture mean (kernels are symmetric)."""
        return self.location + self.scale * float(self.weights @ self.centers)

    def pdf(self, y):
        return pdf(self, y)

    def cdf(self, y):
        return cdf(self, y)

    def quantile(self, q):
        return quantile(self, q)


def pdf(d: PredictiveDensity, y):
    """Density at y: mixture of Gaussian kernels over the standardized value."""
    scalar = np.isscalar(y)
    z = np.atleast_1d(d._z(y))
    out = _backend.gm_pdf(np.ascontiguousarray(z), d.centers, d.bandwidths,
                          d.weights) / d.scale
    return float(out[0]) if scalar else out


def cdf(d: PredictiveDensity, y):
    """Mixture of Gaussian CDFs; nondecreasing with limits 0 and 1."""
    scalar = np.isscalar(y)
    z = np.atleast_1d(d._z(y))
    out = _backend.gm_cdf(np.ascontiguousarray(z), d.centers, d.bandwidths,
                          d.weights)
    return float(out[0]) if scalar else out


def quantile(d: PredictiveDensity, q: float) -> float:
    """Bisection on the cdf until |cdf(result) - q| <= 1e-8."""
    if not 0.0 < q < 1.0:
        raise ValueError(f"quantile level must be in (0, 1), got {q!r}")
    lo, hi = d.support(spread=10.0)
    lo = min(lo, d.location - d.scale)
    hi = max(hi, d.location + d.scale)
    for _ in range(300):
        mid = 0.5 * (lo + hi)
        f = cdf(d, mid)
        if abs(f - q) <= 1e-8:
            return float(mid)
        if f < q:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 4.0 * np.finfo(float).eps * max(1.0, abs(lo), abs(hi)):
            break
    return float(0.5 * (lo + hi))
