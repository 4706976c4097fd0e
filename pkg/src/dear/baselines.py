"""Comparison methods: conventional conditional kernel density (AMK), its
local-linear mean (AML), the persistence forecast, and exponential-forgetting
kernel weights (KDES)."""

from __future__ import annotations

import numpy as np

from .bandwidth import dpi_density_bandwidth
from .density import PredictiveDensity
from .errors import InsufficientDataError, SparsityError
from .smooth import SmootherFit, local_linear_mean, nw_weights, weight_matrix

__all__ = ["amk_density", "aml_mean", "persistence", "kdes_weights"]


def amk_density(x, fit: SmootherFit, h_y: float | None = None) -> PredictiveDensity:
    """Conventional conditional density: kernels on the observed responses,
    weighted by the normalized covariate kernels at the query.

    The response bandwidth defaults to the density plug-in on the training
    responses. The mixture mean equals the Nadaraya-Watson mean exactly.
    """
    w = nw_weights(x, fit)  # raises SparsityError when the region is empty
    if h_y is None:
        h_y = dpi_density_bandwidth(fit.y)
    return PredictiveDensity(centers=fit.y.copy(),
                             bandwidths=np.full(fit.n, float(h_y)),
                             location=0.0, scale=1.0, weights=w)


def aml_mean(x, fit: SmootherFit) -> float:
    """Local-linear conditional mean under the same kernel weighting."""
    return local_linear_mean(x, fit)


def persistence(history) -> float:
    """Forecast equals the last observed value."""
    h = np.asarray(history, dtype=float).ravel()
    if h.size == 0:
        raise InsufficientDataError("persistence needs at least one observation")
    return float(h[-1])


def kdes_weights(x, fit: SmootherFit, lam: float, t_now: int | None = None) -> np.ndarray:
    """Kernel weights decayed by the forgetting factor lam^(age).

    Training rows are ordered oldest-first; the most recent row has age one
    at forecast time. lam = 1 reproduces the plain normalized kernel weights
    exactly.
    """
    if not 0.0 < lam <= 1.0:
        raise ValueError(f"forgetting factor must be in (0, 1], got {lam!r}")
    if t_now is None:
        t_now = fit.n
    w = weight_matrix(fit, x)[0]
    ages = t_now - np.arange(fit.n)
    if lam < 1.0:
        w = w * lam ** ages
    total = w.sum()
    if total <= 0.0:
        raise SparsityError("all forgetting-weighted kernel weights underflowed")
    return w / total
