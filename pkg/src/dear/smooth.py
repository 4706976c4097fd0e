"""Conditional mean and variance smoothers.

Nadaraya-Watson and local linear regression under additive-multiplicative
kernel weights, with a density-threshold fallback from local linear to NW
in sparse regions and a ridge retry for near-singular local designs.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from enum import Enum

import numpy as np

from . import _backend
from .errors import InsufficientDataError, SparsityError
from .kernels import KernelConfig

__all__ = [
    "SmootherMethod",
    "SmootherFit",
    "PreparedWeights",
    "weight_matrix",
    "prepare_weights",
    "nw_weights",
    "nw_mean",
    "local_linear_mean",
    "input_density",
    "variance_smoother",
    "predict",
    "predict_prepared",
    "predict_from_weights",
]

_EFFECTIVE_WEIGHT = 1e-12  # weights above this count toward the local sample size
_RIDGE_REL = 1e-8
_VAR_REL_FLOOR = 0.2  # variance estimates below this fraction of the local average are artifacts


class SmootherMethod(Enum):
    NADARAYA_WATSON = "nw"
    LOCAL_LINEAR = "ll"


@dataclass(frozen=True)
class SmootherFit:
    """Immutable memory-based smoother: training data plus kernel config.

    sparsity_threshold: queries whose input density falls below it are
    answered by Nadaraya-Watson regardless of method. clip_min, when set,
    floors predictions (used by variance fits).
    """

    x: np.ndarray
    y: np.ndarray
    cfg: KernelConfig
    method: SmootherMethod = SmootherMethod.LOCAL_LINEAR
    sparsity_threshold: float = 0.0
    clip_min: float | None = None

    def __post_init__(self):
        x = np.ascontiguousarray(np.atleast_2d(np.asarray(self.x, dtype=float)))
        if x.shape[0] == 1 and x.shape[1] != self.cfg.dim:
            x = x.T
        y = np.ascontiguousarray(np.asarray(self.y, dtype=float).ravel())
        if x.shape[0] != y.shape[0]:
            raise InsufficientDataError(
                f"covariates ({x.shape[0]}) and responses ({y.shape[0]}) differ in length")
        if x.shape[0] == 0:
            raise InsufficientDataError("empty training sample")
        if x.shape[1] != self.cfg.dim:
            raise InsufficientDataError(
                f"x has {x.shape[1]} columns but config declares {self.cfg.dim}")
        if self.sparsity_threshold < 0:
            raise ValueError("sparsity threshold must be >= 0")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)

    @property
    def n(self) -> int:
        return self.x.shape[0]

    def with_response(self, y) -> "SmootherFit":
        """Same covariates/kernels, new responses (keeps weight caches valid)."""
        return replace(self, y=np.asarray(y, dtype=float))


def _as_queries(x, d):
    q = np.atleast_2d(np.asarray(x, dtype=float))
    if q.shape[1] != d:
        if q.shape[0] == d and q.shape[1] != d:
            q = q.T
        else:
            raise ValueError(f"query has {q.shape[1]} columns, expected {d}")
    return np.ascontiguousarray(q)


def weight_matrix(fit: SmootherFit, xq) -> np.ndarray:
    """Raw (unnormalized) AMK weights of every training point at each query row."""
    xq = _as_queries(xq, fit.cfg.dim)
    kinds, conc, log_norm, flat, offsets = fit.cfg.backend_arrays()
    return _backend.amk_weight_matrix(xq, fit.x, kinds, conc, log_norm, flat, offsets)


def nw_weights(x, fit: SmootherFit) -> np.ndarray:
    """Normalized kernel weights at a single query; they sum to one."""
    w = weight_matrix(fit, x)[0]
    total = w.sum()
    if total <= 0.0:
        raise SparsityError("all kernel weights underflowed at this query")
    return w / total


def nw_mean(x, fit: SmootherFit) -> float:
    """Kernel-weighted average of the training responses."""
    return float(nw_weights(x, fit) @ fit.y)


def input_density(x, fit: SmootherFit) -> float:
    """Mean raw kernel mass at the query; compared against the sparsity threshold."""
    return float(weight_matrix(fit, x)[0].mean())


def _ll_solve(a, b, attempt):
    """Batch-solve the weighted normal equations with a ridge retry.

    Rows outside `attempt` are skipped. Returns (solutions, ok) where ok
    marks rows whose (possibly ridged) solve produced a trustworthy result.
    """
    q_n, k = b.shape
    beta = np.full((q_n, k), np.nan)
    ok = np.zeros(q_n, dtype=bool)
    todo = attempt.copy()
    eye = np.eye(k)
    for ridge in (0.0, 1.0):
        if not todo.any():
            break
        idx = np.flatnonzero(todo)
        a_try = a[idx]
        if ridge:
            lam = _RIDGE_REL * np.trace(a_try, axis1=1, axis2=2) / k
            lam = np.maximum(lam, np.finfo(float).tiny)
            a_try = a_try + lam[:, None, None] * eye
        try:
            sol = np.linalg.solve(a_try, b[idx][..., None])[..., 0]
        except np.linalg.LinAlgError:
            sol = np.full((idx.size, k), np.nan)
            for i in range(idx.size):
                try:
                    sol[i] = np.linalg.solve(a_try[i], b[idx[i]])
                except np.linalg.LinAlgError:
                    pass
        resid = np.abs(np.einsum("qij,qj->qi", a_try, sol) - b[idx]).max(axis=1)
        scale = np.abs(b[idx]).max(axis=1) + np.abs(a_try).max(axis=(1, 2)) + 1.0
        good = np.isfinite(sol).all(axis=1) & (resid <= 1e-8 * scale)
        beta[idx[good]] = sol[good]
        ok[idx[good]] = True
        todo[idx[good]] = False
    return beta, ok


class PreparedWeights:
    """Response-independent batch state for one (training X, query X) pair.

    Holds the normalized weight rows, density/effective-sample diagnostics
    and the local-linear moment matrices, so repeated predictions with new
    responses (the calibration loop) cost two matmuls and a batched solve.
    """

    __slots__ = ("xt", "xq", "wn", "valid", "dens", "eff", "a")

    def __init__(self, fit: "SmootherFit", w_raw: np.ndarray, xq: np.ndarray):
        xt = fit.x
        d = xt.shape[1]
        totals = w_raw.sum(axis=1)
        self.xt = xt
        self.xq = xq
        self.valid = totals > 0.0
        self.dens = w_raw.mean(axis=1)
        safe = np.where(self.valid, totals, 1.0)
        self.wn = w_raw / safe[:, None]
        self.eff = (self.wn > _EFFECTIVE_WEIGHT).sum(axis=1)
        m1 = self.wn @ xt
        c1 = m1 - xq
        a = np.empty((xq.shape[0], d + 1, d + 1))
        a[:, 0, 0] = 1.0
        a[:, 0, 1:] = c1
        a[:, 1:, 0] = c1
        for j in range(d):
            for k in range(j, d):
                m2 = self.wn @ (xt[:, j] * xt[:, k])
                cjk = (m2 - xq[:, j] * m1[:, k] - xq[:, k] * m1[:, j]
                       + xq[:, j] * xq[:, k])
                a[:, j + 1, k + 1] = cjk
                a[:, k + 1, j + 1] = cjk
        self.a = a


def prepare_weights(fit: SmootherFit, xq, w_raw=None) -> PreparedWeights:
    """Precompute the response-independent batch state for query rows."""
    xq = _as_queries(xq, fit.cfg.dim)
    if w_raw is None:
        w_raw = weight_matrix(fit, xq)
    return PreparedWeights(fit, w_raw, xq)


def predict_prepared(fit: SmootherFit, prep: PreparedWeights) -> np.ndarray:
    """Batch prediction using precomputed weights (fit.y may have changed).

    Full policy: local linear where the region is dense enough and the
    local design solvable, Nadaraya-Watson otherwise; variance fits are
    pulled up smoothly toward the NW value when the local-linear estimate
    collapses, then floored at clip_min. Rows whose weights all underflowed
    yield NaN.
    """
    y = fit.y
    nw = prep.wn @ y
    est = nw.copy()
    if fit.method is SmootherMethod.LOCAL_LINEAR:
        attempt = (prep.valid & (prep.dens >= fit.sparsity_threshold)
                   & (prep.eff >= fit.cfg.dim + 2))
        if attempt.any():
            r0 = nw
            r1 = prep.wn @ (prep.xt * y[:, None])
            b = np.empty((prep.xq.shape[0], fit.cfg.dim + 1))
            b[:, 0] = r0
            b[:, 1:] = r1 - prep.xq * r0[:, None]
            beta, ok = _ll_solve(prep.a, b, attempt)
            est[ok] = beta[ok, 0]
    if fit.clip_min is not None:
        # variance fits: local-linear extrapolation respects no positivity
        # constraint, so estimates far below the local kernel average (or
        # non-positive) are artifacts. A soft maximum against a fraction of
        # the NW value keeps the estimate positive while staying smooth in
        # the responses (hard branches feed limit cycles into the
        # calibration loop); the absolute floor still applies.
        flo = _VAR_REL_FLOOR * nw
        s = 0.1 * np.maximum(flo, np.finfo(float).tiny)
        est = 0.5 * (est + flo + np.sqrt((est - flo) ** 2 + s * s))
        np.maximum(est, fit.clip_min, out=est)
    est[~prep.valid] = np.nan
    return est


def predict_from_weights(fit: SmootherFit, w_raw: np.ndarray, xq) -> np.ndarray:
    """Batch prediction from a precomputed raw weight matrix."""
    xq = _as_queries(xq, fit.cfg.dim)
    return predict_prepared(fit, PreparedWeights(fit, w_raw, xq))


def predict(fit: SmootherFit, xq) -> np.ndarray:
    """Batch prediction at query rows (computes the weight matrix)."""
    xq = _as_queries(xq, fit.cfg.dim)
    return predict_from_weights(fit, weight_matrix(fit, xq), xq)


def local_linear_mean(x, fit: SmootherFit) -> float:
    """Local linear estimate at one query point.

    Reproduces affine responses exactly. Unlike nw_mean the estimate is a
    non-convex weighting and is NOT confined to the response range (that is
    what removes boundary/asymmetry bias). Raises SparsityError when the
    effective local sample cannot support the (d+1)-parameter fit, which
    callers treat as the NW-fallback signal.
    """
    xq = _as_queries(x, fit.cfg.dim)
    prep = prepare_weights(fit, xq)
    if not prep.valid[0]:
        raise SparsityError("all kernel weights underflowed at this query")
    if int(prep.eff[0]) < fit.cfg.dim + 2:
        raise SparsityError("effective local sample too small for local linear")
    y = fit.y
    r0 = prep.wn @ y
    r1 = prep.wn @ (prep.xt * y[:, None])
    b = np.empty((1, fit.cfg.dim + 1))
    b[:, 0] = r0
    b[:, 1:] = r1 - prep.xq * r0[:, None]
    beta, ok = _ll_solve(prep.a, b, np.array([True]))
    if not ok[0]:
        raise SparsityError("local design singular even after ridge retry")
    return float(beta[0, 0])


def variance_smoother(fit_mean: SmootherFit, cfg: KernelConfig | None = None,
                      floor: float | None = None) -> SmootherFit:
    """Smoother for the conditional variance from squared in-sample residuals.

    Predictions are floored at 1e-8 * var(y) unless an explicit floor is
    given; collapsing local-linear values are blended toward the NW estimate
    (see predict_prepared) so the variance surface stays usable as a
    divisor.
    """
    m_hat = predict(fit_mean, fit_mean.x)
    z = (fit_mean.y - m_hat) ** 2
    if floor is None:
        floor = 1e-8 * float(np.var(fit_mean.y))
    floor = max(floor, np.finfo(float).tiny)
    return SmootherFit(fit_mean.x, z, cfg or fit_mean.cfg, fit_mean.method,
                       fit_mean.sparsity_threshold, clip_min=floor)
