"""The autocorrelation-aware conditional density estimator.

Fits the target model y_t = m(x_t) + sigma(x_t) u_t with AR(p) residuals by
the iterative calibration loop: estimate the AR coefficients from the
standardized residuals, strip the predictable residual part from the
targets, refit the mean and variance smoothers on the calibrated targets,
and stop once the AR coefficients settle and the one-step innovations pass
the autocorrelation test at every fitted lag. One-step-ahead forecasts
combine the smoothed mean with the AR correction and wrap the standardized
innovation pool into a location-scale kernel mixture.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .bandwidth import (BandwidthReport, dpi_density_bandwidth,
                        dpi_regression_bandwidth)
from .data import RunConfig, clamp
from .density import PredictiveDensity
from .errors import (InsufficientDataError, InsufficientHistoryError,
                     NumericalError)
from .kernels import KernelConfig, VariableKind, make_groups
from .smooth import (SmootherFit, SmootherMethod, predict, predict_prepared,
                     predict_from_weights, prepare_weights, weight_matrix)
from .tseries import ArFit, fit_ar_ls, ljung_box, select_order
from . import _backend

__all__ = ["DearModel", "Forecast", "fit", "fit_initial", "iterate",
           "conditional_mean", "forecast", "update", "save_model", "load_model"]

# standardized residuals beyond _U_SOFT_START are saturated smoothly toward
# _U_SOFT_START + _U_SOFT_SCALE: genuine unit-variance innovations almost
# never reach 6, so only variance-estimate artifacts are touched, and the
# smooth form keeps the calibration loop's fixed-point map free of the
# branch flips a hard clip would feed it
_U_SOFT_START = 6.0
_U_SOFT_SCALE = 3.0


def _soft_clip(u):
    u = np.asarray(u, dtype=float)
    out = u.copy()
    m = np.abs(u) > _U_SOFT_START
    if m.any():
        excess = (np.abs(u[m]) - _U_SOFT_START) / _U_SOFT_SCALE
        out[m] = np.sign(u[m]) * (_U_SOFT_START + _U_SOFT_SCALE * np.tanh(excess))
    return out


@dataclass(frozen=True)
class Forecast:
    """One-step-ahead forecast: clamped mean plus the predictive density."""

    mean: float
    density: PredictiveDensity
    clamped: bool
    sparse_fallback: bool = False


@dataclass(frozen=True)
class DearModel:
    """Fitted state: smoothers, AR coefficients and the innovation pool.

    Immutable; `update` returns a new model. raw_y mirrors the training
    window so cadence refits can rebuild everything from the raw targets.
    """

    mean_fit: SmootherFit
    sd_fit: SmootherFit
    ar: ArFit
    residuals: np.ndarray
    residual_bandwidths: np.ndarray
    u_history: np.ndarray
    raw_y: np.ndarray
    bandwidths: BandwidthReport
    iterations_run: int
    converged: bool
    cfg: RunConfig
    pilot_log_s: float
    pool_capacity: int
    u_valid: int
    updates_since_refit: int = 0
    warning: str = ""

    @property
    def order(self) -> int:
        return self.ar.order

    @property
    def window_len(self) -> int:
        return self.mean_fit.n

    @property
    def calibrated_targets(self) -> np.ndarray:
        """Targets with the predictable residual part stripped (the mean
        smoother's training responses)."""
        return self.mean_fit.y


def _regression_kernel_config(x, y, kinds, groups, anchors) -> KernelConfig:
    """Per-covariate plug-in bandwidths under the declared group structure."""
    d = x.shape[1]
    per_var = []
    for j in range(d):
        h = dpi_regression_bandwidth(x[:, j], y)
        per_var.append((kinds[j], h))
    groups = groups or make_groups(d, anchors)
    return KernelConfig(tuple(per_var), tuple(groups), tuple(anchors))


def _fit_initial_impl(x, y, kinds, cfg: RunConfig, groups, anchors):
    x = np.ascontiguousarray(np.atleast_2d(np.asarray(x, dtype=float)))
    if x.shape[0] == 1 and len(np.asarray(y).ravel()) != 1:
        x = x.T
    y = np.asarray(y, dtype=float).ravel()
    if y.size < cfg.min_window:
        raise InsufficientDataError(
            f"window of {y.size} rows is below the minimum {cfg.min_window}")
    mean_cfg = _regression_kernel_config(x, y, kinds, groups, anchors)
    mean_fit = SmootherFit(x, y, mean_cfg, SmootherMethod.LOCAL_LINEAR)
    prep_mean = prepare_weights(mean_fit, x)
    tau = cfg.tau if cfg.tau is not None else 1e-4 * float(prep_mean.dens.max())
    mean_fit = replace(mean_fit, sparsity_threshold=tau)
    m0 = predict_prepared(mean_fit, prep_mean)
    z = (y - m0) ** 2
    var_cfg = _regression_kernel_config(x, z, kinds, groups, anchors)
    floor = max(1e-8 * float(np.var(y)), np.finfo(float).tiny)
    sd_fit = SmootherFit(x, z, var_cfg, SmootherMethod.LOCAL_LINEAR,
                         sparsity_threshold=tau, clip_min=floor)
    return mean_fit, sd_fit, prep_mean


def fit_initial(x, y, kinds, cfg: RunConfig, groups=(), anchors=()):
    """Initial mean and variance smoothers on the raw window."""
    mean_fit, sd_fit, _ = _fit_initial_impl(x, y, kinds, cfg, groups, anchors)
    return mean_fit, sd_fit


def _ar_adjustment(u: np.ndarray, ar: ArFit) -> np.ndarray:
    """In-sample AR sums sum_k a_k u_{t-k}; unavailable lags count as zero."""
    adj = np.zeros(u.size)
    for k, a_k in enumerate(ar.coef, start=1):
        adj[k:] += a_k * u[:-k]
    return adj


def iterate(mean_fit: SmootherFit, sd_fit: SmootherFit, y, cfg: RunConfig,
            _prep_mean=None) -> DearModel:
    """Run the calibration loop from initial fits to a complete model."""
    x = mean_fit.x
    y = np.asarray(y, dtype=float).ravel()
    prep_mean = _prep_mean if _prep_mean is not None else prepare_weights(mean_fit, x)
    prep_var = prepare_weights(sd_fit, x)

    m = predict_prepared(mean_fit, prep_mean)
    sigma = np.sqrt(predict_prepared(sd_fit, prep_var))
    u = _soft_clip((y - m) / sigma)
    p = select_order(u, cfg.p_max)

    ar = ArFit(0, np.empty(0), float(u @ u) / max(u.size, 1))
    prev_coef = np.zeros(p)
    converged = False
    warning = ""
    iterations = 0
    r = u.copy()
    for _ in range(cfg.max_iterations):
        iterations += 1
        if p > 0:
            try:
                ar = fit_ar_ls(u, p)
            except NumericalError:
                # degenerate AR design: continue as the independent-residual model
                p, ar, warning = 0, ArFit(0, np.empty(0), ar.resid_var), "ar-fit-failed"
                prev_coef = np.zeros(0)
        adj = _ar_adjustment(u, ar)
        y_cal = y - sigma * adj
        mean_fit = mean_fit.with_response(y_cal)
        m = predict_prepared(mean_fit, prep_mean)
        sd_fit = sd_fit.with_response((y_cal - m) ** 2)
        sigma = np.sqrt(predict_prepared(sd_fit, prep_var))
        u = _soft_clip((y - m) / sigma)
        mu_cond = m + sigma * _ar_adjustment(u, ar)
        r = ((y - mu_cond) / sigma)[p:]
        delta = float(np.max(np.abs(ar.coef - prev_coef))) if p > 0 else 0.0
        prev_coef = ar.coef.copy()
        lb_ok = all(not ljung_box(r, k, cfg.alpha).rejected for k in range(1, p + 1))
        if delta < cfg.ar_tol and lb_ok:
            converged = True
            break

    report = BandwidthReport(
        per_variable_regression=[h for _, h in mean_fit.cfg.per_variable])
    h_r = dpi_density_bandwidth(r, report)
    # adaptive bandwidths share one pilot KDE evaluation with the update-time
    # scaling factor (the geometric mean of the pilot values)
    pilot = np.maximum(_backend.gm_pdf(r, r, np.full(r.size, h_r),
                                       np.full(r.size, 1.0 / r.size)), 1e-12)
    log_pilot = np.log(pilot)
    log_s = float(np.mean(log_pilot))
    r_bw = h_r * np.exp(-0.5 * (log_pilot - log_s))
    report.density_adaptive = r_bw
    return DearModel(
        mean_fit=mean_fit, sd_fit=sd_fit, ar=ar,
        residuals=r, residual_bandwidths=r_bw,
        u_history=u, raw_y=y, bandwidths=report,
        iterations_run=iterations, converged=converged, cfg=cfg,
        pilot_log_s=log_s,
        pool_capacity=r.size, u_valid=u.size, warning=warning)


def fit(x, y, kinds, cfg: RunConfig, groups=(), anchors=()) -> DearModel:
    """fit_initial + iterate in one call."""
    mean_fit, sd_fit, prep_mean = _fit_initial_impl(x, y, kinds, cfg, groups, anchors)
    return iterate(mean_fit, sd_fit, mean_fit.y, cfg, _prep_mean=prep_mean)


def _point_estimates(model: DearModel, x_next):
    """(smoothed mean, smoothed sd, sparse flag) at one query point."""
    xq = np.atleast_2d(np.asarray(x_next, dtype=float))
    w = weight_matrix(model.mean_fit, xq)
    sparse = float(w.mean()) < model.mean_fit.sparsity_threshold
    m = predict_from_weights(model.mean_fit, w, xq)[0]
    s2 = predict(model.sd_fit, xq)[0]
    if math.isnan(m) or math.isnan(s2):
        raise InsufficientDataError("query lies in an empty kernel region")
    return float(m), float(math.sqrt(s2)), bool(sparse)


def _lags_for_forecast(model: DearModel) -> np.ndarray:
    """Most-recent-first lag vector; gap-invalidated lags are zeroed."""
    p = model.order
    if p == 0:
        return np.empty(0)
    if model.u_history.size < p:
        raise InsufficientHistoryError(f"need {p} lagged residuals")
    lags = model.u_history[-p:][::-1].copy()
    if model.u_valid < p:
        lags[model.u_valid:] = 0.0
    return lags


def conditional_mean(model: DearModel, x, u_lags) -> float:
    """m(x) + sigma(x) * sum_k a_k u_lags[k-1] (lags most recent first)."""
    u_lags = np.asarray(u_lags, dtype=float).ravel()
    if u_lags.size < model.order:
        raise InsufficientHistoryError(
            f"need {model.order} lagged residuals, got {u_lags.size}")
    m, sigma, _ = _point_estimates(model, x)
    return m + sigma * model.ar.predict_next(u_lags)


def forecast(model: DearModel, x_next) -> Forecast:
    """One-step-ahead mean and predictive density at the next covariates."""
    m, sigma, sparse = _point_estimates(model, x_next)
    mu = m + sigma * model.ar.predict_next(_lags_for_forecast(model))
    mean_clamped = clamp(mu, model.cfg.clamp_lower, model.cfg.clamp_upper)
    dens = PredictiveDensity(model.residuals, model.residual_bandwidths,
                             location=mu, scale=sigma)
    return Forecast(mean=mean_clamped, density=dens,
                    clamped=(mean_clamped != mu), sparse_fallback=sparse)


def update(model: DearModel, x_new, y_new, gap: bool = False) -> DearModel:
    """Absorb one realized observation and slide the rolling window.

    Appends the realized standardized innovation and the calibrated target,
    drops the oldest row once at capacity, and re-runs the full fit every
    `cadence` updates. A `gap` resets lag validity: forecasts treat lagged
    residuals as unavailable until `order` fresh steps accumulate.
    """
    x_new = np.asarray(x_new, dtype=float).ravel()
    y_new = float(y_new)
    m, sigma, _ = _point_estimates(model, x_new)
    u_valid = 0 if gap else model.u_valid
    lags = model.u_history[-model.order:][::-1].copy() if model.order else np.empty(0)
    if model.order and u_valid < model.order:
        lags[u_valid:] = 0.0
    ar_term = model.ar.predict_next(lags) if model.order else 0.0
    mu = m + sigma * ar_term
    r_new = (y_new - mu) / sigma
    u_new = float(_soft_clip((y_new - m) / sigma))
    y_cal_new = y_new - sigma * ar_term

    capacity = model.cfg.window
    x_all = np.vstack([model.mean_fit.x, x_new[None, :]])
    y_cal = np.append(model.mean_fit.y, y_cal_new)
    z_all = np.append(model.sd_fit.y, (y_cal_new - m) ** 2)
    raw = np.append(model.raw_y, y_new)
    u_hist = np.append(model.u_history, u_new)
    if x_all.shape[0] > capacity:
        x_all, y_cal, z_all, raw, u_hist = (
            x_all[1:], y_cal[1:], z_all[1:], raw[1:], u_hist[1:])

    # adaptive bandwidth for the fresh residual from the pilot recorded at refit
    h_r = model.bandwidths.density_global
    g_new = float(_backend.gm_pdf(np.array([r_new]), model.residuals,
                                  np.full(model.residuals.size, h_r),
                                  np.full(model.residuals.size,
                                          1.0 / model.residuals.size))[0])
    g_new = max(g_new, 1e-12)
    bw_new = h_r * math.exp(-0.5 * (math.log(g_new) - model.pilot_log_s))
    pool = np.append(model.residuals, r_new)
    pool_bw = np.append(model.residual_bandwidths, bw_new)
    if pool.size > model.pool_capacity:
        pool, pool_bw = pool[1:], pool_bw[1:]

    new_model = replace(
        model,
        mean_fit=replace(model.mean_fit, x=x_all, y=y_cal),
        sd_fit=replace(model.sd_fit, x=x_all, y=z_all),
        residuals=pool, residual_bandwidths=pool_bw,
        u_history=u_hist, raw_y=raw,
        u_valid=min(u_valid + 1, u_hist.size),
        updates_since_refit=model.updates_since_refit + 1)

    if new_model.updates_since_refit >= model.cfg.cadence:
        new_model = _refit(new_model)
    return new_model


def _refit(model: DearModel) -> DearModel:
    """Cadence refit on the current raw window."""
    cfg = model.cfg
    kinds = model.mean_fit.cfg.kinds
    groups = model.mean_fit.cfg.groups
    anchors = model.mean_fit.cfg.anchors
    x = model.mean_fit.x
    y = model.raw_y
    if cfg.refit_bandwidths:
        mean_fit, sd_fit = fit_initial(x, y, kinds, cfg, groups, anchors)
    else:
        mean_fit = replace(model.mean_fit, y=y)
        floor = max(1e-8 * float(np.var(y)), np.finfo(float).tiny)
        m0 = predict(mean_fit, x)
        sd_fit = replace(model.sd_fit, y=(y - m0) ** 2, clip_min=floor)
    refitted = iterate(mean_fit, sd_fit, y, cfg)
    return replace(refitted, u_valid=min(model.u_valid, refitted.u_history.size))


# -- serialization -----------------------------------------------------------

_FORMAT_VERSION = 1


def _kernel_cfg_blob(cfg: KernelConfig):
    kinds = np.array([0 if k is VariableKind.LINEAR else 1 for k in cfg.kinds],
                     dtype=np.int64)
    flat = np.array([j for g in cfg.groups for j in g], dtype=np.int64)
    sizes = np.array([len(g) for g in cfg.groups], dtype=np.int64)
    anchors = np.array(cfg.anchors, dtype=np.int64)
    return kinds, cfg.bandwidths, flat, sizes, anchors


def _kernel_cfg_from_blob(kinds, bw, flat, sizes, anchors) -> KernelConfig:
    per_var = tuple(
        (VariableKind.CIRCULAR if k else VariableKind.LINEAR, float(h))
        for k, h in zip(kinds, bw))
    groups, pos = [], 0
    for s in sizes:
        groups.append(tuple(int(j) for j in flat[pos:pos + s]))
        pos += s
    return KernelConfig(per_var, tuple(groups), tuple(int(a) for a in anchors))


def save_model(model: DearModel, path) -> None:
    """Versioned binary record of every model field (numpy archive)."""
    mk, mb, mf, ms, ma = _kernel_cfg_blob(model.mean_fit.cfg)
    vk, vb, vf, vs, va = _kernel_cfg_blob(model.sd_fit.cfg)
    cfg_text = "\n".join(f"{k}={v}" for k, v in sorted(_cfg_to_dict(model.cfg).items()))
    np.savez(
        path,
        format_version=np.int64(_FORMAT_VERSION),
        x=model.mean_fit.x, y_cal=model.mean_fit.y, z=model.sd_fit.y,
        raw_y=model.raw_y, u_history=model.u_history,
        residuals=model.residuals, residual_bandwidths=model.residual_bandwidths,
        ar_coef=model.ar.coef, ar_var=np.float64(model.ar.resid_var),
        mean_kinds=mk, mean_bw=mb, mean_groups=mf, mean_sizes=ms, mean_anchors=ma,
        var_kinds=vk, var_bw=vb, var_groups=vf, var_sizes=vs, var_anchors=va,
        tau=np.float64(model.mean_fit.sparsity_threshold),
        var_floor=np.float64(model.sd_fit.clip_min or 0.0),
        h_r=np.float64(model.bandwidths.density_global),
        pilot_log_s=np.float64(model.pilot_log_s),
        pool_capacity=np.int64(model.pool_capacity),
        iterations_run=np.int64(model.iterations_run),
        converged=np.int64(model.converged),
        u_valid=np.int64(model.u_valid),
        updates_since_refit=np.int64(model.updates_since_refit),
        warning=np.frombuffer(model.warning.encode(), dtype=np.uint8),
        cfg_text=np.frombuffer(cfg_text.encode(), dtype=np.uint8),
    )


def _cfg_to_dict(cfg: RunConfig) -> dict:
    out = {}
    for key in ("window", "cadence", "min_window", "p_max", "alpha", "ar_tol",
                "max_iterations", "clamp_lower", "clamp_upper", "seed"):
        out[key] = getattr(cfg, key)
    if cfg.tau is not None:
        out["tau"] = cfg.tau
    return out


def load_model(path) -> DearModel:
    with np.load(path) as blob:
        if int(blob["format_version"]) != _FORMAT_VERSION:
            raise NumericalError(
                f"unsupported model format {int(blob['format_version'])}")
        cfg_text = bytes(blob["cfg_text"].tobytes()).decode()
        cfg_values = dict(line.split("=", 1) for line in cfg_text.splitlines() if line)
        cfg = RunConfig.from_dict(cfg_values)
        mean_cfg = _kernel_cfg_from_blob(blob["mean_kinds"], blob["mean_bw"],
                                         blob["mean_groups"], blob["mean_sizes"],
                                         blob["mean_anchors"])
        var_cfg = _kernel_cfg_from_blob(blob["var_kinds"], blob["var_bw"],
                                        blob["var_groups"], blob["var_sizes"],
                                        blob["var_anchors"])
        tau = float(blob["tau"])
        mean_fit = SmootherFit(blob["x"], blob["y_cal"], mean_cfg,
                               SmootherMethod.LOCAL_LINEAR, tau)
        sd_fit = SmootherFit(blob["x"], blob["z"], var_cfg,
                             SmootherMethod.LOCAL_LINEAR, tau,
                             clip_min=float(blob["var_floor"]) or None)
        ar_coef = blob["ar_coef"]
        ar = ArFit(ar_coef.size, ar_coef, float(blob["ar_var"]))
        report = BandwidthReport(
            per_variable_regression=[h for _, h in mean_cfg.per_variable],
            density_global=float(blob["h_r"]))
        return DearModel(
            mean_fit=mean_fit, sd_fit=sd_fit, ar=ar,
            residuals=blob["residuals"],
            residual_bandwidths=blob["residual_bandwidths"],
            u_history=blob["u_history"], raw_y=blob["raw_y"], bandwidths=report,
            iterations_run=int(blob["iterations_run"]),
            converged=bool(int(blob["converged"])), cfg=cfg,
            pilot_log_s=float(blob["pilot_log_s"]),
            pool_capacity=int(blob["pool_capacity"]),
            u_valid=int(blob["u_valid"]),
            updates_since_refit=int(blob["updates_since_refit"]),
            warning=bytes(blob["warning"].tobytes()).decode())
