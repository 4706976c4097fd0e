"""Kernel primitives for linear and circular variables.

Gaussian kernels handle ordinary (linear) covariates, Von Mises kernels
handle angles, and the additive-multiplicative combiner averages products
of at most three univariate kernels to keep higher-dimensional smoothing
workable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import InvalidBandwidthError, InvalidConfigError, OverflowGuardError

__all__ = [
    "VariableKind",
    "KernelConfig",
    "gaussian_kernel",
    "von_mises_kernel",
    "bessel_i0",
    "log_bessel_i0",
    "multiplicative_kernel",
    "amk_weight",
    "make_groups",
    "wrap_angle",
]

_SQRT_2PI = math.sqrt(2.0 * math.pi)
_TWO_PI = 2.0 * math.pi
_FLUSH = 1e-300  # kernel values below this are flushed to exact zero
_MAX_CONCENTRATION = 700.0  # exp(k) overflows shortly above this


class VariableKind(Enum):
    """Covariate type; circular values are angles in radians in [0, 2pi)."""

    LINEAR = "linear"
    CIRCULAR = "circular"


def wrap_angle(u):
    """Reduce an angular difference to (-pi, pi]."""
    w = np.mod(u, _TWO_PI)
    if np.isscalar(w) or w.ndim == 0:
        return float(w - _TWO_PI) if w > math.pi else float(w)
    return np.where(w > math.pi, w - _TWO_PI, w)


def bessel_i0(x: float) -> float:
    """Modified Bessel function of the first kind, order zero.

    Power series for x <= 15, asymptotic expansion above; relative error
    is below 1e-10 on both branches. Raises for arguments whose result
    would overflow a double -- use log_bessel_i0 there.
    """
    if x < 0:
        raise ValueError("bessel_i0 requires x >= 0")
    if x > 709.0:
        raise OverflowGuardError(
            f"bessel_i0({x:g}) overflows float64; use log_bessel_i0")
    return math.exp(log_bessel_i0(x)) if x > 15.0 else _i0_series(x)


def log_bessel_i0(x: float) -> float:
    """log(I0(x)), safe for large x."""
    if x < 0:
        raise ValueError("log_bessel_i0 requires x >= 0")
    if x <= 15.0:
        return math.log(_i0_series(x))
    # I0(x) ~ e^x / sqrt(2 pi x) * sum_k prod_{j<=k}((2j-1)^2 / (8 j x))
    s = 1.0
    term = 1.0
    for k in range(1, 30):
        term *= (2.0 * k - 1.0) ** 2 / (8.0 * k * x)
        s += term
        if term < 1e-17 * s:
            break
    return x - 0.5 * math.log(_TWO_PI * x) + math.log(s)


def _i0_series(x: float) -> float:
    q = 0.25 * x * x
    term = 1.0
    s = 1.0
    for k in range(1, 60):
        term *= q / (k * k)
        s += term
        if term < 1e-17 * s:
            break
    return s


def gaussian_kernel(u: float, h: float) -> float:
    """Gaussian kernel (1/(sqrt(2 pi) h)) exp(-u^2 / (2 h^2))."""
    if h <= 0:
        raise InvalidBandwidthError(f"bandwidth must be positive, got {h!r}")
    v = math.exp(-0.5 * (u / h) ** 2) / (_SQRT_2PI * h)
    return v if v >= _FLUSH else 0.0


def von_mises_kernel(u: float, h: float) -> float:
    """Von Mises kernel exp(cos(u)/h^2) / (2 pi I0(1/h^2)) on angles.

    Evaluated in the log domain so concentrations up to the 700 guard do
    not overflow the numerator.
    """
    if h <= 0:
        raise InvalidBandwidthError(f"bandwidth must be positive, got {h!r}")
    kappa = 1.0 / (h * h)
    if kappa > _MAX_CONCENTRATION:
        raise OverflowGuardError(
            f"concentration 1/h^2 = {kappa:g} exceeds the overflow guard {_MAX_CONCENTRATION:g}")
    w = wrap_angle(u)
    logv = kappa * math.cos(w) - math.log(_TWO_PI) - log_bessel_i0(kappa)
    v = math.exp(logv)
    return v if v >= _FLUSH else 0.0


@dataclass(frozen=True)
class KernelConfig:
    """Per-variable kernels plus the additive-multiplicative group structure.

    per_variable : sequence of (VariableKind, bandwidth) pairs, one per covariate
    groups       : index subsets (size <= 3) whose product kernels are averaged
    anchors      : indices that must appear in every group
    """

    per_variable: tuple
    groups: tuple = ()
    anchors: tuple = ()

    def __post_init__(self):
        pv = tuple((VariableKind(k), float(h)) for k, h in self.per_variable)
        object.__setattr__(self, "per_variable", pv)
        d = len(pv)
        if d == 0:
            raise InvalidConfigError("at least one variable required")
        for kind, h in pv:
            if not (h > 0) or not math.isfinite(h):
                raise InvalidBandwidthError(f"bandwidth must be positive, got {h!r}")
            if kind is VariableKind.CIRCULAR and 1.0 / (h * h) > _MAX_CONCENTRATION:
                raise OverflowGuardError(
                    f"circular bandwidth {h:g} implies concentration beyond {_MAX_CONCENTRATION:g}")
        groups = tuple(tuple(int(j) for j in g) for g in self.groups)
        if not groups:
            groups = (tuple(range(d)),) if d <= 3 else make_groups(d, self.anchors)
        anchors = tuple(int(a) for a in self.anchors)
        covered = set()
        for g in groups:
            if len(g) == 0:
                raise InvalidConfigError("empty kernel group")
            if len(g) > 3:
                raise InvalidConfigError(f"group {g} exceeds the 3-variable limit")
            if any(j < 0 or j >= d for j in g):
                raise InvalidConfigError(f"group {g} indexes outside 0..{d - 1}")
            if not set(anchors) <= set(g):
                raise InvalidConfigError(f"group {g} is missing anchors {anchors}")
            covered |= set(g)
        if covered != set(range(d)):
            raise InvalidConfigError(
                f"groups cover {sorted(covered)} but there are {d} variables")
        object.__setattr__(self, "groups", groups)
        object.__setattr__(self, "anchors", anchors)

    @property
    def dim(self) -> int:
        return len(self.per_variable)

    @property
    def bandwidths(self) -> np.ndarray:
        return np.array([h for _, h in self.per_variable])

    @property
    def kinds(self) -> tuple:
        return tuple(k for k, _ in self.per_variable)

    # arrays consumed by the backend weight-matrix kernels
    def backend_arrays(self):
        d = self.dim
        kinds = np.zeros(d, dtype=np.uint8)
        conc = np.empty(d)
        log_norm = np.empty(d)
        for j, (kind, h) in enumerate(self.per_variable):
            if kind is VariableKind.LINEAR:
                conc[j] = 1.0 / (2.0 * h * h)
                log_norm[j] = math.log(_SQRT_2PI * h)
            else:
                kinds[j] = 1
                kappa = 1.0 / (h * h)
                conc[j] = kappa
                log_norm[j] = math.log(_TWO_PI) + log_bessel_i0(kappa)
        flat = np.array([j for g in self.groups for j in g], dtype=np.int64)
        offsets = np.zeros(len(self.groups) + 1, dtype=np.int64)
        np.cumsum([len(g) for g in self.groups], out=offsets[1:])
        return kinds, conc, log_norm, flat, offsets


def make_groups(d: int, anchors=()) -> tuple:
    """Default group enumeration: everything if d <= 3, else one group per
    non-anchor variable with the anchors always included."""
    anchors = tuple(int(a) for a in anchors)
    if d <= 3:
        return (tuple(range(d)),)
    if len(anchors) > 2:
        raise InvalidConfigError("at most 2 anchors fit in 3-variable groups")
    rest = [j for j in range(d) if j not in anchors]
    if not rest:
        return (anchors,)
    return tuple(tuple(sorted(anchors + (j,))) for j in rest)


def _per_variable_value(kind: VariableKind, u: float, h: float) -> float:
    if kind is VariableKind.LINEAR:
        return gaussian_kernel(u, h)
    return von_mises_kernel(u, h)


def multiplicative_kernel(x, xi, cfg: KernelConfig, group) -> float:
    """Product of the per-variable kernel values over one group."""
    group = tuple(group)
    if len(group) == 0:
        raise InvalidConfigError("empty kernel group")
    x = np.asarray(x, dtype=float)
    xi = np.asarray(xi, dtype=float)
    v = 1.0
    for j in group:
        kind, h = cfg.per_variable[j]
        v *= _per_variable_value(kind, float(x[j] - xi[j]), h)
        if v == 0.0:
            return 0.0
    return v if v >= _FLUSH else 0.0


def amk_weight(x, xi, cfg: KernelConfig) -> float:
    """Arithmetic mean of the multiplicative kernels over all groups."""
    if not cfg.groups:
        raise InvalidConfigError("config has no groups")
    return sum(multiplicative_kernel(x, xi, cfg, g) for g in cfg.groups) / len(cfg.groups)
