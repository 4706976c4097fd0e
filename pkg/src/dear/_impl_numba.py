"""Numba-jitted implementations of the hot numeric kernels.

Default backend. The pure-numpy twin lives in _impl_numpy; both must agree
to floating-point noise (cross-checked in the test suite). fastmath stays
off so results are reproducible run to run.
"""

import math

import numba as nb
import numpy as np

BACKEND_NAME = "numba"

_LOG_TINY = -690.7755278982137
_TWO_PI = 2.0 * math.pi
_PI = math.pi
_SQRT2 = math.sqrt(2.0)
_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


@nb.njit(cache=True)
def _amk_general(xq, xt, kinds, conc, log_norm, groups_flat, group_offsets):
    q_n = xq.shape[0]
    t_n = xt.shape[0]
    n_groups = group_offsets.shape[0] - 1
    out = np.empty((q_n, t_n))
    for qi in range(q_n):
        for ti in range(t_n):
            acc = 0.0
            for g in range(n_groups):
                s = 0.0
                for m in range(group_offsets[g], group_offsets[g + 1]):
                    j = groups_flat[m]
                    u = xq[qi, j] - xt[ti, j]
                    if kinds[j] == 0:
                        s += -u * u * conc[j] - log_norm[j]
                    else:
                        w = u % _TWO_PI
                        if w > _PI:
                            w -= _TWO_PI
                        s += conc[j] * math.cos(w) - log_norm[j]
                if s > _LOG_TINY:
                    acc += math.exp(s)
            out[qi, ti] = acc / n_groups
    return out


@nb.njit(cache=True)
def _amk_1d_linear(xq, xt, conc, log_norm):
    # single linear covariate, one group: the dominant case in practice
    q_n = xq.shape[0]
    t_n = xt.shape[0]
    out = np.empty((q_n, t_n))
    for qi in range(q_n):
        v = xq[qi, 0]
        for ti in range(t_n):
            u = v - xt[ti, 0]
            s = -u * u * conc - log_norm
            out[qi, ti] = math.exp(s) if s > _LOG_TINY else 0.0
    return out


def amk_weight_matrix(xq, xt, kinds, conc, log_norm, groups_flat, group_offsets):
    if (xq.shape[1] == 1 and kinds[0] == 0 and group_offsets.shape[0] == 2):
        return _amk_1d_linear(xq, xt, float(conc[0]), float(log_norm[0]))
    return _amk_general(xq, xt, kinds, conc, log_norm, groups_flat, group_offsets)


@nb.njit(cache=True)
def gm_pdf(z, centers, bw, weights):
    n = z.shape[0]
    t = centers.shape[0]
    out = np.empty(n)
    for i in range(n):
        acc = 0.0
        for k in range(t):
            u = (z[i] - centers[k]) / bw[k]
            acc += weights[k] * math.exp(-0.5 * u * u) / bw[k]
        out[i] = acc * _INV_SQRT_2PI
    return out


@nb.njit(cache=True)
def gm_cdf(z, centers, bw, weights):
    n = z.shape[0]
    t = centers.shape[0]
    out = np.empty(n)
    for i in range(n):
        acc = 0.0
        for k in range(t):
            u = (z[i] - centers[k]) / bw[k]
            acc += weights[k] * 0.5 * math.erfc(-u / _SQRT2)
        out[i] = acc
    return out


@nb.njit(cache=True)
def psi4_pair_sum(x, g):
    n = x.shape[0]
    # diagonal: u = 0 -> H4(0)*phi(0) = 3/sqrt(2*pi)
    total = n * 3.0 * _INV_SQRT_2PI
    off = 0.0
    for i in range(n):
        for j in range(i + 1, n):
            u = (x[i] - x[j]) / g
            u2 = u * u
            off += (u2 * u2 - 6.0 * u2 + 3.0) * math.exp(-0.5 * u2)
    return total + 2.0 * off * _INV_SQRT_2PI


@nb.njit(cache=True)
def normal_cdf_vec(z):
    out = np.empty(z.shape[0])
    for i in range(z.shape[0]):
        out[i] = 0.5 * math.erfc(-z[i] / _SQRT2)
    return out
