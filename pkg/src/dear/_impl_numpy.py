"""Pure-numpy implementations of the hot numeric kernels.

Selected when the env var DEAR_BACKEND=numpy is set or numba is unavailable.
Formulas mirror _impl_numba exactly; only the evaluation strategy differs
(broadcasting here, explicit loops there).
"""

import numpy as np
from scipy.special import erfc as _erfc

BACKEND_NAME = "numpy"

_LOG_TINY = -690.7755278982137  # log(1e-300): products below this flush to 0
_TWO_PI = 2.0 * np.pi
_SQRT2 = np.sqrt(2.0)
_INV_SQRT_2PI = 1.0 / np.sqrt(2.0 * np.pi)

# chunk size that bounds (points x centers) temporaries to ~8M doubles
_CHUNK = 4_000_000


def amk_weight_matrix(xq, xt, kinds, conc, log_norm, groups_flat, group_offsets):
    """Raw additive-multiplicative kernel weights, shape (Q, T).

    conc[j] is 1/(2h_j^2) for linear variables and the concentration 1/h_j^2
    for circular ones; log_norm[j] is the log of the kernel normalizer.
    """
    q_n = xq.shape[0]
    t_n = xt.shape[0]
    n_groups = group_offsets.shape[0] - 1
    acc = np.zeros((q_n, t_n))
    for g in range(n_groups):
        s = np.zeros((q_n, t_n))
        for m in range(group_offsets[g], group_offsets[g + 1]):
            j = groups_flat[m]
            u = xq[:, j, None] - xt[None, :, j]
            if kinds[j] == 0:
                s += -u * u * conc[j] - log_norm[j]
            else:
                w = np.mod(u, _TWO_PI)
                w = np.where(w > np.pi, w - _TWO_PI, w)
                s += conc[j] * np.cos(w) - log_norm[j]
        np.maximum(s, _LOG_TINY, out=s)
        v = np.exp(s)
        v[s <= _LOG_TINY] = 0.0
        acc += v
    acc /= n_groups
    return acc


def _chunked(n_pts, n_ctr):
    step = max(1, _CHUNK // max(1, n_ctr))
    return range(0, n_pts, step), step


def gm_pdf(z, centers, bw, weights):
    """Weighted Gaussian-mixture density at points z (1-d array)."""
    z = np.atleast_1d(np.asarray(z, dtype=float))
    out = np.empty(z.shape[0])
    rng, step = _chunked(z.shape[0], centers.shape[0])
    inv_bw = 1.0 / bw
    coef = weights * inv_bw * _INV_SQRT_2PI
    for lo in rng:
        hi = min(lo + step, z.shape[0])
        u = (z[lo:hi, None] - centers[None, :]) * inv_bw[None, :]
        out[lo:hi] = np.exp(-0.5 * u * u) @ coef
    return out


def gm_cdf(z, centers, bw, weights):
    """Weighted Gaussian-mixture CDF at points z (1-d array)."""
    z = np.atleast_1d(np.asarray(z, dtype=float))
    out = np.empty(z.shape[0])
    rng, step = _chunked(z.shape[0], centers.shape[0])
    inv_bw = 1.0 / bw
    for lo in rng:
        hi = min(lo + step, z.shape[0])
        u = (z[lo:hi, None] - centers[None, :]) * inv_bw[None, :]
        out[lo:hi] = (0.5 * _erfc(-u / _SQRT2)) @ weights
    return out


def psi4_pair_sum(x, g):
    """Sum over all pairs (i, j) of phi''''((x_i-x_j)/g), diagonal included."""
    n = x.shape[0]
    total = 0.0
    rng, step = _chunked(n, n)
    for lo in rng:
        hi = min(lo + step, n)
        u = (x[lo:hi, None] - x[None, :]) / g
        u2 = u * u
        total += float(np.sum((u2 * u2 - 6.0 * u2 + 3.0)
                              * np.exp(-0.5 * u2) * _INV_SQRT_2PI))
    return total


def normal_cdf_vec(z):
    """Vectorized standard normal CDF."""
    return 0.5 * _erfc(-np.asarray(z, dtype=float) / _SQRT2)
