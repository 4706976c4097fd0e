"""Independent oracles used by the test suite.

Everything here is implemented from defining series, continued fractions,
quadrature or brute force, deliberately sharing no code with the package:
these are the reference values the product paths are checked against.
"""

import math

import numpy as np


def bessel_i0_series(x: float, terms: int = 60) -> float:
    """I0 from the defining series sum (x/2)^(2k) / (k!)^2.

    Terms are built iteratively so large arguments stay inside float range.
    """
    q = 0.25 * x * x
    term = 1.0
    total = 1.0
    for k in range(1, max(terms, int(2 * x) + 20)):
        term *= q / (k * k)
        total += term
        if term < 1e-18 * total:
            break
    return total


def _gamma_q_cf(a: float, x: float) -> float:
    """Regularized upper incomplete gamma Q(a, x) by the Lentz continued
    fraction; reliable for x >= a + 1."""
    tiny = 1e-300
    b = x + 1.0 - a
    c = 1.0 / tiny
    d = 1.0 / b
    h = d
    for i in range(1, 500):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < tiny:
            d = tiny
        c = b + an / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < 1e-17:
            break
    return math.exp(-x + a * math.log(x) - math.lgamma(a)) * h


def erf_oracle(z: float) -> float:
    """erf from the Maclaurin series for small z and the incomplete-gamma
    continued fraction (erfc(z) = Q(1/2, z^2)) beyond; abs error < 1e-14."""
    if z < 0:
        return -erf_oracle(-z)
    if z <= 1.2:
        total = 0.0
        term = z
        k = 0
        while abs(term) / (2 * k + 1) > 1e-19:
            total += term / (2 * k + 1)
            k += 1
            term *= -z * z / k
            if k > 200:
                break
        return 2.0 / math.sqrt(math.pi) * total
    return 1.0 - _gamma_q_cf(0.5, z * z)


def normal_cdf_oracle(z: float) -> float:
    if z >= 0:
        return 1.0 - 0.5 * (1.0 - erf_oracle(z / math.sqrt(2.0)))
    return 0.5 * (1.0 - erf_oracle(-z / math.sqrt(2.0)))


def chisq_cdf_quadrature(x: float, df: int) -> float:
    """Chi-square CDF by adaptive Simpson quadrature of the density.

    Substituting t = s^2 removes the df=1 endpoint singularity: the
    integrand becomes 2 s^(df-1) e^(-s^2/2) / (2^(df/2) Gamma(df/2)),
    smooth on [0, sqrt(x)].
    """
    if x <= 0:
        return 0.0
    a = df / 2.0
    log_norm = a * math.log(2.0) + math.lgamma(a)

    def integrand(s):
        if s <= 0.0:
            return 0.0 if df > 1 else 2.0 * math.exp(-log_norm)
        return 2.0 * math.exp((df - 1) * math.log(s) - 0.5 * s * s - log_norm)

    hi = math.sqrt(min(x, df + 60.0 * math.sqrt(2.0 * df) + 60.0))
    val = _adaptive_simpson_scalar(integrand, 0.0, hi, 1e-13)
    return min(val, 1.0)


def _adaptive_simpson_scalar(f, a, b, tol, depth=60):
    fa, fb = f(a), f(b)
    m = 0.5 * (a + b)
    fm = f(m)
    whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb)

    def rec(a, fa, m, fm, b, fb, whole, tol, depth):
        lm = 0.5 * (a + m)
        rm = 0.5 * (m + b)
        flm, frm = f(lm), f(rm)
        left = (m - a) / 6.0 * (fa + 4.0 * flm + fm)
        right = (b - m) / 6.0 * (fm + 4.0 * frm + fb)
        err = left + right - whole
        if depth <= 0 or abs(err) <= 15.0 * tol:
            return left + right + err / 15.0
        return (rec(a, fa, lm, flm, m, fm, left, tol / 2.0, depth - 1)
                + rec(m, fm, rm, frm, b, fb, right, tol / 2.0, depth - 1))

    return rec(a, fa, m, fm, b, fb, whole, tol, depth)


def quadrature(f, a, b, tol=1e-10):
    """Adaptive Simpson for scalar integrands (general-purpose oracle)."""
    return _adaptive_simpson_scalar(f, a, b, tol)


def crps_gaussian_mixture(weights, means, sds, y) -> float:
    """Closed-form CRPS of a Gaussian mixture (the independent oracle).

    CRPS = sum_i w_i A(y - m_i, s_i) - 1/2 sum_ij w_i w_j A(m_i - m_j,
    sqrt(s_i^2 + s_j^2)) with A(mu, s) = mu (2 Phi(mu/s) - 1) + 2 s phi(mu/s).
    """
    w = np.asarray(weights, dtype=float)
    m = np.asarray(means, dtype=float)
    s = np.asarray(sds, dtype=float)

    def big_a(mu, sd):
        z = mu / sd
        phi = math.exp(-0.5 * z * z) / math.sqrt(2.0 * math.pi)
        return mu * (2.0 * normal_cdf_oracle(z) - 1.0) + 2.0 * sd * phi

    first = sum(w[i] * big_a(y - m[i], s[i]) for i in range(w.size))
    second = 0.0
    for i in range(w.size):
        for j in range(w.size):
            second += w[i] * w[j] * big_a(m[i] - m[j],
                                          math.sqrt(s[i] ** 2 + s[j] ** 2))
    return first - 0.5 * second


def nw_mean_brute(x, xt, yt, h) -> float:
    """Nadaraya-Watson with plain Gaussian kernels, built from scratch."""
    w = np.array([math.exp(-0.5 * ((x - xi) / h) ** 2) for xi in xt])
    return float(w @ yt / w.sum())


def local_linear_brute(x, xt, yt, h) -> float:
    """One-dimensional local linear fit via an explicit weighted design."""
    w = np.array([math.exp(-0.5 * ((x - xi) / h) ** 2) for xi in xt])
    design = np.column_stack([np.ones_like(xt), xt - x])
    wd = design * w[:, None]
    beta, *_ = np.linalg.lstsq(wd.T @ design, wd.T @ yt, rcond=None)
    return float(beta[0])


def simulate_ar(coefs, n, rng, innovation_sd=1.0, burn=200):
    """Direct AR(p) recursion with normal innovations."""
    p = len(coefs)
    u = np.zeros(n + burn)
    eps = rng.standard_normal(n + burn) * innovation_sd
    for t in range(n + burn):
        acc = eps[t]
        for k, a in enumerate(coefs, start=1):
            if t - k >= 0:
                acc += a * u[t - k]
        u[t] = acc
    return u[burn:]
