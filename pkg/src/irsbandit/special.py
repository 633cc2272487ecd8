"""Special functions and quadrature kernels (numba).

The regularized incomplete beta function is evaluated with the modified Lentz
continued fraction.  Along a Beta-Bernoulli belief path the parameters move by
one unit per observation, so CDF values at a fixed point are propagated with the
exact contiguous relations

    I_x(a+1, b) = I_x(a, b) - h(a, b) / a
    I_x(a, b+1) = I_x(a, b) + h(a, b) / b,     h(a, b) = x^a (1-x)^b / B(a, b)

instead of re-running the continued fraction at every step.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

_FPMIN = 1e-300
_EPS = 1e-16
_MAXIT = 20000
_SQRT2 = math.sqrt(2.0)
_INV_SQRT2PI = 1.0 / math.sqrt(2.0 * math.pi)


@njit(cache=True)
def _betacf(a, b, x):
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < _FPMIN:
        d = _FPMIN
    d = 1.0 / d
    h = d
    for m in range(1, _MAXIT + 1):
        m2 = 2.0 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < _FPMIN:
            d = _FPMIN
        c = 1.0 + aa / c
        if abs(c) < _FPMIN:
            c = _FPMIN
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < _FPMIN:
            d = _FPMIN
        c = 1.0 + aa / c
        if abs(c) < _FPMIN:
            c = _FPMIN
        d = 1.0 / d
        de = d * c
        h *= de
        if abs(de - 1.0) < _EPS:
            return h
    return np.nan


@njit(cache=True)
def log_beta_front(a, b, x):
    """log of x^a (1-x)^b / B(a, b) for 0 < x < 1."""
    return (math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
            + a * math.log(x) + b * math.log1p(-x))


@njit(cache=True)
def betainc(a, b, x):
    """Regularized incomplete beta I_x(a, b); NaN if the fraction fails."""
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    front = math.exp(log_beta_front(a, b, x))
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


@njit(cache=True)
def norm_cdf(z):
    return 0.5 * math.erfc(-z / _SQRT2)


@njit(cache=True)
def norm_pdf(z):
    return _INV_SQRT2PI * math.exp(-0.5 * z * z)


# ---------------------------------------------------------------------------
# Beta CDF along a belief path
# ---------------------------------------------------------------------------

@njit(cache=True)
def beta_cdf_walk(x, alpha, beta, out_cdf, out_front):
    """CDF of Beta(alpha[n], beta[n]) at ``x`` for every step n of a path.

    Consecutive entries must differ by exactly one unit in alpha or in beta.
    ``out_front`` receives h(a_n, b_n); with it the partial mean
    E[theta; theta > x] is available without a second CDF evaluation.
    """
    n_len = alpha.shape[0]
    if x <= 0.0 or x >= 1.0:
        v = 0.0 if x <= 0.0 else 1.0
        for n in range(n_len):
            out_cdf[n] = v
            out_front[n] = 0.0
        return
    lx = math.log(x)
    l1x = math.log1p(-x)
    a = alpha[0]
    b = beta[0]
    cdf = betainc(a, b, x)
    h = math.exp(log_beta_front(a, b, x))
    out_cdf[0] = cdf
    out_front[0] = h
    for n in range(1, n_len):
        if alpha[n] > a:
            cdf -= h / a
            h *= x * (a + b) / a
            a += 1.0
        else:
            cdf += h / b
            h *= (1.0 - x) * (a + b) / b
            b += 1.0
        if h < 1e-250:
            # guard against a front that underflowed earlier on the path
            h = math.exp(math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
                         + a * lx + b * l1x)
        if cdf < 0.0:
            cdf = 0.0
        elif cdf > 1.0:
            cdf = 1.0
        out_cdf[n] = cdf
        out_front[n] = h


# ---------------------------------------------------------------------------
# Quadrature rules for E[max_a theta_a]
# ---------------------------------------------------------------------------

def _composite_rule(breaks, order):
    x, w = np.polynomial.legendre.leggauss(order)
    nodes, weights = [], []
    for lo, hi in zip(breaks[:-1], breaks[1:]):
        half = 0.5 * (hi - lo)
        nodes.append(lo + half * (x + 1.0))
        weights.append(half * w)
    return np.concatenate(nodes), np.concatenate(weights)


def _beta_breaks():
    edge = [0.0, 1e-12, 1e-9, 1e-6, 1e-4, 1e-3, 3e-3, 1e-2]
    middle = list(np.linspace(0.01, 0.99, 50)[1:-1])
    right = [1.0 - v for v in reversed(edge)]
    return np.array(edge + middle + right)


# Fixed rule on [0, 1]: graded panels at both ends resolve endpoint
# singularities (alpha or beta < 1); 0.02-wide panels in the middle resolve
# posteriors down to a standard deviation of about 0.005.
BETA_NODES, BETA_WEIGHTS = _composite_rule(_beta_breaks(), 12)

GL16_X, GL16_W = np.polynomial.legendre.leggauss(16)

# Per-arm breakpoints in units of the arm's posterior standard deviation.
GAUSS_OFFSETS = np.array([-9.0, -6.0, -4.5, -3.0, -2.0, -1.0, 0.0,
                          1.0, 2.0, 3.0, 4.5, 6.0, 9.0])


@njit(cache=True)
def beta_emax(alpha, beta, nodes, weights):
    """E[max_a theta_a] for independent Beta arms."""
    k = alpha.shape[0]
    if k == 1:
        return alpha[0] / (alpha[0] + beta[0])
    total = 0.0
    for j in range(nodes.shape[0]):
        prod = 1.0
        for a in range(k):
            prod *= betainc(alpha[a], beta[a], nodes[j])
        total += weights[j] * (1.0 - prod)
    return total


@njit(cache=True)
def _gauss_cdf_prod(x, mean, sd):
    prod = 1.0
    for a in range(mean.shape[0]):
        if sd[a] > 0.0:
            prod *= norm_cdf((x - mean[a]) / sd[a])
        elif x < mean[a]:
            return 0.0
    return prod


@njit(cache=True)
def gauss_emax(mean, sd, offsets, glx, glw):
    """E[max_a theta_a] for independent Normal(mean[a], sd[a]^2) arms.

    Uses E[max] = L + int_L^R (1 - prod_a Phi_a(x)) dx on a composite
    Gauss-Legendre rule whose panels follow every arm's own scale; outside
    [L, R] (nine standard deviations past every arm) the integrand is below
    1e-18.
    """
    k = mean.shape[0]
    if k == 1:
        return mean[0]
    nb = offsets.shape[0]
    pts = np.empty(k * nb)
    for a in range(k):
        for i in range(nb):
            pts[a * nb + i] = mean[a] + sd[a] * offsets[i]
    pts.sort()
    lo = pts[0]
    total = 0.0
    for p in range(pts.shape[0] - 1):
        a0 = pts[p]
        a1 = pts[p + 1]
        if a1 <= a0:
            continue
        half = 0.5 * (a1 - a0)
        for j in range(glx.shape[0]):
            x = a0 + half * (glx[j] + 1.0)
            total += half * glw[j] * (1.0 - _gauss_cdf_prod(x, mean, sd))
    return lo + total


@njit(cache=True)
def kahan_cumsum(x):
    """Compensated running sum; out[0] = 0 and out[n] = x[0] + ... + x[n-1]."""
    out = np.empty(x.shape[0] + 1)
    out[0] = 0.0
    s = 0.0
    c = 0.0
    for i in range(x.shape[0]):
        y = x[i] - c
        t = s + y
        c = (t - s) - y
        s = t
        out[i + 1] = s
    return out
