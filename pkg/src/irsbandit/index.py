"""Index policies built on the single-armed worth-trying test.

For one arm and a sampled belief trajectory, the arm is compared with an
outside option paying a known reward ``lam`` every period.  Gamma_n(lam) is
E[max(theta, lam)] under the n-th belief and has a closed form for both
supported families.  The index of an arm is the largest ``lam`` for which the
arm is still worth trying, located by bisection.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from .errors import NumericalError, ValidationError
from .models import BETA, BeliefPath, BeliefVector
from .rng import as_generator
from .special import betainc, log_beta_front, norm_cdf, norm_pdf

STANDARD = "standard"
STAR = "star"

SEARCH_TOL = 1e-6
MAX_ITER = 60
GAUSS_BRACKET = 8.0

_KIND_BETA = 0
_KIND_GAUSS = 1


# ---------------------------------------------------------------------------
# Closed forms for E[max(theta, lam)]
# ---------------------------------------------------------------------------

@njit(cache=True)
def _gamma_beta(alpha, beta, lam):
    mean = alpha / (alpha + beta)
    if lam <= 0.0:
        return mean
    if lam >= 1.0:
        return lam
    return lam * betainc(alpha, beta, lam) + mean * (1.0 - betainc(alpha + 1.0, beta, lam))


@njit(cache=True)
def _gamma_gauss_sd(mean, sd, lam):
    if sd <= 0.0:
        return max(mean, lam)
    z = (lam - mean) / sd
    return mean + (lam - mean) * norm_cdf(z) + sd * norm_pdf(z)


def gamma_beta(alpha: float, beta: float, lam: float) -> float:
    """E[max(theta, lam)] for theta ~ Beta(alpha, beta)."""
    if not (alpha > 0 and beta > 0):
        raise ValidationError("Beta parameters must be positive")
    return float(_gamma_beta(float(alpha), float(beta), float(lam)))


def gamma_gauss(mean: float, precision: float, lam: float) -> float:
    """E[max(theta, lam)] for theta ~ Normal(mean, 1/precision^2)."""
    if not precision > 0:
        raise ValidationError("precision must be positive")
    return float(_gamma_gauss_sd(float(mean), 1.0 / float(precision), float(lam)))


# ---------------------------------------------------------------------------
# Gamma along a trajectory and the worth-trying scan
# ---------------------------------------------------------------------------

@njit(cache=True)
def _beta_state_init(p0, q0, lam, st):
    st[0] = p0
    st[1] = q0
    st[2] = betainc(p0, q0, lam)
    st[3] = math.exp(log_beta_front(p0, q0, lam))


@njit(cache=True)
def _beta_state_step(p_next, lam, st):
    a = st[0]
    b = st[1]
    h = st[3]
    if p_next > a:
        st[2] -= h / a
        h *= lam * (a + b) / a
        st[0] = a + 1.0
    else:
        st[2] += h / b
        h *= (1.0 - lam) * (a + b) / b
        st[1] = b + 1.0
    if h < 1e-250:
        h = math.exp(log_beta_front(st[0], st[1], lam))
    st[3] = h
    if st[2] < 0.0:
        st[2] = 0.0
    elif st[2] > 1.0:
        st[2] = 1.0


@njit(cache=True)
def _gamma_at(kind, n, mu, p, q, lam, st):
    """Gamma_n(lam); Beta paths must be visited in order n = 0, 1, ..."""
    if kind == _KIND_GAUSS:
        return _gamma_gauss_sd(p[n], q[n], lam)
    if lam <= 0.0:
        return mu[n]
    if lam >= 1.0:
        return lam
    if n == 0:
        _beta_state_init(p[0], q[0], lam, st)
    else:
        _beta_state_step(p[n], lam, st)
    s = st[0] + st[1]
    m = st[0] / s
    return m + (lam - m) * st[2] + st[3] / s


@njit(cache=True)
def _gamma_path(kind, mu, p, q, T, lam, out):
    """Gamma_n(lam) for n = 0..T along one arm's belief path."""
    st = np.empty(4)
    for n in range(T + 1):
        out[n] = _gamma_at(kind, n, mu, p, q, lam, st)


@njit(cache=True)
def _phi_update(star, T, n, mu_prev, g, g_prev, g0, lam, acc, gmin):
    """One step of the phi scan; returns (candidate, acc, gmin)."""
    if star:
        acc += mu_prev - lam - (g - g0)
        return acc, acc, gmin
    acc += mu_prev - g_prev
    if g < gmin:
        gmin = g
    return T * (g0 - lam) + (T - n) * (lam - gmin) + acc, acc, gmin


@njit(cache=True)
def _phi_scan(kind, star, mu, p, q, T, lam, early):
    """phi(lam); with ``early`` returns as soon as a non-negative term is found."""
    best = -np.inf
    acc = 0.0
    if kind == _KIND_GAUSS or lam <= 0.0 or lam >= 1.0:
        if kind == _KIND_GAUSS:
            g0 = _gamma_gauss_sd(p[0], q[0], lam)
        else:
            g0 = mu[0] if lam <= 0.0 else lam
        g_prev = g0
        gmin = g0
        for n in range(1, T + 1):
            if kind == _KIND_GAUSS:
                g = _gamma_gauss_sd(p[n], q[n], lam)
            else:
                g = mu[n] if lam <= 0.0 else lam
            v, acc, gmin = _phi_update(star, T, n, mu[n - 1], g, g_prev, g0, lam, acc, gmin)
            g_prev = g
            if v > best:
                best = v
                if early and best >= 0.0:
                    return best
        return best
    # Beta: CDF and density front carried along the path by recurrence
    a = p[0]
    b = q[0]
    cdf = betainc(a, b, lam)
    h = math.exp(log_beta_front(a, b, lam))
    m = a / (a + b)
    g0 = m + (lam - m) * cdf + h / (a + b)
    g_prev = g0
    gmin = g0
    for n in range(1, T + 1):
        if p[n] > a:
            cdf -= h / a
            h *= lam * (a + b) / a
            a += 1.0
        else:
            cdf += h / b
            h *= (1.0 - lam) * (a + b) / b
            b += 1.0
        if h < 1e-250:
            h = math.exp(log_beta_front(a, b, lam))
        if cdf < 0.0:
            cdf = 0.0
        elif cdf > 1.0:
            cdf = 1.0
        m = a / (a + b)
        g = m + (lam - m) * cdf + h / (a + b)
        v, acc, gmin = _phi_update(star, T, n, mu[n - 1], g, g_prev, g0, lam, acc, gmin)
        g_prev = g
        if v > best:
            best = v
            if early and best >= 0.0:
                return best
    return best


@njit(cache=True)
def _bisect(kind, star, mu, p, q, T, lo, hi, tol, max_iter):
    """Returns (lambda_star, iterations, status); status 0 ok, 1/2 bracket failure."""
    if _phi_scan(kind, star, mu, p, q, T, lo, True) < 0.0:
        lo -= hi - lo
        if _phi_scan(kind, star, mu, p, q, T, lo, True) < 0.0:
            return lo, 0, 1
    if _phi_scan(kind, star, mu, p, q, T, hi, True) >= 0.0:
        hi += hi - lo
        if _phi_scan(kind, star, mu, p, q, T, hi, True) >= 0.0:
            return hi, 0, 2
    it = 0
    while hi - lo >= tol and it < max_iter:
        mid = 0.5 * (lo + hi)
        if _phi_scan(kind, star, mu, p, q, T, mid, True) >= 0.0:
            lo = mid
        else:
            hi = mid
        it += 1
    return 0.5 * (lo + hi), it, 0


@njit(cache=True)
def _index_all(kind, star, means, p, q, T, lo, hi, tol, max_iter):
    K = means.shape[0]
    lam = np.empty(K)
    iters = np.empty(K, dtype=np.int64)
    status = np.zeros(K, dtype=np.int64)
    for a in range(K):
        lam[a], iters[a], status[a] = _bisect(kind, star, means[a], p[a], q[a], T,
                                              lo[a], hi[a], tol, max_iter)
    return lam, iters, status


# ---------------------------------------------------------------------------
# Public surface
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class IndexResult:
    lambda_star: float
    iterations: int


def _variant_flag(variant: str) -> bool:
    if variant == STANDARD:
        return False
    if variant == STAR:
        return True
    raise ValidationError(f"unknown index variant {variant!r}; expected 'standard' or 'star'")


def _arm_arrays(path: BeliefPath, arm: int, horizon: int):
    if path.length < horizon:
        raise ValidationError(f"trajectory has {path.length} steps, horizon {horizon} requested")
    if not 0 <= arm < path.means.shape[0]:
        raise ValidationError(f"arm index {arm} out of range")
    kind = _KIND_BETA if path.family == BETA else _KIND_GAUSS
    return (kind, np.ascontiguousarray(path.means[arm, :horizon + 1]),
            np.ascontiguousarray(path.p[arm, :horizon + 1]),
            np.ascontiguousarray(path.q[arm, :horizon + 1]))


def gamma_table(path: BeliefPath, horizon: int, lam: float, arm: int = 0) -> np.ndarray:
    """Gamma_n(lam) for n = 0..T along one arm of a belief path."""
    kind, mu, p, q = _arm_arrays(path, arm, horizon)
    out = np.empty(horizon + 1)
    _gamma_path(kind, mu, p, q, horizon, float(lam), out)
    return out


def worth_trying(path: BeliefPath, horizon: int, lam: float, arm: int = 0,
                 variant: str = STANDARD) -> tuple[bool, float]:
    """Whether the arm beats a sure payoff ``lam``; returns (phi >= 0, phi)."""
    kind, mu, p, q = _arm_arrays(path, arm, horizon)
    phi = _phi_scan(kind, _variant_flag(variant), mu, p, q, horizon, float(lam), False)
    return bool(phi >= 0.0), float(phi)


def search_bracket(path: BeliefPath) -> tuple[np.ndarray, np.ndarray]:
    K = path.means.shape[0]
    if path.family == BETA:
        return np.zeros(K), np.ones(K)
    spread = GAUSS_BRACKET * (path.q[:, 0] + path.noise_sd)
    return path.means[:, 0] - spread, path.means[:, 0] + spread


def _indices(path: BeliefPath, horizon: int, variant: str):
    star = _variant_flag(variant)
    T = int(horizon)
    if path.length < T:
        raise ValidationError(f"trajectory has {path.length} steps, horizon {T} requested")
    if T == 1 and not star:
        # phi(lam) = mu_0 - lam exactly, so the root is the current mean
        return path.means[:, 0].copy(), np.zeros(path.means.shape[0], dtype=np.int64)
    lo, hi = search_bracket(path)
    kind = _KIND_BETA if path.family == BETA else _KIND_GAUSS
    lam, iters, status = _index_all(kind, star, np.ascontiguousarray(path.means[:, :T + 1]),
                                    np.ascontiguousarray(path.p[:, :T + 1]),
                                    np.ascontiguousarray(path.q[:, :T + 1]),
                                    T, lo, hi, SEARCH_TOL, MAX_ITER)
    bad = np.nonzero(status)[0]
    if bad.size:
        a = int(bad[0])
        side = "lower" if status[a] == 1 else "upper"
        raise NumericalError(f"index search for arm {a} failed at the {side} end of the bracket "
                             f"even after widening (lam={lam[a]:.6g})")
    return lam, iters


def compute_index(path: BeliefPath, horizon: int, arm: int = 0,
                  variant: str = STANDARD) -> IndexResult:
    """Boundary of the worth-trying set for one arm, to within 1e-6."""
    if not 0 <= arm < path.means.shape[0]:
        raise ValidationError(f"arm index {arm} out of range")
    sub = BeliefPath(path.family, path.means[arm:arm + 1], path.p[arm:arm + 1],
                     path.q[arm:arm + 1],
                     None if path.noise_sd is None else path.noise_sd[arm:arm + 1])
    lam, iters = _indices(sub, horizon, variant)
    return IndexResult(float(lam[0]), int(iters[0]))


def index_decide_from_path(path: BeliefPath, horizon: int, variant: str = STANDARD) -> int:
    lam, _ = _indices(path, horizon, variant)
    return int(np.argmax(lam))


def irs_index_decide(belief: BeliefVector, horizon: int, rng, variant: str = STANDARD) -> int:
    """Sample one future, index every arm along it, play the largest index."""
    if int(horizon) != horizon or horizon < 1:
        raise ValidationError("horizon must be a positive integer")
    T = int(horizon)
    _variant_flag(variant)
    gen = as_generator(rng)
    theta = belief.sample_theta(gen)
    path = belief.path(belief.sample_rewards(theta, T, gen))
    return index_decide_from_path(path, T, variant)
