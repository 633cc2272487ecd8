"""Clairvoyant inner problems under the TS, FH, V-Zero and V-EMax penalties.

Each solver takes one sampled outcome (true parameters plus every future
reward) and returns the best action plan for the penalized objective, its
value, and the first action that an IRS policy would play.  Arms are indexed
from zero and every tie goes to the lowest arm index.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from .errors import BudgetExceededError, ValidationError
from .models import BETA, BeliefPath, BeliefVector, Outcome
from .special import (BETA_NODES, BETA_WEIGHTS, GAUSS_OFFSETS, GL16_W, GL16_X,
                      beta_cdf_walk, gauss_emax)

DEFAULT_LATTICE_BUDGET = 5e7


class PenaltyKind(str, enum.Enum):
    TS = "ts"
    IRS_FH = "irs-fh"
    IRS_V_ZERO = "irs-v-zero"
    IRS_V_EMAX = "irs-v-emax"

    @classmethod
    def parse(cls, value) -> PenaltyKind:
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            names = ", ".join(p.value for p in cls)
            raise ValidationError(f"unknown penalty {value!r}; expected one of {names}") from None


@dataclass(frozen=True)
class InnerSolution:
    """Optimal plan of one inner problem.

    ``allocation`` holds the pull count of every arm (sums to the horizon);
    ``actions`` the full ordered plan when the solver produces one.
    """

    first_action: int
    value: float
    allocation: np.ndarray
    actions: np.ndarray | None = None


def _check_horizon(horizon) -> int:
    if int(horizon) != horizon or horizon < 1:
        raise ValidationError(f"horizon must be a positive integer, got {horizon!r}")
    return int(horizon)


def _need_rewards(outcome: Outcome, count: int) -> None:
    if outcome.rewards.shape[1] < count:
        raise ValidationError(
            f"outcome holds {outcome.rewards.shape[1]} rewards per arm, {count} required")


def _single_arm_plan(K: int, arm: int, horizon: int) -> np.ndarray:
    alloc = np.zeros(K, dtype=np.int64)
    alloc[arm] = horizon
    return alloc


# ---------------------------------------------------------------------------
# TS and FH: the best arm is fixed in advance
# ---------------------------------------------------------------------------

def solve_ts(outcome: Outcome, horizon: int) -> InnerSolution:
    """Pull the arm with the largest true mean every period."""
    T = _check_horizon(horizon)
    theta = np.asarray(outcome.theta, dtype=np.float64)
    arm = int(np.argmax(theta))
    return InnerSolution(arm, T * float(theta[arm]), _single_arm_plan(theta.size, arm, T))


def fh_choice(final_means: np.ndarray, horizon: int) -> tuple[int, float]:
    arm = int(np.argmax(final_means))
    return arm, horizon * float(final_means[arm])


def solve_fh(outcome: Outcome, horizon: int, prior: BeliefVector) -> InnerSolution:
    """Pull the arm whose mean after T-1 of its own rewards is largest."""
    T = _check_horizon(horizon)
    _need_rewards(outcome, T - 1)
    if prior.K != outcome.rewards.shape[0]:
        raise ValidationError("outcome and prior disagree on the number of arms")
    path = prior.path(outcome.rewards[:, :T - 1])
    arm, value = fh_choice(path.means[:, T - 1], T)
    return InnerSolution(arm, value, _single_arm_plan(prior.K, arm, T))


# ---------------------------------------------------------------------------
# V-Zero: separable allocation problem, solved by repeated sup-convolution
# ---------------------------------------------------------------------------

@njit(cache=True)
def vzero_kernel(means, T):
    """Maximize sum_a S[a, n_a] over allocations summing to T.

    ``means[a, m]`` is the mean of arm a after m of its rewards; S[a, n] is
    the sequential sum of its first n entries.  Returns (counts, S).  Ties
    prefer fewer pulls of the later arm.
    """
    K = means.shape[0]
    S = np.empty((K, T + 1))
    for a in range(K):
        s = 0.0
        S[a, 0] = 0.0
        for m in range(T):
            s += means[a, m]
            S[a, m + 1] = s
    prev = np.full(T + 1, -np.inf)
    prev[0] = 0.0
    cur = np.empty(T + 1)
    choice = np.empty((K, T + 1), dtype=np.int64)
    for a in range(K):
        for n in range(T + 1):
            best = prev[n] + S[a, 0]
            arg = 0
            for m in range(1, n + 1):
                v = prev[n - m] + S[a, m]
                if v > best:
                    best = v
                    arg = m
            cur[n] = best
            choice[a, n] = arg
        prev, cur = cur, prev
    counts = np.empty(K, dtype=np.int64)
    rest = T
    for a in range(K - 1, -1, -1):
        counts[a] = choice[a, rest]
        rest -= counts[a]
    return counts, S


def _trajectory_array(trajectory) -> np.ndarray:
    if isinstance(trajectory, BeliefPath):
        return trajectory.means
    arr = np.asarray(trajectory, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[None, :]
    return arr


def solve_vzero(trajectory, horizon: int) -> InnerSolution:
    """Optimal allocation when every pull earns the current posterior mean.

    ``trajectory`` is a K x (>= T) array (or a BeliefPath) of posterior means
    after 0, 1, ... observations of each arm.  The first action is the arm
    with the most pulls in the optimal allocation.
    """
    T = _check_horizon(horizon)
    means = _trajectory_array(trajectory)
    if means.shape[1] < T:
        raise ValidationError(f"trajectory needs at least {T} entries per arm")
    counts, S = vzero_kernel(np.ascontiguousarray(means[:, :T]), T)
    # correctly rounded, so the value does not depend on arm order
    value = math.fsum(S[a, counts[a]] for a in range(counts.size))
    return InnerSolution(int(np.argmax(counts)), value, counts)


# ---------------------------------------------------------------------------
# V-EMax: dynamic program over the pull-count lattice
# ---------------------------------------------------------------------------

def lattice_size(K: int, T: int) -> int:
    """Number of count vectors with K entries summing to at most T."""
    return math.comb(T + K, K)


def lattice_cost(K: int, T: int) -> int:
    return K * lattice_size(K, T)


@njit(cache=True)
def _next_tuple(n, T, s):
    """Lexicographic successor within {sum <= T}; returns new sum or -1."""
    j = n.shape[0] - 1
    while j >= 0:
        if s < T:
            n[j] += 1
            return s + 1
        s -= n[j]
        n[j] = 0
        j -= 1
    return -1


@njit(cache=True)
def _rank_tables(K, T):
    # G[j, r, v] = number of tuples that precede value v in slot j with budget r
    cnt = np.zeros((K + 1, T + 1), dtype=np.int64)
    for r in range(T + 1):
        cnt[0, r] = 1
    for L in range(1, K + 1):
        acc = 0
        for r in range(T + 1):
            acc += cnt[L - 1, r]
            cnt[L, r] = acc
    G = np.zeros((K, T + 1, T + 2), dtype=np.int64)
    for j in range(K):
        L = K - j - 1
        for r in range(T + 1):
            acc = 0
            for v in range(r + 1):
                G[j, r, v] = acc
                acc += cnt[L, r - v]
            G[j, r, r + 1] = acc
    return G


@njit(cache=True)
def _rank(n, G, T):
    r = T
    idx = 0
    for j in range(n.shape[0]):
        idx += G[j, r, n[j]]
        r -= n[j]
    return idx


@njit(cache=True)
def _beta_gamma_tables(alpha_path, beta_path, T, nodes):
    """CDF of every arm's belief n = 0..T-1 at each quadrature node."""
    K = alpha_path.shape[0]
    J = nodes.shape[0]
    cdf = np.empty((K, T, J))
    tmp_c = np.empty(T)
    tmp_f = np.empty(T)
    for a in range(K):
        for j in range(J):
            beta_cdf_walk(nodes[j], alpha_path[a, :T], beta_path[a, :T], tmp_c, tmp_f)
            for n in range(T):
                cdf[a, n, j] = tmp_c[n]
    return cdf


@njit(cache=True)
def _vemax_kernel(means, gamma_kind, p, q, T, nodes, weights, offsets, glx, glw):
    """Lattice DP; gamma_kind 0 = Beta CDF tables, 1 = Gaussian, 2 = K=1."""
    K = means.shape[0]
    G = _rank_tables(K, T)
    size = G[0, T, T + 1]
    gam = np.zeros(size)
    M = np.full(size, -np.inf)
    A = np.full(size, -1, dtype=np.int64)
    if gamma_kind == 0 and T > 1:
        cdf = _beta_gamma_tables(p, q, T, nodes)
    else:
        cdf = np.empty((1, 1, 1))
    mm = np.empty(K)
    ss = np.empty(K)
    n = np.zeros(K, dtype=np.int64)
    s = 0
    idx = 0
    while s >= 0:
        # Gamma only enters through (T - sum - 1) factors, which vanish for sum >= T - 1
        if s <= T - 1 and T > 1:
            if gamma_kind == 0:
                total = 0.0
                for j in range(nodes.shape[0]):
                    prod = 1.0
                    for a in range(K):
                        prod *= cdf[a, n[a], j]
                    total += weights[j] * (1.0 - prod)
                gam[idx] = total
            elif gamma_kind == 1:
                for a in range(K):
                    mm[a] = p[a, n[a]]
                    ss[a] = q[a, n[a]]
                gam[idx] = gauss_emax(mm, ss, offsets, glx, glw)
            else:
                gam[idx] = means[0, n[0]]
        if s == 0:
            M[idx] = 0.0
        else:
            best = -np.inf
            arg = -1
            for a in range(K):
                if n[a] == 0:
                    continue
                n[a] -= 1
                pidx = _rank(n, G, T)
                n[a] += 1
                v = M[pidx] + means[a, n[a] - 1]
                if s < T:
                    v += (T - s) * (gam[pidx] - gam[idx])
                if v > best:
                    best = v
                    arg = a
            M[idx] = best
            A[idx] = arg
        s = _next_tuple(n, T, s)
        idx += 1
    # best terminal count vector; ties favour the lexicographically larger one
    best = -np.inf
    best_n = np.zeros(K, dtype=np.int64)
    n[:] = 0
    s = 0
    idx = 0
    while s >= 0:
        if s == T and M[idx] >= best:
            best = M[idx]
            best_n[:] = n
        s = _next_tuple(n, T, s)
        idx += 1
    actions = np.empty(T, dtype=np.int64)
    n[:] = best_n
    for t in range(T - 1, -1, -1):
        a = A[_rank(n, G, T)]
        actions[t] = a
        n[a] -= 1
    return best, best_n, actions


def vemax_from_path(path: BeliefPath, T: int, budget: float = DEFAULT_LATTICE_BUDGET):
    K = path.means.shape[0]
    cost = lattice_cost(K, T)
    if cost > budget:
        raise BudgetExceededError(
            f"V-EMax lattice for K={K}, T={T} needs {cost:.3g} cell operations "
            f"(budget {budget:.3g}); instance too large")
    means = np.ascontiguousarray(path.means[:, :T + 1])
    if K == 1:
        kind = 2
    elif path.family == BETA:
        kind = 0
    else:
        kind = 1
    return _vemax_kernel(means, kind, np.ascontiguousarray(path.p[:, :T + 1]),
                         np.ascontiguousarray(path.q[:, :T + 1]), T,
                         BETA_NODES, BETA_WEIGHTS, GAUSS_OFFSETS, GL16_X, GL16_W)


def solve_vemax(outcome: Outcome, horizon: int, prior: BeliefVector,
                budget: float = DEFAULT_LATTICE_BUDGET) -> InnerSolution:
    """Exact inner problem under the V-EMax penalty.

    The value-to-go of each belief is replaced by the Thompson-sampling bound
    (remaining periods times E[max theta]).  Raises BudgetExceededError when
    K * C(T+K, K) exceeds ``budget``.
    """
    T = _check_horizon(horizon)
    _need_rewards(outcome, T)
    path = prior.path(outcome.rewards[:, :T])
    value, counts, actions = vemax_from_path(path, T, budget)
    return InnerSolution(int(actions[0]), float(value), counts, actions)


def inner_value(penalty, outcome: Outcome, horizon: int, prior: BeliefVector) -> float:
    return solve_inner(penalty, outcome, horizon, prior).value


def solve_inner(penalty, outcome: Outcome, horizon: int, prior: BeliefVector,
                budget: float = DEFAULT_LATTICE_BUDGET) -> InnerSolution:
    penalty = PenaltyKind.parse(penalty)
    if penalty is PenaltyKind.TS:
        return solve_ts(outcome, horizon)
    if penalty is PenaltyKind.IRS_FH:
        return solve_fh(outcome, horizon, prior)
    if penalty is PenaltyKind.IRS_V_ZERO:
        T = _check_horizon(horizon)
        _need_rewards(outcome, T - 1)
        return solve_vzero(prior.path(outcome.rewards[:, :T - 1]), T)
    return solve_vemax(outcome, horizon, prior, budget)
