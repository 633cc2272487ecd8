"""Exact Bayes-optimal policy for Beta-Bernoulli bandits by backward induction.

The belief after t pulls is fixed by the success and failure counts of every
arm.  For two arms a state at time t is (n1, s1, s2): pulls of arm 0, its
successes, and the successes of arm 1 (which has t - n1 pulls).  Layers are
processed from t = T-1 down to 0 and one int8 action per state is kept, so
T = 200 needs about 70 MB.  Values are kept only for small instances.
"""

from __future__ import annotations

import math
import sys
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .errors import BudgetExceededError, ValidationError
from .models import BetaBelief, BeliefVector

DEFAULT_STATE_BUDGET = 2e8
GENERIC_STATE_BUDGET = 2e6
VALUE_TABLE_LIMIT = 5e6


def state_count(K: int, T: int) -> int:
    """Number of (success, failure) count vectors reachable within T pulls."""
    return math.comb(T + 2 * K, 2 * K)


@njit(cache=True)
def _layer_offsets(t):
    off = np.empty(t + 2, dtype=np.int64)
    acc = 0
    for n1 in range(t + 1):
        off[n1] = acc
        acc += (n1 + 1) * (t - n1 + 1)
    off[t + 1] = acc
    return off


@njit(cache=True)
def _dp2(a1, b1, a2, b2, T, keep_values):
    """Backward induction for two Beta arms.

    Returns (root value, flat action table, layer starts, flat value table).
    """
    starts = np.empty(T + 2, dtype=np.int64)
    acc = 0
    for t in range(T + 1):
        starts[t] = acc
        acc += (t + 1) * (t + 2) * (t + 3) // 6
    starts[T + 1] = acc
    actions = np.zeros(starts[T], dtype=np.int8)
    if keep_values:
        values = np.zeros(acc)
    else:
        values = np.zeros(1)
    nxt = np.zeros((T + 1) * (T + 2) * (T + 3) // 6)
    cur = np.zeros_like(nxt)
    for t in range(T - 1, -1, -1):
        off = _layer_offsets(t)
        off_n = _layer_offsets(t + 1)
        w_n = t + 1
        for n1 in range(t + 1):
            n2 = t - n1
            w = n2 + 1
            for s1 in range(n1 + 1):
                p1 = (a1 + s1) / (a1 + b1 + n1)
                # arm 0 pulled: state (n1 + 1, s1 or s1 + 1, s2)
                w0 = w_n - (n1 + 1) + 1
                base0 = off_n[n1 + 1]
                # arm 1 pulled: state (n1, s1, s2 or s2 + 1)
                base1 = off_n[n1] + s1 * (w_n - n1 + 1)
                for s2 in range(n2 + 1):
                    p2 = (a2 + s2) / (a2 + b2 + n2)
                    q0 = p1 * (1.0 + nxt[base0 + (s1 + 1) * w0 + s2]) \
                        + (1.0 - p1) * nxt[base0 + s1 * w0 + s2]
                    q1 = p2 * (1.0 + nxt[base1 + s2 + 1]) + (1.0 - p2) * nxt[base1 + s2]
                    idx = off[n1] + s1 * w + s2
                    if q1 > q0:
                        cur[idx] = q1
                        actions[starts[t] + idx] = 1
                    else:
                        cur[idx] = q0
                    if keep_values:
                        values[starts[t] + idx] = cur[idx]
        nxt, cur = cur, nxt
    return nxt[0], actions, starts, values


@dataclass
class DpSolution:
    """Optimal value and greedy action table over reachable beliefs.

    ``value`` is V*(T, y) at the root.  ``action(belief)`` and
    ``state_value(belief)`` look up any belief reachable from the prior.
    """

    horizon: int
    prior: BetaBelief
    value: float
    root_action: int
    _actions: np.ndarray | None = field(default=None, repr=False)
    _starts: np.ndarray | None = field(default=None, repr=False)
    _values: np.ndarray | None = field(default=None, repr=False)
    _memo: dict | None = field(default=None, repr=False)

    def _counts(self, belief: BeliefVector):
        if not isinstance(belief, BetaBelief) or belief.K != self.prior.K:
            raise ValidationError("belief does not belong to this problem")
        s = belief.alpha - self.prior.alpha
        f = belief.beta - self.prior.beta
        si = np.rint(s).astype(np.int64)
        fi = np.rint(f).astype(np.int64)
        if (np.any(np.abs(s - si) > 1e-9) or np.any(np.abs(f - fi) > 1e-9)
                or np.any(si < 0) or np.any(fi < 0) or si.sum() + fi.sum() > self.horizon):
            raise ValidationError("belief is not reachable from the prior within the horizon")
        return si, fi

    def _flat_index(self, si, fi):
        n1 = int(si[0] + fi[0])
        n2 = int(si[1] + fi[1])
        t = n1 + n2
        off = _layer_offsets(t)
        return t, int(self._starts[t] + off[n1] + si[0] * (n2 + 1) + si[1])

    def action(self, belief: BeliefVector) -> int:
        si, fi = self._counts(belief)
        if int(si.sum() + fi.sum()) >= self.horizon:
            raise ValidationError("no decisions remain at this belief")
        if self._memo is not None:
            return _generic_solve(self, tuple(si), tuple(fi))[1]
        _, idx = self._flat_index(si, fi)
        return int(self._actions[idx])

    def state_value(self, belief: BeliefVector) -> float:
        """Optimal expected reward still to come from ``belief``."""
        si, fi = self._counts(belief)
        if int(si.sum() + fi.sum()) == self.horizon:
            return 0.0
        if self._memo is not None:
            return _generic_solve(self, tuple(si), tuple(fi))[0]
        if self._values is None:
            raise ValidationError("value table not kept for an instance this large")
        _, idx = self._flat_index(si, fi)
        return float(self._values[idx])


def _generic_solve(sol: DpSolution, s: tuple, f: tuple):
    key = s + f
    hit = sol._memo.get(key)
    if hit is not None:
        return hit
    t = sum(s) + sum(f)
    if t == sol.horizon:
        res = (0.0, -1)
        sol._memo[key] = res
        return res
    alpha = sol.prior.alpha
    beta = sol.prior.beta
    best = -np.inf
    arg = -1
    for a in range(len(s)):
        n_a = s[a] + f[a]
        p = (alpha[a] + s[a]) / (alpha[a] + beta[a] + n_a)
        s_up = s[:a] + (s[a] + 1,) + s[a + 1:]
        f_up = f[:a] + (f[a] + 1,) + f[a + 1:]
        q = p * (1.0 + _generic_solve(sol, s_up, f)[0]) + (1.0 - p) * _generic_solve(sol, s, f_up)[0]
        if q > best:
            best = q
            arg = a
    res = (float(best), arg)
    sol._memo[key] = res
    return res


def opt_dp(horizon: int, prior: BeliefVector, budget: float | None = None) -> DpSolution:
    """Solve the Bellman equations exactly for independent Beta arms."""
    if not isinstance(prior, BetaBelief):
        raise ValidationError("the exact DP supports Beta-Bernoulli arms only")
    if int(horizon) != horizon or horizon < 1:
        raise ValidationError("horizon must be a positive integer")
    T = int(horizon)
    K = prior.K
    states = state_count(K, T)
    if K == 2:
        limit = DEFAULT_STATE_BUDGET if budget is None else budget
        if states > limit:
            raise BudgetExceededError(
                f"exact DP for K=2, T={T} needs {states:.3g} states (budget {limit:.3g})")
        keep = states <= VALUE_TABLE_LIMIT
        value, actions, starts, values = _dp2(float(prior.alpha[0]), float(prior.beta[0]),
                                              float(prior.alpha[1]), float(prior.beta[1]), T, keep)
        return DpSolution(T, prior, float(value), int(actions[0]), actions, starts,
                          values if keep else None)
    limit = GENERIC_STATE_BUDGET if budget is None else budget
    if states > limit:
        raise BudgetExceededError(
            f"exact DP for K={K}, T={T} needs {states:.3g} states (budget {limit:.3g})")
    sol = DpSolution(T, prior, 0.0, 0, _memo={})
    zeros = (0,) * K
    old = sys.getrecursionlimit()
    sys.setrecursionlimit(max(old, 4 * T + 1000))
    try:
        value, arm = _generic_solve(sol, zeros, zeros)
    finally:
        sys.setrecursionlimit(old)
    sol.value = value
    sol.root_action = arm
    return sol
