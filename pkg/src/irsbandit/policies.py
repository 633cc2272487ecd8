"""Sequential policies: IRS decisions, Bayes-UCB, and the exact optimum.

An IRS policy draws one synthetic future from the current belief at every
decision epoch, solves the inner problem for it, and plays its first action.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .dp import DpSolution, opt_dp
from .errors import ValidationError
from .index import STANDARD, STAR, index_decide_from_path
from .inner import DEFAULT_LATTICE_BUDGET, fh_choice, vemax_from_path, vzero_kernel
from .models import BeliefVector, Outcome
from .rng import as_generator

UCB_Q_MIN = 0.5
UCB_Q_MAX = 1.0 - 1e-12


class PolicyKind(str, enum.Enum):
    TS = "ts"
    IRS_FH = "irs-fh"
    IRS_V_ZERO = "irs-v-zero"
    IRS_V_EMAX = "irs-v-emax"
    IRS_INDEX = "irs-index"
    IRS_INDEX_STAR = "irs-index-star"
    BAYES_UCB = "bayes-ucb"
    OPT = "opt"

    @classmethod
    def parse(cls, value) -> PolicyKind:
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            names = ", ".join(p.value for p in cls)
            raise ValidationError(f"unknown policy {value!r}; expected one of {names}") from None


@dataclass(frozen=True)
class EpisodeRecord:
    actions: np.ndarray
    rewards: np.ndarray
    realized_mean_payoff: float


@lru_cache(maxsize=4)
def _cached_dp(horizon: int, prior: BeliefVector) -> DpSolution:
    return opt_dp(horizon, prior)


def bayes_ucb_decide(belief: BeliefVector, t: int) -> int:
    """Arm with the largest posterior quantile at level 1 - 1/t (clamped)."""
    if int(t) != t or t < 1:
        raise ValidationError("epoch index t must be a positive integer")
    q = min(max(1.0 - 1.0 / t, UCB_Q_MIN), UCB_Q_MAX)
    return int(np.argmax(belief.quantile(q)))


def decide(policy, remaining: int, belief: BeliefVector, rng, *, t: int = 1,
           budget: float = DEFAULT_LATTICE_BUDGET) -> int:
    """One decision with ``remaining`` periods left (this one included).

    ``t`` is the current epoch and matters only for Bayes-UCB.
    """
    policy = PolicyKind.parse(policy)
    if int(remaining) != remaining or remaining < 1:
        raise ValidationError("remaining must be a positive integer")
    R = int(remaining)
    if policy is PolicyKind.BAYES_UCB:
        return bayes_ucb_decide(belief, t)
    if policy is PolicyKind.OPT:
        return _cached_dp(R, belief).root_action
    gen = as_generator(rng)
    if policy is PolicyKind.TS:
        return int(np.argmax(belief.sample_theta(gen)))
    if policy is PolicyKind.IRS_FH:
        return fh_choice(belief.sample_fh_means(R - 1, gen), R)[0]
    theta = belief.sample_theta(gen)
    if policy is PolicyKind.IRS_V_ZERO:
        path = belief.path(belief.sample_rewards(theta, R - 1, gen))
        counts, _ = vzero_kernel(path.means, R)
        return int(np.argmax(counts))
    path = belief.path(belief.sample_rewards(theta, R, gen))
    if policy is PolicyKind.IRS_V_EMAX:
        return int(vemax_from_path(path, R, budget)[2][0])
    variant = STAR if policy is PolicyKind.IRS_INDEX_STAR else STANDARD
    return index_decide_from_path(path, R, variant)


def run_episode(policy, horizon: int, prior: BeliefVector, nature: Outcome, rng,
                budget: float = DEFAULT_LATTICE_BUDGET) -> EpisodeRecord:
    """Play ``horizon`` periods against a fixed nature outcome.

    The n-th pull of arm a receives ``nature.rewards[a, n]``; the payoff is
    the sum of the true means of the arms played.
    """
    policy = PolicyKind.parse(policy)
    if int(horizon) != horizon or horizon < 1:
        raise ValidationError("horizon must be a positive integer")
    T = int(horizon)
    if nature.rewards.shape[0] != prior.K:
        raise ValidationError("nature outcome and prior disagree on the number of arms")
    if nature.rewards.shape[1] < T:
        raise ValidationError(f"nature holds {nature.rewards.shape[1]} rewards per arm, {T} needed")
    gen = as_generator(rng)
    dp = _cached_dp(T, prior) if policy is PolicyKind.OPT else None
    pulls = np.zeros(prior.K, dtype=np.int64)
    actions = np.empty(T, dtype=np.int64)
    rewards = np.empty(T)
    theta = np.asarray(nature.theta, dtype=np.float64)
    belief = prior
    payoff = 0.0
    for step in range(T):
        if dp is not None:
            arm = dp.action(belief)
        else:
            arm = decide(policy, T - step, belief, gen, t=step + 1, budget=budget)
        r = float(nature.rewards[arm, pulls[arm]])
        pulls[arm] += 1
        actions[step] = arm
        rewards[step] = r
        payoff += theta[arm]
        belief = belief.update(arm, r)
    return EpisodeRecord(actions, rewards, float(payoff))
