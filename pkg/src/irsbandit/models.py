"""Conjugate Bayesian arm models, outcome sampling, and belief paths.

Two families are supported: Beta priors over Bernoulli rewards, and Normal
priors over Normal rewards with a known per-arm noise variance.  A belief
vector holds the hyperparameters of every arm as arrays so that samplers and
path computations vectorize over arms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np
from scipy import special as sps

from .errors import NumericalError, ValidationError
from .rng import as_generator
from .special import (BETA_NODES, BETA_WEIGHTS, GAUSS_OFFSETS, GL16_W, GL16_X,
                      beta_emax, gauss_emax, kahan_cumsum)

BETA = "beta"
GAUSSIAN = "gaussian"


@dataclass(frozen=True)
class BetaArm:
    alpha: float
    beta: float

    def __post_init__(self):
        if not (self.alpha > 0 and self.beta > 0):
            raise ValidationError(f"Beta parameters must be positive, got ({self.alpha}, {self.beta})")

    @property
    def mean(self) -> float:
        return self.alpha / (self.alpha + self.beta)


@dataclass(frozen=True)
class GaussianArm:
    mean: float
    variance: float
    noise_variance: float

    def __post_init__(self):
        if not (self.variance > 0 and self.noise_variance > 0):
            raise ValidationError("Gaussian variances must be positive")


ArmPrior = Union[BetaArm, GaussianArm]


def _frozen(x) -> np.ndarray:
    arr = np.array(x, dtype=np.float64, copy=True).reshape(-1)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class Outcome:
    """One sampled future: true means ``theta`` and a K x T reward matrix.

    ``rewards[a, n]`` is the reward of the (n+1)-th pull of arm ``a``.
    """

    theta: np.ndarray
    rewards: np.ndarray

    @property
    def horizon(self) -> int:
        return self.rewards.shape[1]

    def truncate(self, horizon: int) -> Outcome:
        if horizon > self.horizon:
            raise ValidationError(f"outcome holds {self.horizon} rewards per arm, {horizon} requested")
        return Outcome(self.theta, self.rewards[:, :horizon])


@dataclass(frozen=True)
class BeliefPath:
    """Beliefs of every arm after n = 0..N of its own sampled rewards.

    ``means[a, n]`` is the posterior mean after n observations.  For Beta arms
    ``p``/``q`` hold alpha/beta; for Gaussian arms they hold the posterior mean
    and posterior standard deviation, and ``noise_sd`` the reward noise.
    """

    family: str
    means: np.ndarray
    p: np.ndarray
    q: np.ndarray
    noise_sd: np.ndarray | None = None

    @property
    def length(self) -> int:
        return self.means.shape[1] - 1


class BeliefVector:
    """Posterior hyperparameters of K independent arms (immutable)."""

    family: str

    @property
    def K(self) -> int:
        raise NotImplementedError

    @staticmethod
    def from_arms(arms: Sequence[ArmPrior]) -> BeliefVector:
        arms = list(arms)
        if not arms:
            raise ValidationError("a belief vector needs at least one arm")
        if all(isinstance(a, BetaArm) for a in arms):
            return BetaBelief([a.alpha for a in arms], [a.beta for a in arms])
        if all(isinstance(a, GaussianArm) for a in arms):
            return GaussianBelief([a.mean for a in arms], [a.variance for a in arms],
                                  [a.noise_variance for a in arms])
        raise ValidationError("all arms must belong to the same model family")

    def _check_arm(self, arm) -> int:
        if not (0 <= int(arm) < self.K) or int(arm) != arm:
            raise ValidationError(f"arm index {arm} out of range for K={self.K}")
        return int(arm)

    def key(self) -> tuple:
        raise NotImplementedError

    def __eq__(self, other):
        return type(self) is type(other) and self.key() == other.key()

    def __hash__(self):
        return hash((type(self).__name__, self.key()))


class BetaBelief(BeliefVector):
    family = BETA

    def __init__(self, alpha, beta):
        self.alpha = _frozen(alpha)
        self.beta = _frozen(beta)
        if self.alpha.shape != self.beta.shape or self.alpha.size == 0:
            raise ValidationError("alpha and beta must be non-empty and of equal length")
        if not (np.all(self.alpha > 0) and np.all(self.beta > 0)):
            raise ValidationError("Beta parameters must be positive")

    def __repr__(self):
        return f"BetaBelief(alpha={self.alpha.tolist()}, beta={self.beta.tolist()})"

    @property
    def K(self) -> int:
        return self.alpha.shape[0]

    @property
    def arms(self) -> list[BetaArm]:
        return [BetaArm(float(a), float(b)) for a, b in zip(self.alpha, self.beta)]

    def key(self) -> tuple:
        return (tuple(self.alpha.tolist()), tuple(self.beta.tolist()))

    def means(self) -> np.ndarray:
        return self.alpha / (self.alpha + self.beta)

    def update(self, arm: int, reward: float) -> BetaBelief:
        arm = self._check_arm(arm)
        if reward not in (0, 1):
            raise ValidationError(f"Bernoulli reward must be 0 or 1, got {reward!r}")
        alpha = self.alpha.copy()
        beta = self.beta.copy()
        alpha[arm] += reward
        beta[arm] += 1 - reward
        return BetaBelief(alpha, beta)

    def sample_theta(self, gen: np.random.Generator) -> np.ndarray:
        return gen.beta(self.alpha, self.beta)

    def sample_rewards(self, theta, horizon: int, gen: np.random.Generator) -> np.ndarray:
        # drawn as (T, K) so that a longer draw extends a shorter one
        return (gen.random((horizon, self.K)) < theta).T.astype(np.float64)

    def path(self, rewards) -> BeliefPath:
        rewards = np.asarray(rewards, dtype=np.float64)
        if rewards.size and not np.all((rewards == 0) | (rewards == 1)):
            raise ValidationError("Bernoulli rewards must be 0 or 1")
        n = np.arange(rewards.shape[1] + 1, dtype=np.float64)
        succ = np.zeros((self.K, rewards.shape[1] + 1))
        np.cumsum(rewards, axis=1, out=succ[:, 1:])
        p = self.alpha[:, None] + succ
        q = self.beta[:, None] + (n - succ)
        return BeliefPath(BETA, p / (p + q), p, q)

    def means_after(self, successes, n_obs: int) -> np.ndarray:
        return (self.alpha + successes) / (self.alpha + self.beta + n_obs)

    def sample_fh_means(self, n_obs: int, gen: np.random.Generator) -> np.ndarray:
        if n_obs == 0:
            return self.means()
        theta = gen.beta(self.alpha, self.beta)
        return self.means_after(gen.binomial(n_obs, theta), n_obs)

    def expected_max_mean(self) -> float:
        return beta_emax(self.alpha, self.beta, BETA_NODES, BETA_WEIGHTS)

    def quantile(self, q: float) -> np.ndarray:
        return sps.betaincinv(self.alpha, self.beta, q)


class GaussianBelief(BeliefVector):
    family = GAUSSIAN

    def __init__(self, mean, variance, noise_variance):
        self.mean = _frozen(mean)
        self.variance = _frozen(variance)
        self.noise_variance = _frozen(noise_variance)
        if not (self.mean.shape == self.variance.shape == self.noise_variance.shape) or self.mean.size == 0:
            raise ValidationError("mean, variance and noise_variance must be non-empty and of equal length")
        if not (np.all(self.variance > 0) and np.all(self.noise_variance > 0)):
            raise ValidationError("Gaussian variances must be positive")

    def __repr__(self):
        return (f"GaussianBelief(mean={self.mean.tolist()}, variance={self.variance.tolist()}, "
                f"noise_variance={self.noise_variance.tolist()})")

    @property
    def K(self) -> int:
        return self.mean.shape[0]

    @property
    def arms(self) -> list[GaussianArm]:
        return [GaussianArm(float(m), float(v), float(s))
                for m, v, s in zip(self.mean, self.variance, self.noise_variance)]

    def key(self) -> tuple:
        return (tuple(self.mean.tolist()), tuple(self.variance.tolist()),
                tuple(self.noise_variance.tolist()))

    def means(self) -> np.ndarray:
        return self.mean.copy()

    def update(self, arm: int, reward: float) -> GaussianBelief:
        arm = self._check_arm(arm)
        if not math.isfinite(reward):
            raise ValidationError(f"reward must be finite, got {reward!r}")
        v = self.variance[arm]
        s2 = self.noise_variance[arm]
        mean = self.mean.copy()
        var = self.variance.copy()
        # precision form: 1/var' = 1/var + 1/s2
        mean[arm] = self.mean[arm] + v * (reward - self.mean[arm]) / (s2 + v)
        var[arm] = v * s2 / (s2 + v)
        return GaussianBelief(mean, var, self.noise_variance)

    def sample_theta(self, gen: np.random.Generator) -> np.ndarray:
        return self.mean + np.sqrt(self.variance) * gen.standard_normal(self.K)

    def sample_rewards(self, theta, horizon: int, gen: np.random.Generator) -> np.ndarray:
        noise = gen.standard_normal((horizon, self.K)).T
        return theta[:, None] + np.sqrt(self.noise_variance)[:, None] * noise

    def path(self, rewards) -> BeliefPath:
        rewards = np.asarray(rewards, dtype=np.float64)
        if not np.all(np.isfinite(rewards)):
            raise ValidationError("rewards must be finite")
        K, T = rewards.shape
        n = np.arange(T + 1, dtype=np.float64)
        sums = np.empty((K, T + 1))
        for a in range(K):
            sums[a] = kahan_cumsum(rewards[a])
        v = self.variance[:, None]
        s2 = self.noise_variance[:, None]
        m = self.mean[:, None]
        denom = s2 + n * v
        means = m + v * (sums - n * m) / denom
        means[:, 0] = self.mean
        sd = np.sqrt(v * s2 / denom)
        return BeliefPath(GAUSSIAN, means, means, sd, np.sqrt(self.noise_variance))

    def means_after(self, sums, n_obs: int) -> np.ndarray:
        v = self.variance
        return self.mean + v * (sums - n_obs * self.mean) / (self.noise_variance + n_obs * v)

    def sample_fh_means(self, n_obs: int, gen: np.random.Generator) -> np.ndarray:
        if n_obs == 0:
            return self.means()
        theta = self.sample_theta(gen)
        sums = n_obs * theta + np.sqrt(n_obs * self.noise_variance) * gen.standard_normal(self.K)
        return self.means_after(sums, n_obs)

    def expected_max_mean(self) -> float:
        return gauss_emax(self.mean, np.sqrt(self.variance), GAUSS_OFFSETS, GL16_X, GL16_W)

    def quantile(self, q: float) -> np.ndarray:
        return self.mean + np.sqrt(self.variance) * sps.ndtri(q)


def _single(prior: ArmPrior) -> BeliefVector:
    if isinstance(prior, BeliefVector):
        if prior.K != 1:
            raise ValidationError("expected a single arm")
        return prior
    return BeliefVector.from_arms([prior])


# ---------------------------------------------------------------------------
# Functional surface
# ---------------------------------------------------------------------------

def update(belief: BeliefVector, arm: int, reward: float) -> BeliefVector:
    return belief.update(arm, reward)


def posterior_mean(belief: BeliefVector, arm: int) -> float:
    return float(belief.means()[belief._check_arm(arm)])


def sample_outcome(belief: BeliefVector, horizon: int, rng) -> Outcome:
    """Draw theta from the prior, then ``horizon`` i.i.d. rewards per arm."""
    if horizon < 1:
        raise ValidationError("horizon must be at least 1")
    gen = as_generator(rng)
    theta = belief.sample_theta(gen)
    return Outcome(theta, belief.sample_rewards(theta, horizon, gen))


def mean_trajectory(prior: ArmPrior, rewards) -> np.ndarray:
    """Posterior means of one arm after 0..T of the given rewards."""
    rewards = np.asarray(rewards, dtype=np.float64).reshape(1, -1)
    return _single(prior).path(rewards).means[0]


def sample_fh_mean(prior: ArmPrior, n_obs: int, rng) -> float:
    """One draw of the posterior mean after ``n_obs`` simulated observations.

    Samples theta, then the sufficient statistic of the n_obs rewards, so the
    cost does not grow with n_obs.
    """
    if n_obs < 0:
        raise ValidationError("n_obs must be non-negative")
    return float(_single(prior).sample_fh_means(int(n_obs), as_generator(rng))[0])


def expected_max_mean(belief: BeliefVector) -> float:
    """E[max_a theta_a] under the belief, by deterministic quadrature."""
    value = belief.expected_max_mean()
    if not math.isfinite(value):
        raise NumericalError("quadrature for E[max theta] did not converge")
    return value
