"""Monte Carlo upper bounds W^z(T, y) on the Bayes-optimal value."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .inner import DEFAULT_LATTICE_BUDGET, PenaltyKind, solve_inner
from .models import BeliefVector, expected_max_mean, sample_outcome
from .rng import RngStream


@dataclass(frozen=True)
class BoundEstimate:
    mean: float
    stderr: float
    samples: int
    penalty: PenaltyKind


def mean_and_stderr(values) -> tuple[float, float]:
    values = np.asarray(values, dtype=np.float64)
    n = values.size
    mean = float(np.mean(values))
    if n < 2:
        return mean, float("nan")
    return mean, float(np.std(values, ddof=1) / math.sqrt(n))


def nature_stream(rng: RngStream, index: int) -> RngStream:
    """Stream for the index-th sampled outcome; shared by every penalty and horizon."""
    return rng.child("nature", int(index))


def estimate_bound(penalty, horizon: int, prior: BeliefVector, samples: int, rng: RngStream,
                   budget: float = DEFAULT_LATTICE_BUDGET) -> BoundEstimate:
    """Average of the inner-problem value over ``samples`` outcomes."""
    penalty = PenaltyKind.parse(penalty)
    if int(samples) != samples or samples < 2:
        raise ValidationError("at least two samples are needed for a standard error")
    if not isinstance(rng, RngStream):
        raise ValidationError("estimate_bound needs an RngStream so outcomes can be shared")
    values = np.empty(int(samples))
    for i in range(int(samples)):
        outcome = sample_outcome(prior, horizon, nature_stream(rng, i))
        values[i] = solve_inner(penalty, outcome, horizon, prior, budget).value
    mean, se = mean_and_stderr(values)
    return BoundEstimate(mean, se, int(samples), penalty)


def regret_benchmark(horizon: int, prior: BeliefVector) -> float:
    """W^TS(T, y) = T * E[max_a theta_a], by quadrature."""
    if int(horizon) != horizon or horizon < 1:
        raise ValidationError("horizon must be a positive integer")
    return int(horizon) * expected_max_mean(prior)
