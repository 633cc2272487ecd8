"""Information relaxation sampling policies and bounds for Bayesian bandits."""

from .bounds import BoundEstimate, estimate_bound, regret_benchmark
from .dp import DpSolution, opt_dp
from .errors import BudgetExceededError, NumericalError, ValidationError
from .harness import ExperimentConfig, RegretTable, export, run_experiment
from .index import (IndexResult, compute_index, gamma_beta, gamma_gauss, irs_index_decide,
                    worth_trying)
from .inner import (InnerSolution, PenaltyKind, inner_value, solve_fh, solve_ts, solve_vemax,
                    solve_vzero)
from .models import (BeliefPath, BeliefVector, BetaArm, BetaBelief, GaussianArm, GaussianBelief,
                     Outcome, expected_max_mean, mean_trajectory, posterior_mean, sample_fh_mean,
                     sample_outcome, update)
from .policies import EpisodeRecord, PolicyKind, bayes_ucb_decide, decide, run_episode
from .rng import RngStream

__all__ = [
    "BeliefPath", "BeliefVector", "BetaArm", "BetaBelief", "BoundEstimate", "BudgetExceededError",
    "DpSolution", "EpisodeRecord", "ExperimentConfig", "GaussianArm", "GaussianBelief",
    "IndexResult", "InnerSolution", "NumericalError", "Outcome", "PenaltyKind", "PolicyKind",
    "RegretTable", "RngStream", "ValidationError", "bayes_ucb_decide", "compute_index", "decide",
    "estimate_bound", "expected_max_mean", "export", "gamma_beta", "gamma_gauss", "inner_value",
    "irs_index_decide", "mean_trajectory", "opt_dp", "posterior_mean", "regret_benchmark",
    "run_episode", "run_experiment", "sample_fh_mean", "sample_outcome", "solve_fh", "solve_ts",
    "solve_vemax", "solve_vzero", "update", "worth_trying",
]
