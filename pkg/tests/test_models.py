"""Conjugate updates, outcome sampling, trajectories and E[max theta]."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from irsbandit.errors import ValidationError
from irsbandit.models import (BetaArm, BetaBelief, BeliefVector, GaussianArm, GaussianBelief,
                              expected_max_mean, mean_trajectory, posterior_mean, sample_fh_mean,
                              sample_outcome, update)
from irsbandit.rng import RngStream

pos = st.floats(0.1, 50.0)


class TestUpdate:
    def test_beta_success(self):
        b = update(BetaBelief([1.0], [1.0]), 0, 1)
        assert b == BetaBelief([2.0], [1.0])

    def test_beta_failure(self):
        assert update(BetaBelief([3.0], [2.0]), 0, 0) == BetaBelief([3.0], [3.0])

    def test_gaussian(self):
        g = update(GaussianBelief([0.0], [1.0], [1.0]), 0, 0.0)
        assert g == GaussianBelief([0.0], [0.5], [1.0])

    def test_gaussian_precision_weighting(self):
        g = update(GaussianBelief([1.0], [2.0], [0.5]), 0, 3.0)
        prec = 1 / 2.0 + 1 / 0.5
        assert g.variance[0] == pytest.approx(1 / prec, rel=1e-14)
        assert g.mean[0] == pytest.approx((1.0 / 2.0 + 3.0 / 0.5) / prec, rel=1e-14)

    def test_gaussian_monte_carlo_posterior(self):
        # condition on a reward near r by rejection and compare to the closed form
        rng = np.random.default_rng(0)
        theta = rng.normal(0.0, 1.0, 2_000_000)
        r = theta + rng.normal(0.0, 1.0, theta.size)
        sel = theta[np.abs(r - 0.8) < 0.01]
        post = update(GaussianBelief([0.0], [1.0], [1.0]), 0, 0.8)
        se = sel.std() / math.sqrt(sel.size)
        assert abs(sel.mean() - post.mean[0]) < 4 * se
        assert sel.var() == pytest.approx(post.variance[0], rel=0.05)

    def test_only_target_arm_changes(self):
        b = BetaBelief([1.0, 2.0, 3.0], [4.0, 5.0, 6.0])
        nb = b.update(1, 1)
        assert nb.alpha.tolist() == [1.0, 3.0, 3.0]
        assert nb.beta.tolist() == [4.0, 5.0, 6.0]
        assert b.alpha.tolist() == [1.0, 2.0, 3.0]

    @pytest.mark.parametrize("arm", [-1, 2, 1.5])
    def test_bad_arm(self, arm):
        with pytest.raises(ValidationError):
            BetaBelief([1.0, 1.0], [1.0, 1.0]).update(arm, 1)

    def test_non_binary_reward(self):
        with pytest.raises(ValidationError):
            BetaBelief([1.0], [1.0]).update(0, 0.5)

    def test_invalid_parameters(self):
        with pytest.raises(ValidationError):
            BetaBelief([0.0], [1.0])
        with pytest.raises(ValidationError):
            GaussianBelief([0.0], [1.0], [-1.0])
        with pytest.raises(ValidationError):
            BetaArm(1.0, -2.0)

    def test_mixed_families_rejected(self):
        with pytest.raises(ValidationError):
            BeliefVector.from_arms([BetaArm(1, 1), GaussianArm(0, 1, 1)])

    def test_from_arms(self):
        b = BeliefVector.from_arms([BetaArm(1, 2), BetaArm(3, 4)])
        assert b == BetaBelief([1, 3], [2, 4])
        g = BeliefVector.from_arms([GaussianArm(0, 1, 2)])
        assert g == GaussianBelief([0], [1], [2])

    def test_beliefs_are_immutable(self):
        b = BetaBelief([1.0], [1.0])
        with pytest.raises(ValueError):
            b.alpha[0] = 3.0


class TestPosteriorMean:
    def test_values(self):
        assert posterior_mean(BetaBelief([2.0], [1.0]), 0) == pytest.approx(2 / 3)
        assert posterior_mean(BetaBelief([1.0], [1.0]), 0) == 0.5
        assert posterior_mean(GaussianBelief([-0.3], [2.0], [1.0]), 0) == -0.3

    def test_bad_arm(self):
        with pytest.raises(ValidationError):
            posterior_mean(BetaBelief([1.0], [1.0]), 1)


class TestSampleOutcome:
    def test_support(self):
        o = sample_outcome(BetaBelief([1.0], [1.0]), 3, RngStream(1))
        assert 0 <= o.theta[0] <= 1
        assert o.rewards.shape == (1, 3)
        assert set(np.unique(o.rewards)) <= {0.0, 1.0}

    def test_deterministic(self):
        b = GaussianBelief([0.0, 1.0], [1.0, 2.0], [1.0, 0.5])
        a1 = sample_outcome(b, 7, RngStream(3, 9))
        a2 = sample_outcome(b, 7, RngStream(3, 9))
        assert np.array_equal(a1.theta, a2.theta) and np.array_equal(a1.rewards, a2.rewards)

    @pytest.mark.parametrize("belief", [BetaBelief([1.0, 2.0], [1.0, 5.0]),
                                        GaussianBelief([0.5, -1.0], [1.0, 0.3], [2.0, 1.0])])
    def test_longer_draw_extends_shorter(self, belief):
        short = sample_outcome(belief, 5, RngStream(2))
        long = sample_outcome(belief, 40, RngStream(2))
        assert np.array_equal(short.theta, long.theta)
        assert np.array_equal(short.rewards, long.rewards[:, :5])
        assert np.array_equal(long.truncate(5).rewards, short.rewards)

    def test_reward_mean_matches_prior(self):
        b = BetaBelief([2.0, 1.0], [3.0, 1.0])
        g = RngStream(4).generator()
        r = np.array([sample_outcome(b, 2, g).rewards[:, 1] for _ in range(100_000)])
        se = r.std(axis=0) / math.sqrt(r.shape[0])
        assert np.all(np.abs(r.mean(axis=0) - b.means()) < 3 * se)

    def test_bad_horizon(self):
        with pytest.raises(ValidationError):
            sample_outcome(BetaBelief([1.0], [1.0]), 0, RngStream(0))


class TestMeanTrajectory:
    def test_beta_example(self):
        np.testing.assert_allclose(mean_trajectory(BetaArm(1, 1), [1, 1]), [0.5, 2 / 3, 0.75],
                                   rtol=1e-15)

    def test_gaussian_fixed_point(self):
        m = mean_trajectory(GaussianArm(0.7, 2.0, 0.5), [0.7] * 50)
        np.testing.assert_allclose(m, 0.7, rtol=1e-14)

    @settings(max_examples=60, deadline=None)
    @given(pos, pos, st.lists(st.integers(0, 1), min_size=1, max_size=40))
    def test_beta_fold_matches_update(self, a, b, rewards):
        traj = mean_trajectory(BetaArm(a, b), rewards)
        belief = BetaBelief([a], [b])
        folded = [posterior_mean(belief, 0)]
        for r in rewards:
            belief = update(belief, 0, r)
            folded.append(posterior_mean(belief, 0))
        np.testing.assert_allclose(traj, folded, rtol=1e-12)

    @settings(max_examples=60, deadline=None)
    @given(st.floats(-5, 5), pos, pos, st.lists(st.floats(-10, 10), min_size=1, max_size=40))
    def test_gaussian_fold_matches_update(self, m, v, s2, rewards):
        traj = mean_trajectory(GaussianArm(m, v, s2), rewards)
        belief = GaussianBelief([m], [v], [s2])
        folded = [posterior_mean(belief, 0)]
        for r in rewards:
            belief = update(belief, 0, r)
            folded.append(posterior_mean(belief, 0))
        np.testing.assert_allclose(traj, folded, rtol=1e-12, atol=1e-12)

    def test_first_entry_is_prior_mean(self):
        assert mean_trajectory(BetaArm(3, 2), [0, 1])[0] == 0.6
        assert mean_trajectory(GaussianArm(-0.3, 1, 1), [5.0])[0] == -0.3

    def test_mismatch_rejected(self):
        with pytest.raises(ValidationError):
            mean_trajectory(BetaArm(1, 1), [0.3])

    @pytest.mark.parametrize("belief", [BetaBelief([2.0], [3.0]),
                                        GaussianBelief([0.4], [1.5], [0.7])])
    def test_martingale(self, belief):
        g = RngStream(21).generator()
        n = 100_000
        traj = np.empty((n, 4))
        for i in range(n):
            o = sample_outcome(belief, 3, g)
            traj[i] = belief.path(o.rewards).means[0]
        se = traj.std(axis=0) / math.sqrt(n)
        assert np.all(np.abs(traj.mean(axis=0) - traj[0, 0]) <= 3 * se + 1e-12)


class TestSampleFhMean:
    def test_zero_observations(self):
        assert sample_fh_mean(BetaArm(2, 3), 0, RngStream(0)) == 0.4
        assert sample_fh_mean(GaussianArm(1.5, 1, 1), 0, RngStream(0)) == 1.5

    def test_concentrates_on_theta(self):
        prior = BetaBelief([1.0], [1.0])
        close = 0
        for i in range(300):
            # the same stream yields the same theta draw first
            theta = prior.sample_theta(RngStream(i).generator())[0]
            m = prior.sample_fh_means(1_000_000, RngStream(i).generator())[0]
            close += abs(m - theta) < 0.01
        assert close / 300 >= 0.99

    @pytest.mark.parametrize("prior", [BetaBelief([2.0], [3.0]), GaussianBelief([0.2], [0.8], [1.5])])
    def test_matches_path_simulation(self, prior):
        g1 = RngStream(8).generator()
        g2 = RngStream(9).generator()
        n = 100_000
        fast = np.array([prior.sample_fh_means(5, g1)[0] for _ in range(n)])
        slow = np.array([prior.path(sample_outcome(prior, 5, g2).rewards).means[0, 5]
                         for _ in range(n)])
        assert stats.ks_2samp(fast, slow).pvalue > 0.01

    def test_negative_rejected(self):
        with pytest.raises(ValidationError):
            sample_fh_mean(BetaArm(1, 1), -1, RngStream(0))


class TestExpectedMaxMean:
    def test_single_arm(self):
        assert expected_max_mean(BetaBelief([2.0], [6.0])) == 0.25
        assert expected_max_mean(GaussianBelief([0.3], [1.0], [1.0])) == 0.3

    def test_analytic_cases(self):
        assert expected_max_mean(BetaBelief([1, 1], [1, 1])) == pytest.approx(2 / 3, abs=1e-12)
        assert expected_max_mean(GaussianBelief([0, 0], [1, 1], [1, 1])) == pytest.approx(
            1 / math.sqrt(math.pi), abs=1e-12)

    def test_monte_carlo(self):
        b = BetaBelief([1.0, 4.0, 2.0], [2.0, 3.0, 2.0])
        g = RngStream(1).generator()
        draws = g.beta(b.alpha, b.beta, size=(400_000, 3)).max(axis=1)
        assert abs(expected_max_mean(b) - draws.mean()) < 4 * draws.std() / math.sqrt(draws.size)

    @pytest.mark.parametrize("family", ["beta", "gaussian"])
    def test_monotone_in_one_arm_mean(self, family):
        vals = []
        for m in np.linspace(0.1, 0.9, 17):
            if family == "beta":
                b = BetaBelief([10 * m, 2.0], [10 * (1 - m), 3.0])
            else:
                b = GaussianBelief([m, 0.5], [0.3, 1.0], [1.0, 1.0])
            vals.append(expected_max_mean(b))
        assert np.all(np.diff(vals) > 0)
