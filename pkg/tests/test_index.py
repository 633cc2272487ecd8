"""Worth-trying test, closed-form Gamma and the bisection index."""

import math

import mpmath
import numpy as np
import pytest
from scipy import integrate, stats

from irsbandit.errors import ValidationError
from irsbandit.index import (SEARCH_TOL, compute_index, gamma_beta, gamma_gauss, gamma_table,
                             index_decide_from_path, irs_index_decide, worth_trying)
from irsbandit.models import BetaBelief, GaussianBelief, sample_outcome
from irsbandit.rng import RngStream
from oracles import single_arm_brute_force


def _random_arm(rng, family):
    if family == "beta":
        return BetaBelief([rng.uniform(0.5, 3)], [rng.uniform(0.5, 3)])
    return GaussianBelief([rng.normal()], [rng.uniform(0.2, 2)], [rng.uniform(0.2, 2)])


class TestGammaBeta:
    def test_uniform_example(self):
        assert gamma_beta(1, 1, 0.5) == pytest.approx(0.625, abs=1e-14)

    def test_limits(self):
        assert gamma_beta(2.0, 5.0, 0.0) == 2 / 7
        assert gamma_beta(2.0, 5.0, -3.0) == 2 / 7
        assert gamma_beta(2.0, 5.0, 1.0) == 1.0
        assert gamma_beta(2.0, 5.0, 1.5) == 1.5

    @pytest.mark.parametrize("a,b,lam", [(2, 3, 0.3), (0.5, 0.7, 0.9), (50, 40, 0.55),
                                         (0.2, 0.2, 0.01), (300, 2, 0.99)])
    def test_quadrature_oracle(self, a, b, lam):
        ref = integrate.quad(lambda u: max(u, lam) * stats.beta.pdf(u, a, b), 0, 1, points=[lam],
                             epsabs=1e-13, limit=200)[0]
        assert gamma_beta(a, b, lam) == pytest.approx(ref, abs=1e-9)

    def test_invalid(self):
        with pytest.raises(ValidationError):
            gamma_beta(0.0, 1.0, 0.5)


class TestGammaGauss:
    def test_standard_normal_at_zero(self):
        assert gamma_gauss(0.0, 1.0, 0.0) == pytest.approx(1 / math.sqrt(2 * math.pi), abs=1e-12)
        assert gamma_gauss(0.0, 1.0, 0.0) == pytest.approx(0.3989423, abs=1e-7)

    @pytest.mark.parametrize("m,nu", [(0.0, 1.0), (2.5, 0.1), (-1.0, 30.0)])
    def test_far_limits(self, m, nu):
        assert gamma_gauss(m, nu, m - 10 / nu) == pytest.approx(m, abs=1e-9)
        assert gamma_gauss(m, nu, m + 10 / nu) == pytest.approx(m + 10 / nu, abs=1e-9)

    @pytest.mark.parametrize("m,nu,lam", [(0.3, 2.0, 0.1), (-1.0, 0.5, 1.0), (4.0, 1.5, 3.0)])
    def test_quadrature_oracle(self, m, nu, lam):
        mpmath.mp.dps = 30
        sd = mpmath.mpf(1) / nu
        ref = float(mpmath.quad(lambda x: max(x, lam) * mpmath.npdf(x, m, sd),
                                [-mpmath.inf, m - 3 * sd, lam, m + 3 * sd, mpmath.inf]))
        assert gamma_gauss(m, nu, lam) == pytest.approx(ref, abs=1e-12)

    def test_invalid(self):
        with pytest.raises(ValidationError):
            gamma_gauss(0.0, 0.0, 0.0)


class TestGammaTable:
    @pytest.mark.parametrize("family", ["beta", "gaussian"])
    def test_dominance_and_lipschitz(self, family):
        rng = np.random.default_rng(3)
        for case in range(20):
            arm = _random_arm(rng, family)
            T = 12
            path = arm.path(sample_outcome(arm, T, RngStream(case)).rewards)
            grid = np.linspace(-0.5, 1.5, 81) if family == "beta" else np.linspace(-4, 4, 81)
            tables = np.array([gamma_table(path, T, lam) for lam in grid])
            mu = path.means[0]
            assert np.all(tables >= grid[:, None] - 1e-12)
            assert np.all(tables >= mu[None, :] - 1e-12)
            steps = np.diff(tables, axis=0)
            assert np.all(steps >= -1e-12)
            assert np.all(steps <= np.diff(grid)[:, None] + 1e-12)

    def test_matches_pointwise_closed_form(self):
        arm = BetaBelief([1.5], [2.5])
        path = arm.path(sample_outcome(arm, 30, RngStream(2)).rewards)
        table = gamma_table(path, 30, 0.41)
        ref = [gamma_beta(path.p[0, n], path.q[0, n], 0.41) for n in range(31)]
        np.testing.assert_allclose(table, ref, atol=1e-13)

    def test_gaussian_pointwise(self):
        arm = GaussianBelief([0.2], [1.5], [0.7])
        path = arm.path(sample_outcome(arm, 10, RngStream(1)).rewards)
        table = gamma_table(path, 10, 0.5)
        ref = [gamma_gauss(path.means[0, n], 1 / path.q[0, n], 0.5) for n in range(11)]
        np.testing.assert_allclose(table, ref, atol=1e-13)


class TestWorthTrying:
    @pytest.mark.parametrize("family", ["beta", "gaussian"])
    def test_reformulation_matches_sequence_problem(self, family):
        rng = np.random.default_rng(1 if family == "beta" else 2)
        for case in range(100):
            T = int(rng.integers(1, 7))
            lam = rng.uniform(-0.2, 1.2) if family == "beta" else rng.normal()
            arm = _random_arm(rng, family)
            path = arm.path(sample_outcome(arm, T, RngStream(case)).rewards)
            G = gamma_table(path, T, lam)
            best = single_arm_brute_force(path.means[0], G, lam, T)
            ok, phi = worth_trying(path, T, lam)
            # phi ranges over n >= 1; pulling nothing scores exactly T * lam
            assert max(phi, 0.0) == pytest.approx(max(best - T * lam, 0.0), abs=1e-12)
            assert ok == (phi >= 0)

    def test_uniform_three_step_example(self):
        arm = BetaBelief([1.0], [1.0])
        path = arm.path(np.array([[1.0, 0.0, 1.0]]))
        G = gamma_table(path, 3, 0.5)
        _, phi = worth_trying(path, 3, 0.5)
        best = single_arm_brute_force(path.means[0], G, 0.5, 3)
        assert max(phi, 0.0) == pytest.approx(max(best - 1.5, 0.0), abs=1e-14)

    def test_bernoulli_range(self):
        arm = BetaBelief([2.0], [3.0])
        for seed in range(20):
            path = arm.path(sample_outcome(arm, 15, RngStream(seed)).rewards)
            assert worth_trying(path, 15, -0.01)[0]
            assert not worth_trying(path, 15, 1.01)[0]

    @pytest.mark.parametrize("family", ["beta", "gaussian"])
    def test_single_sign_change_on_grid(self, family):
        rng = np.random.default_rng(9)
        flips = []
        for case in range(100):
            arm = _random_arm(rng, family)
            T = int(rng.integers(2, 40))
            path = arm.path(sample_outcome(arm, T, RngStream(case)).rewards)
            m0 = path.means[0, 0]
            grid = (np.linspace(0, 1, 100) if family == "beta"
                    else np.linspace(m0 - 4, m0 + 4, 100))
            signs = np.array([worth_trying(path, T, lam)[0] for lam in grid])
            flips.append(int(np.count_nonzero(signs[1:] != signs[:-1])))
        assert max(flips) <= 1

    def test_bad_variant(self):
        arm = BetaBelief([1.0], [1.0])
        path = arm.path(np.zeros((1, 2)))
        with pytest.raises(ValidationError):
            worth_trying(path, 2, 0.5, variant="fast")


class TestComputeIndex:
    @pytest.mark.parametrize("variant", ["standard", "star"])
    @pytest.mark.parametrize("family", ["beta", "gaussian"])
    def test_boundary_post_hoc(self, family, variant):
        rng = np.random.default_rng(4)
        for case in range(30):
            arm = _random_arm(rng, family)
            T = int(rng.integers(2, 60))
            path = arm.path(sample_outcome(arm, T, RngStream(case)).rewards)
            res = compute_index(path, T, variant=variant)
            assert 0 < res.iterations <= 60
            eps = SEARCH_TOL
            assert worth_trying(path, T, res.lambda_star - eps, variant=variant)[0]
            assert not worth_trying(path, T, res.lambda_star + eps, variant=variant)[0]

    def test_horizon_one_is_mean(self):
        for arm in (BetaBelief([3.0], [2.0]), GaussianBelief([-0.4], [2.0], [1.0])):
            path = arm.path(sample_outcome(arm, 1, RngStream(0)).rewards)
            assert compute_index(path, 1).lambda_star == arm.means()[0]

    def test_degenerate_arm(self):
        c = 0.37
        arm = GaussianBelief([c], [1e-14], [1e-14])
        path = arm.path(sample_outcome(arm, 50, RngStream(0)).rewards)
        for variant in ("standard", "star"):
            assert compute_index(path, 50, variant=variant).lambda_star == pytest.approx(c, abs=1e-6)

    def test_index_exceeds_mean_for_uncertain_arm(self):
        # the option value of learning lifts the index above the current mean on average
        arm = BetaBelief([1.0], [1.0])
        vals = [compute_index(arm.path(sample_outcome(arm, 50, RngStream(s)).rewards), 50).lambda_star
                for s in range(200)]
        assert np.mean(vals) > 0.5

    def test_bad_arm(self):
        arm = BetaBelief([1.0], [1.0])
        with pytest.raises(ValidationError):
            compute_index(arm.path(np.zeros((1, 3))), 3, arm=1)


class TestIndexDecide:
    def test_horizon_one_myopic(self):
        b = BetaBelief([1.0, 4.0, 2.0], [1.0, 2.0, 2.0])
        for seed in range(20):
            assert irs_index_decide(b, 1, RngStream(seed)) == 1

    def test_identical_arms_shared_trajectory(self):
        arm = BetaBelief([2.0], [2.0])
        rewards = sample_outcome(arm, 20, RngStream(3)).rewards
        twin = BetaBelief([2.0, 2.0], [2.0, 2.0]).path(np.vstack([rewards, rewards]))
        assert index_decide_from_path(twin, 20) == 0
        assert index_decide_from_path(twin, 20, "star") == 0

    def test_deterministic(self):
        b = GaussianBelief([0.0, 0.1], [1.0, 1.0], [1.0, 4.0])
        a = [irs_index_decide(b, 30, RngStream(s), "star") for s in range(10)]
        assert a == [irs_index_decide(b, 30, RngStream(s), "star") for s in range(10)]

    def test_bad_horizon(self):
        with pytest.raises(ValidationError):
            irs_index_decide(BetaBelief([1.0], [1.0]), 0, RngStream(0))
