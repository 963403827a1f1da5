import dataclasses
import math

import numpy as np
import pytest

from rclqr import noise, numlin, synthesis
from rclqr.problem import ProblemSpec

from helpers import lqr_value_iteration, random_problem

GOLDEN = (1.0 + math.sqrt(5.0)) / 2.0


def scalar_problem(a=1.0, b=1.0, q=1.0, r=1.0, mean=0.0, var=1.0, rho=1e6):
    model = noise.Gaussian(mean=[mean], cov=[[var]])
    return ProblemSpec.create([[a]], [[b]], [[q]], [[r]], model, rho=rho,
                              certify=False)


class TestLagrangianWeights:
    def test_zero_multiplier_returns_penalty(self):
        rng = np.random.default_rng(0)
        prob = random_problem(rng, n=3, m=2, mixture=True)
        Q_lam, S = synthesis.lagrangian_weights(prob.stats, prob.Q, 0.0)
        np.testing.assert_allclose(Q_lam, prob.Q, atol=1e-14)
        np.testing.assert_allclose(S, 2.0 * prob.Q @ prob.stats.weighted_third,
                                   atol=1e-14)

    def test_symmetric_noise_kills_linear_weight(self):
        prob = scalar_problem()
        _, S = synthesis.lagrangian_weights(prob.stats, prob.Q, 1.3)
        np.testing.assert_allclose(S, 0.0, atol=1e-15)

    def test_scalar_arithmetic(self):
        stats = noise.NoiseStats(mean=[0.0], cov=[[2.0]], weighted_third=[0.0],
                                 weighted_fourth=0.0)
        Q_lam, _ = synthesis.lagrangian_weights(stats, np.eye(1), 0.5)
        assert Q_lam[0, 0] == pytest.approx(5.0, abs=1e-14)  # 1 + 4*0.5*2

    def test_negative_multiplier_rejected(self):
        prob = scalar_problem()
        with pytest.raises(ValueError):
            synthesis.lagrangian_weights(prob.stats, prob.Q, -0.1)


class TestSynthesize:
    def test_scalar_golden_ratio(self):
        prob = scalar_problem()
        pol = synthesis.synthesize(prob, 0.0)
        assert pol.P[0, 0] == pytest.approx(GOLDEN, abs=1e-10)
        assert pol.K[0, 0] == pytest.approx(GOLDEN / (1.0 + GOLDEN), abs=1e-10)
        # zero-mean noise: no affine terms, h = tr{PW} = P
        assert abs(pol.l[0]) <= 1e-12
        assert abs(pol.g[0]) <= 1e-12
        assert pol.h == pytest.approx(GOLDEN, abs=1e-9)

    def test_zero_multiplier_is_classical_lqr(self):
        rng = np.random.default_rng(17)
        for _ in range(5):
            prob = random_problem(rng)
            pol = synthesis.synthesize(prob, 0.0)
            _, K = lqr_value_iteration(prob.A, prob.B, prob.Q, prob.R)
            assert np.abs(pol.K - K).max() <= 1e-8

    def test_symmetric_zero_mean_noise_has_no_offset(self):
        rng = np.random.default_rng(23)
        A, B = rng.normal(size=(3, 3)) * 0.3, rng.normal(size=(3, 2))
        Q = np.eye(3)
        model = noise.Gaussian(mean=np.zeros(3), cov=0.5 * np.eye(3))
        prob = ProblemSpec.create(A, B, Q, np.eye(2), model, rho=100.0, certify=False)
        pol = synthesis.synthesize(prob, 0.7)
        np.testing.assert_allclose(pol.g, 0.0, atol=1e-10)
        np.testing.assert_allclose(pol.l, 0.0, atol=1e-10)

    def test_stability_certificate_across_multipliers(self):
        rng = np.random.default_rng(31)
        for _ in range(4):
            prob = random_problem(rng, mixture=True)
            for lam in [0.0, 0.1, 1.0, 10.0]:
                pol = synthesis.synthesize(prob, lam)
                assert numlin.spectral_radius(pol.closed_loop(prob)) < 1.0

    def test_value_matrix_monotone_in_multiplier(self):
        rng = np.random.default_rng(37)
        prob = random_problem(rng, n=3, m=2, mixture=True)
        lams = [0.0, 0.3, 1.0, 3.0]
        pols = [synthesis.synthesize(prob, lam) for lam in lams]
        xs = rng.normal(size=(20, 3))
        for lo, hi in zip(pols, pols[1:]):
            # inflated penalty grows with the multiplier, hence so does x'Px
            dq = synthesis.lagrangian_weights(prob.stats, prob.Q, hi.lam)[0] \
                - synthesis.lagrangian_weights(prob.stats, prob.Q, lo.lam)[0]
            assert np.linalg.eigvalsh(dq).min() >= -1e-10
            for x in xs:
                assert x @ hi.P @ x >= x @ lo.P @ x - 1e-8


class TestFiniteHorizonBackward:
    def test_single_step_terminal_arithmetic(self):
        rng = np.random.default_rng(3)
        prob = random_problem(rng, n=2, m=1, mixture=True)
        lam = 0.8
        Q_lam, S = synthesis.lagrangian_weights(prob.stats, prob.Q, lam)
        bp = synthesis.finite_horizon_backward(prob, lam, T=1)
        np.testing.assert_allclose(bp.P[0], Q_lam, atol=1e-12)
        np.testing.assert_allclose(bp.g[0], 2.0 * lam * S, atol=1e-12)
        np.testing.assert_allclose(bp.K[0], 0.0, atol=1e-14)
        np.testing.assert_allclose(bp.l[0], 0.0, atol=1e-14)
        assert bp.z[0] == pytest.approx(0.0, abs=1e-12)

    def test_scalar_converges_to_fixed_point(self):
        prob = scalar_problem()
        bp = synthesis.finite_horizon_backward(prob, 0.0, T=500)
        assert bp.P[0][0, 0] == pytest.approx(GOLDEN, abs=1e-10)

    def test_offsets_vanish_for_symmetric_zero_mean_noise(self):
        prob = scalar_problem(a=0.8, mean=0.0)
        bp = synthesis.finite_horizon_backward(prob, 0.0, T=50)
        for g_t in bp.g:
            np.testing.assert_allclose(g_t, 0.0, atol=1e-14)
        for l_t in bp.l:
            np.testing.assert_allclose(l_t, 0.0, atol=1e-14)

    def test_limits_match_stationary_fixed_points(self):
        rng = np.random.default_rng(41)
        for _ in range(3):
            prob = random_problem(rng, mixture=True)
            lam = float(rng.uniform(0.0, 2.0))
            pol = synthesis.synthesize(prob, lam)
            bp = synthesis.finite_horizon_backward(prob, lam, T=5000)
            assert np.abs(bp.P[0] - pol.P).max() <= 1e-8 * (1.0 + np.abs(pol.P).max())
            assert np.abs(bp.K[0] - pol.K).max() <= 1e-8 * (1.0 + np.abs(pol.K).max())
            assert np.abs(bp.g[0] - pol.g).max() <= 1e-8 * (1.0 + np.abs(pol.g).max())
            assert np.abs(bp.l[0] - pol.l).max() <= 1e-8 * (1.0 + np.abs(pol.l).max())

    def test_value_function_matches_forward_moment_accumulation(self):
        # independent oracle for (P_0, g_0, z_0): propagate the state mean
        # and covariance forward under the time-varying policy and add up
        # the expected stage costs; the total must equal V_0(x0)
        rng = np.random.default_rng(61)
        for _ in range(3):
            prob = random_problem(rng, n=3, m=2, mixture=True)
            lam = float(rng.uniform(0.0, 1.5))
            T = 40
            bp = synthesis.finite_horizon_backward(prob, lam, T)
            Q_lam, S = synthesis.lagrangian_weights(prob.stats, prob.Q, lam)
            A, B, R = prob.A, prob.B, prob.R
            w, W = prob.stats.mean, prob.stats.cov

            x0 = rng.normal(size=3)
            mu = x0.copy()
            Sigma = np.zeros((3, 3))
            total = 0.0
            for t in range(T):
                K_t, l_t = bp.K[t], bp.l[t]
                u_mean = -K_t @ mu + l_t
                total += (
                    float(np.trace(Q_lam @ (Sigma + np.outer(mu, mu))))
                    + 2.0 * lam * float(S @ mu)
                    + float(np.trace(K_t.T @ R @ K_t @ Sigma))
                    + float(u_mean @ R @ u_mean)
                )
                F_t = A - B @ K_t
                mu = F_t @ mu + B @ l_t + w
                Sigma = F_t @ Sigma @ F_t.T + W
            want = float(x0 @ bp.P[0] @ x0) + float(bp.g[0] @ x0) + bp.z[0]
            assert total == pytest.approx(want, rel=1e-9, abs=1e-9)


class TestAcoeResidual:
    def test_small_on_synthesized_policies(self):
        rng = np.random.default_rng(43)
        for _ in range(4):
            prob = random_problem(rng, mixture=True)
            pol = synthesis.synthesize(prob, float(rng.uniform(0.0, 2.0)))
            states = rng.uniform(-10.0, 10.0, size=(100, prob.n))
            res = synthesis.acoe_residual(pol, prob, states)
            scale = (np.linalg.norm(states, axis=1) ** 2).max() * np.linalg.norm(pol.P, 2)
            assert res <= 1e-6 * (1.0 + scale)

    def test_perturbed_gain_increases_residual(self):
        rng = np.random.default_rng(47)
        prob = random_problem(rng, n=3, m=2)
        pol = synthesis.synthesize(prob, 0.5)
        states = rng.uniform(-10.0, 10.0, size=(100, 3))
        base = synthesis.acoe_residual(pol, prob, states)
        bent = dataclasses.replace(pol, K=pol.K + 1e-2)
        worse = synthesis.acoe_residual(bent, prob, states)
        assert worse > base
        assert worse > 0.0

    def test_constant_term_identity_at_origin(self):
        rng = np.random.default_rng(53)
        for _ in range(4):
            prob = random_problem(rng, mixture=True)
            pol = synthesis.synthesize(prob, float(rng.uniform(0.0, 1.5)))
            assert synthesis.acoe_residual(pol, prob, np.zeros((1, prob.n))) <= 1e-8

    def test_requires_synthesized_policy(self):
        rng = np.random.default_rng(59)
        prob = random_problem(rng, n=2, m=1)
        bare = synthesis.Policy(lam=0.0, K=np.zeros((1, 2)), l=np.zeros(1))
        with pytest.raises(ValueError):
            synthesis.acoe_residual(bare, prob, np.zeros((1, 2)))


class TestProblemValidation:
    def test_rejects_asymmetric_penalty(self):
        model = noise.Gaussian(mean=[0.0, 0.0], cov=np.eye(2))
        with pytest.raises(ValueError):
            ProblemSpec.create(np.eye(2), np.eye(2), [[1.0, 0.5], [0.0, 1.0]],
                               np.eye(2), model, rho=1.0)

    def test_rejects_semidefinite_r(self):
        model = noise.Gaussian(mean=[0.0], cov=[[1.0]])
        with pytest.raises(ValueError):
            ProblemSpec.create([[0.5]], [[1.0]], [[1.0]], [[0.0]], model, rho=1.0)

    def test_rejects_nonpositive_rho(self):
        model = noise.Gaussian(mean=[0.0], cov=[[1.0]])
        with pytest.raises(ValueError):
            ProblemSpec.create([[0.5]], [[1.0]], [[1.0]], [[1.0]], model, rho=0.0)

    def test_rejects_noise_dimension_mismatch(self):
        model = noise.Gaussian(mean=[0.0, 0.0], cov=np.eye(2))
        with pytest.raises(ValueError):
            ProblemSpec.create([[0.5]], [[1.0]], [[1.0]], [[1.0]], model, rho=1.0)

    def test_requires_exactly_one_budget(self):
        model = noise.Gaussian(mean=[0.0], cov=[[1.0]])
        with pytest.raises(ValueError):
            ProblemSpec.create([[0.5]], [[1.0]], [[1.0]], [[1.0]], model,
                               rho=1.0, rho_bar=1.0)

    def test_certification_rejects_unstabilizable_pair(self):
        from rclqr.errors import ConvergenceError

        model = noise.Gaussian(mean=[0.0], cov=[[1.0]])
        with pytest.raises(ConvergenceError):
            ProblemSpec.create([[2.0]], [[0.0]], [[1.0]], [[1.0]], model, rho=1.0,
                               certify=True)
