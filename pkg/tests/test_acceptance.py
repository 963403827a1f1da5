"""Acceptance suite: one test per criterion, each printing a verdict line.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the verdicts.
Criteria that need the UAV benchmark reuse the session-scoped fixtures.
"""

import dataclasses
import time

import numpy as np
import pytest

from rclqr import dual, evaluation, noise, sim, synthesis
from rclqr.problem import ProblemSpec

from helpers import lqr_value_iteration, random_mixture_noise, random_system

GOLDEN = (1.0 + np.sqrt(5.0)) / 2.0


def _verdict(num, label, ok, detail=""):
    state = "PASS" if ok else "FAIL"
    line = f"criterion {num:>2}: {state} - {label}"
    if detail:
        line += f" ({detail})"
    print(line)
    assert ok, line


@pytest.fixture(scope="module")
def uav15_lambda_star(uav15):
    return dual.bisection_lambda(uav15, tol=1e-10)


@pytest.fixture(scope="module")
def classical_problems():
    """Twenty seeded random stabilizable problems with n <= 6."""
    rng = np.random.default_rng(2024)
    problems = []
    for _ in range(20):
        n = int(rng.integers(2, 7))
        m = int(rng.integers(1, 4))
        A, B, Q, R = random_system(rng, n, m)
        model = noise.Gaussian(mean=np.zeros(n), cov=np.eye(n))
        problems.append(ProblemSpec.create(A, B, Q, R, model, rho=1e6,
                                           certify=False))
    return problems


def test_01_classical_reduction(classical_problems):
    start = time.perf_counter()
    worst = 0.0
    for prob in classical_problems:
        pol = synthesis.synthesize(prob, 0.0)
        _, K = lqr_value_iteration(prob.A, prob.B, prob.Q, prob.R)
        worst = max(worst, float(np.abs(pol.K - K).max()))
    elapsed = time.perf_counter() - start
    _verdict(1, "classical LQR reduction on 20 random problems",
             worst <= 1e-8 and elapsed < 1.0,
             f"max gain error {worst:.2e}, {elapsed:.2f}s")


def test_02_scalar_analytic_oracle():
    model = noise.Gaussian(mean=[0.0], cov=[[1.0]])
    prob = ProblemSpec.create([[1.0]], [[1.0]], [[1.0]], [[1.0]], model, rho=1e6,
                              certify=False)
    pol = synthesis.synthesize(prob, 0.0)
    p_err = abs(pol.P[0, 0] - GOLDEN)
    k_err = abs(pol.K[0, 0] - GOLDEN / (1.0 + GOLDEN))
    _verdict(2, "scalar quadratic-formula oracle",
             p_err <= 1e-10 and k_err <= 1e-10,
             f"|P-phi|={p_err:.2e}, |K-phi/(1+phi)|={k_err:.2e}")


def test_03_risk_dual_path_identity():
    rng = np.random.default_rng(333)
    worst = 0.0
    for _ in range(50):
        n = int(rng.integers(2, 5))
        m = int(rng.integers(1, n + 1))
        A, B, Q, R = random_system(rng, n, m)
        model = random_mixture_noise(rng, n)
        prob = ProblemSpec.create(A, B, Q, R, model, rho=1e6, certify=False,
                                  m4_draws=10_000)
        pol = synthesis.synthesize(prob, float(rng.uniform(0.0, 3.0)))
        # arbitrary affine offset; nudge the gain when it stays stabilizing
        pol = dataclasses.replace(pol, l=rng.normal(size=m))
        bent = dataclasses.replace(pol, K=pol.K + 1e-3 * rng.normal(size=pol.K.shape))
        from rclqr.numlin import spectral_radius
        if spectral_radius(prob.A - prob.B @ bent.K) < 0.98:
            pol = bent
        a = evaluation.risk_closed_form(pol, prob)
        b = evaluation.risk_via_moments(pol, prob)
        worst = max(worst, abs(a - b) / max(abs(a), abs(b), 1e-30))
    _verdict(3, "closed-form risk equals moment-oracle risk on 50 policies",
             worst <= 1e-8, f"max rel diff {worst:.2e}")


def test_04_acoe_residual_on_uav_grid(uav15, uav15_lambda_star):
    rng = np.random.default_rng(444)
    states = rng.uniform(-10.0, 10.0, size=(100, uav15.n))
    sq_norms = (states ** 2).sum(axis=1)
    worst_ratio = 0.0
    for lam in np.linspace(0.0, 2.0 * uav15_lambda_star, 20):
        pol = synthesis.synthesize(uav15, lam)
        res = synthesis.acoe_residual(pol, uav15, states)
        tol = 1e-6 * (1.0 + sq_norms.max() * np.linalg.norm(pol.P, 2))
        worst_ratio = max(worst_ratio, res / tol)
    _verdict(4, "optimality-equation residual on 20-point multiplier grid",
             worst_ratio <= 1.0, f"worst residual/tolerance {worst_ratio:.2e}")


def test_05_stability_certificate(classical_problems, uav15, uav15_lambda_star):
    from rclqr.numlin import spectral_radius

    worst = 0.0
    for prob in classical_problems:
        for lam in (0.0, 0.5, 2.0, 10.0):
            pol = synthesis.synthesize(prob, lam)
            worst = max(worst, spectral_radius(prob.A - prob.B @ pol.K))
    for lam in np.linspace(0.0, 2.0 * uav15_lambda_star, 20):
        pol = synthesis.synthesize(uav15, lam)
        worst = max(worst, spectral_radius(uav15.A - uav15.B @ pol.K))
    _verdict(5, "closed loop Schur stable for every synthesized multiplier",
             worst < 1.0, f"max spectral radius {worst:.6f}")


def test_06_dual_value_matches_h(uav15, uav15_lambda_star):
    rng = np.random.default_rng(666)
    worst = 0.0
    grids = [(uav15, np.linspace(0.0, 2.0 * uav15_lambda_star, 10))]
    for _ in range(2):
        n = int(rng.integers(2, 4))
        A, B, Q, R = random_system(rng, n, 2)
        model = random_mixture_noise(rng, n)
        prob = ProblemSpec.create(A, B, Q, R, model, rho=1e6, certify=False,
                                  m4_draws=10_000)
        grids.append((prob, np.linspace(0.0, 4.0, 9)))
    for prob, lams in grids:
        for lam in lams:
            h = synthesis.synthesize(prob, lam).h
            D = evaluation.dual_value(prob, lam)
            worst = max(worst, abs(D - h) / (1.0 + abs(h)))
    _verdict(6, "dual value equals optimal Lagrangian value across grids",
             worst <= 1e-6, f"max rel gap {worst:.2e}")


@pytest.fixture(scope="module")
def budget_reference(uav15, uav15_lambda_star):
    j_star = evaluation.lqr_cost_closed_form(
        synthesis.synthesize(uav15, uav15_lambda_star), uav15)
    return uav15_lambda_star, j_star


def _benchmark_run(problem, schedule, j_star):
    _, trace = dual.solve_primal_dual(problem, schedule, max_iter=100,
                                      lambda1=0.0, stop_tol=0.0)
    last = trace.iterations[-1]
    gap = abs(last.J - j_star) / j_star
    viol = abs(last.J_c - problem.rho_bar) / problem.rho_bar
    return gap, viol


def test_07a_constant_rule_convergence(uav15, budget_reference):
    _, j_star = budget_reference
    start = time.perf_counter()
    gap, viol = _benchmark_run(uav15, dual.StepSchedule.constant(0.1), j_star)
    elapsed = time.perf_counter() - start
    _verdict("7a", "constant step 0.1 reaches <1% gap and violation by k=100",
             gap < 0.01 and viol < 0.01 and elapsed < 30.0,
             f"gap {gap:.2e}, violation {viol:.2e}, {elapsed:.1f}s")


def test_07b_diminishing_rule_convergence(uav15, budget_reference):
    # Known shortfall: with the gust mixture the benchmark can actually
    # run under (see presets.uav_input_noise), the diminishing rule reaches
    # <1% on the optimality gap by k=100 but needs ~122 iterations for the
    # constraint violation.  The target is asserted as stated regardless.
    _, j_star = budget_reference
    start = time.perf_counter()
    gap, viol = _benchmark_run(uav15, dual.StepSchedule.diminishing(0.1), j_star)
    elapsed = time.perf_counter() - start
    _verdict("7b", "diminishing step 1/(10 sqrt(k)) reaches <1% by k=100",
             gap < 0.01 and viol < 0.01 and elapsed < 30.0,
             f"gap {gap:.2e}, violation {viol:.2e}, {elapsed:.1f}s")


def test_08_rate_certificate_1000_steps(uav15):
    b, e = dual.estimate_certified_constants(uav15)
    sched = dual.StepSchedule.certified(b, e)
    _, trace = dual.solve_primal_dual(uav15, sched, max_iter=1000, lambda1=0.0,
                                      stop_tol=0.0)
    cert = dual.rate_certificate(trace, uav15, b, e, bisect_tol=1e-10)
    dominating = (bool((np.abs(trace.lambdas) <= e).all())
                  and max(abs(it.subgradient) for it in trace.iterations) <= b)
    _verdict(8, "dual gap within 3be/sqrt(k) at all 1000 certified steps",
             cert.passed and dominating,
             f"violations {cert.violations[:3]}, b={b:.2f}, e={e:.2f}")


def test_09_complementary_slackness(uav15):
    stop_tol = 1e-5
    policy, trace = dual.solve_primal_dual(
        uav15, dual.StepSchedule.constant(0.1), max_iter=2000, lambda1=0.0,
        stop_tol=stop_tol,
    )
    j_c = evaluation.risk_closed_form(policy, uav15)
    slack = policy.lam * abs(j_c - uav15.rho_bar)
    bound = 1e-4 * (1.0 + uav15.rho_bar)
    _verdict(9, "complementary slackness at the converged multiplier",
             slack <= bound,
             f"lambda={policy.lam:.4f}, lambda*|J_c-budget|={slack:.2e} <= {bound:.2e}")


def test_10_reformulation_end_to_end(uav15, uav15_lambda_star):
    start = time.perf_counter()
    pol = synthesis.synthesize(uav15, uav15_lambda_star)
    mu, _ = evaluation.stationary_moments(pol, uav15)
    traj = sim.rollout(uav15, pol, mu, T=1_000_000, seed=20260810)
    burn = sim.default_burn_in(traj.T)
    _, jc_hat = sim.empirical_costs(traj, uav15, burn)
    pv = sim.empirical_predictive_variance(traj, uav15, burn)
    WQ = uav15.stats.cov @ uav15.Q
    shift = uav15.stats.weighted_fourth - 4.0 * float(np.trace(WQ @ WQ))
    pv_rel = abs(pv - (jc_hat + shift)) / abs(pv)
    jc_closed = evaluation.risk_closed_form(pol, uav15)
    jc_rel = abs(jc_hat - jc_closed) / abs(jc_closed)
    elapsed = time.perf_counter() - start
    _verdict(10, "predictive-variance reformulation validated on 1e6 steps",
             pv_rel <= 0.03 and jc_rel <= 0.02 and elapsed < 60.0,
             f"identity err {pv_rel:.2%}, risk err {jc_rel:.2%}, {elapsed:.1f}s")


def test_11_variance_comparison(uav8):
    lam8 = dual.bisection_lambda(uav8, tol=1e-8)
    rc = synthesis.synthesize(uav8, lam8)
    base = synthesis.synthesize(uav8, 0.0)
    _, sigma_rc = evaluation.stationary_moments(rc, uav8)
    _, sigma_b = evaluation.stationary_moments(base, uav8)
    x1_smaller = sigma_rc[0, 0] < sigma_b[0, 0]
    x3_rel = abs(sigma_rc[2, 2] - sigma_b[2, 2]) / sigma_b[2, 2]
    _verdict(11, "risk-constrained policy shrinks x1 variance, x3 within 10%",
             x1_smaller and x3_rel < 0.10,
             f"x1 {sigma_b[0, 0]:.3f}->{sigma_rc[0, 0]:.3f}, x3 rel diff {x3_rel:.2%}")
