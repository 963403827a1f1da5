"""Closed-form evaluation of average cost and risk, with moment oracles.

Two independent routes compute the reformulated risk of a stabilizing
affine policy:

* ``risk_closed_form`` solves the relative-value Lyapunov equation
  ``P_c = 4QWQ + F'P_c F`` (F the closed loop) plus a linear fixed point
  for the affine part;
* ``risk_via_moments`` evaluates the stationary state mean/covariance and
  averages the risk integrand directly.

Agreement between the two is the decisive self-check used throughout the
test suite.  The average quadratic cost is evaluated through stationary
moments only; its independent guard is the optimality-equation identity
``dual_value(lam) == h(lam)``.
"""

from dataclasses import asdict, dataclass

import numpy as np

from . import numlin
from .errors import InstabilityError
from .problem import ProblemSpec, risk_tolerance_transform  # noqa: F401  (re-export)
from .synthesis import Policy, acoe_residual, lagrangian_weights, synthesize


@dataclass
class EvalReport:
    """Closed-form figures and certificate residuals for one policy."""

    J: float
    J_c: float
    rho_bar: float
    dual_value: float
    riccati_residual: float
    lyapunov_residual: float
    acoe_residual: float
    spectral_radius: float

    def to_dict(self):
        return {k: float(v) for k, v in asdict(self).items()}


def _closed_loop(policy, problem):
    F = problem.A - problem.B @ policy.K
    rho = numlin.spectral_radius(F)
    if rho >= 1.0:
        raise InstabilityError(
            f"policy does not stabilize the system (spectral radius {rho:.6f})"
        )
    return F, rho


def stationary_moments(policy: Policy, problem: ProblemSpec):
    """Stationary mean and covariance of the closed-loop state.

    mu = (I - F)^{-1} (Bl + w),  Sigma = F Sigma F' + W.
    """
    F, _ = _closed_loop(policy, problem)
    v = problem.B @ policy.l + problem.stats.mean
    mu = numlin.solve_linear(np.eye(problem.n) - F, v)
    W = problem.stats.cov
    Sigma = numlin.solve_discrete_lyapunov(F.T, W, tol=1e-10 * (1.0 + np.abs(W).max()))
    return mu, Sigma


def _risk_parts(policy: Policy, problem: ProblemSpec):
    """Lyapunov matrix, affine coefficient, and risk value (closed form)."""
    F, _ = _closed_loop(policy, problem)
    Q, W = problem.Q, problem.stats.cov
    C = numlin.symmetrize(4.0 * Q @ W @ Q)
    P_c = numlin.solve_discrete_lyapunov(F, C, tol=1e-10 * (1.0 + np.abs(C).max()))
    v = problem.B @ policy.l + problem.stats.mean
    g_c = numlin.solve_linear(
        (np.eye(problem.n) - F).T,
        2.0 * (F.T @ (P_c @ v) + 2.0 * Q @ problem.stats.weighted_third),
    )
    J_c = float(np.trace(P_c @ (W + np.outer(v, v)))) + float(g_c @ v)
    return P_c, g_c, J_c, C


def risk_closed_form(policy: Policy, problem: ProblemSpec) -> float:
    """Average reformulated risk of a stabilizing affine policy.

    ``J_c = tr{P_c (W + (Bl+w)(Bl+w)')} + g_c'(Bl+w)`` with P_c the
    Lyapunov fixed point above and
    ``g_c' = 2((Bl+w)'P_c F + 2 M3'Q)(I - F)^{-1}``.
    """
    return _risk_parts(policy, problem)[2]


def risk_via_moments(policy: Policy, problem: ProblemSpec) -> float:
    """Independent risk oracle: average the integrand under the stationary law.

    ``4 tr{QWQ (Sigma + mu mu')} + 4 mu'Q M3``.
    """
    mu, Sigma = stationary_moments(policy, problem)
    Q, W = problem.Q, problem.stats.cov
    QWQ = Q @ W @ Q
    return float(
        4.0 * np.trace(QWQ @ (Sigma + np.outer(mu, mu)))
        + 4.0 * mu @ Q @ problem.stats.weighted_third
    )


def lqr_cost_closed_form(policy: Policy, problem: ProblemSpec) -> float:
    """Average quadratic cost of a stabilizing affine policy.

    With u = -Kx + l and stationary moments (mu, Sigma):
    ``J = tr{Q Sigma} + mu'Q mu + tr{K'RK Sigma} + (-K mu + l)'R(-K mu + l)``.
    """
    mu, Sigma = stationary_moments(policy, problem)
    Q, R, K = problem.Q, problem.R, policy.K
    u_mean = -K @ mu + policy.l
    return float(
        np.trace(Q @ Sigma)
        + mu @ Q @ mu
        + np.trace(K.T @ R @ K @ Sigma)
        + u_mean @ R @ u_mean
    )


def dual_value(problem: ProblemSpec, lam: float) -> float:
    """Dual function D(lam) = J(u_lam) + lam (J_c(u_lam) - rho_bar).

    Evaluated through the stationary-moment closed forms, which makes it an
    independent check of the synthesized policy's ``h`` (the two must agree
    to about 1e-6 relative).
    """
    if lam < 0.0:
        raise ValueError(f"multiplier must be nonnegative, got {lam!r}")
    policy = synthesize(problem, lam)
    J = lqr_cost_closed_form(policy, problem)
    J_c = risk_closed_form(policy, problem)
    return J + float(lam) * (J_c - problem.rho_bar)


def evaluate(policy: Policy, problem: ProblemSpec, n_states: int = 100,
             state_scale: float = 10.0, seed: int = 2718) -> EvalReport:
    """Full evaluation report for a synthesized policy.

    Residuals certify each fixed point: the Riccati defect of P, the
    Lyapunov defect of P_c, and the optimality-equation defect sampled at
    ``n_states`` seeded uniform states in [-state_scale, state_scale]^n.
    """
    F, rho = _closed_loop(policy, problem)
    J = lqr_cost_closed_form(policy, problem)
    P_c, _, J_c, C = _risk_parts(policy, problem)
    Q_lam, _ = lagrangian_weights(problem.stats, problem.Q, policy.lam)
    riccati = numlin.riccati_residual(problem.A, problem.B, Q_lam, problem.R, policy.P)
    lyapunov = numlin.lyapunov_residual(F, C, P_c)
    rng = np.random.Generator(np.random.Philox(key=seed))
    states = rng.uniform(-state_scale, state_scale, size=(n_states, problem.n))
    acoe = acoe_residual(policy, problem, states)
    return EvalReport(
        J=J,
        J_c=J_c,
        rho_bar=problem.rho_bar,
        dual_value=J + policy.lam * (J_c - problem.rho_bar),
        riccati_residual=riccati,
        lyapunov_residual=lyapunov,
        acoe_residual=acoe,
        spectral_radius=rho,
    )
