"""Risk-constrained average-cost LQR: synthesis, duality, simulation.

The package synthesizes the optimal stationary affine controller for the
infinite-horizon LQR problem with a one-step predictive-variance risk
constraint, solves for the optimal dual multiplier by projected
subgradient ascent or bisection, and cross-validates every closed form
against independent oracles (finite-horizon recursion, stationary-moment
identities, Monte-Carlo simulation).
"""

from .errors import (
    ConfigError,
    ConvergenceError,
    InfeasibilityError,
    InstabilityError,
    RclqrError,
    SimulationOverflowError,
    SingularMatrixError,
)
from .numlin import (
    solve_dare,
    solve_discrete_lyapunov,
    solve_linear,
    spectral_radius,
)
from .noise import (
    Empirical,
    Gaussian,
    GaussianMixture,
    NoiseStats,
    analytic_stats,
    make_rng,
    mc_stats,
)
from .problem import ProblemSpec, risk_tolerance_transform
from .synthesis import (
    Policy,
    acoe_residual,
    finite_horizon_backward,
    lagrangian_weights,
    synthesize,
)
from .evaluation import (
    EvalReport,
    dual_value,
    evaluate,
    lqr_cost_closed_form,
    risk_closed_form,
    risk_via_moments,
    stationary_moments,
)
from .dual import (
    DualTrace,
    StepSchedule,
    bisection_lambda,
    estimate_certified_constants,
    rate_certificate,
    solve_primal_dual,
    step_size,
    subgradient,
)
from .sim import (
    Trajectory,
    empirical_costs,
    empirical_predictive_variance,
    ensemble_costs,
    rollout,
)
from .presets import uav_problem

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "ConvergenceError",
    "DualTrace",
    "Empirical",
    "EvalReport",
    "Gaussian",
    "GaussianMixture",
    "InfeasibilityError",
    "InstabilityError",
    "NoiseStats",
    "Policy",
    "ProblemSpec",
    "RclqrError",
    "SimulationOverflowError",
    "SingularMatrixError",
    "StepSchedule",
    "Trajectory",
    "acoe_residual",
    "analytic_stats",
    "bisection_lambda",
    "dual_value",
    "empirical_costs",
    "empirical_predictive_variance",
    "ensemble_costs",
    "estimate_certified_constants",
    "evaluate",
    "finite_horizon_backward",
    "lagrangian_weights",
    "lqr_cost_closed_form",
    "make_rng",
    "mc_stats",
    "rate_certificate",
    "risk_closed_form",
    "risk_tolerance_transform",
    "risk_via_moments",
    "rollout",
    "solve_dare",
    "solve_discrete_lyapunov",
    "solve_linear",
    "solve_primal_dual",
    "spectral_radius",
    "stationary_moments",
    "step_size",
    "subgradient",
    "synthesize",
    "uav_problem",
]
