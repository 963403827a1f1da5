"""Projected subgradient ascent on the dual of the risk-constrained problem.

The dual function D(lam) = min_u [J(u) + lam (J_c(u) - rho_bar)] is concave
in the multiplier, and evaluating the minimizing policy at lam yields the
subgradient d = J_c(u_lam) - rho_bar.  The solver iterates

    lam_{k+1} = max(0, lam_k + zeta_k d_k)

under one of three step-size rules and records a full per-iteration trace.
A bisection reference solver and an a-posteriori rate certificate
(gap bounded by 3be/sqrt(k) for the certified rule, given dominating
bounds b >= |d_k| and e >= lam_k) support convergence diagnostics.
"""

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InfeasibilityError
from .evaluation import dual_value, lqr_cost_closed_form, risk_closed_form
from .problem import ProblemSpec
from .synthesis import synthesize

SCHEDULE_KINDS = ("certified", "diminishing", "constant")
_LAMBDA_CAP = 2.0 ** 30


@dataclass(frozen=True)
class StepSchedule:
    """Step-size rule descriptor.

    kinds: ``certified`` with bounds (b, e) gives zeta_k = (1/be) sqrt(2/k)
    and comes with the 3be/sqrt(k) gap guarantee; ``diminishing`` gives
    c/sqrt(k); ``constant`` gives a fixed zeta.
    """

    kind: str
    b: float | None = None
    e: float | None = None
    c: float | None = None
    zeta: float | None = None

    def __post_init__(self):
        if self.kind not in SCHEDULE_KINDS:
            raise ValueError(f"unknown schedule kind {self.kind!r}")
        required = {"certified": ("b", "e"), "diminishing": ("c",), "constant": ("zeta",)}
        for name in required[self.kind]:
            value = getattr(self, name)
            if value is None or not value > 0.0:
                raise ValueError(f"schedule parameter {name!r} must be strictly positive")

    @classmethod
    def certified(cls, b, e):
        return cls(kind="certified", b=float(b), e=float(e))

    @classmethod
    def diminishing(cls, c):
        return cls(kind="diminishing", c=float(c))

    @classmethod
    def constant(cls, zeta):
        return cls(kind="constant", zeta=float(zeta))

    def describe(self):
        if self.kind == "certified":
            return f"certified(b={self.b!r}, e={self.e!r})"
        if self.kind == "diminishing":
            return f"diminishing(c={self.c!r})"
        return f"constant(zeta={self.zeta!r})"


def step_size(schedule: StepSchedule, k: int) -> float:
    """Step size at iteration k >= 1 under the given rule."""
    if k < 1:
        raise ValueError("iteration index starts at 1")
    if schedule.kind == "certified":
        return (1.0 / (schedule.b * schedule.e)) * math.sqrt(2.0 / k)
    if schedule.kind == "diminishing":
        return schedule.c / math.sqrt(k)
    return schedule.zeta


@dataclass
class DualIterate:
    k: int
    lam: float
    subgradient: float
    dual_value: float
    J: float
    J_c: float


@dataclass
class DualTrace:
    """Per-iteration record of a primal-dual run."""

    iterations: list[DualIterate] = field(default_factory=list)
    step_rule: str = ""

    @property
    def lambdas(self):
        return np.array([it.lam for it in self.iterations])

    @property
    def lambda_bar(self):
        """Arithmetic mean of the recorded multipliers."""
        lams = self.lambdas
        return float(lams.mean()) if lams.size else 0.0

    def to_csv(self, path, j_star=None, rho_bar=None):
        """Write the trace; optional reference values append the relative
        optimality gap and relative constraint violation columns."""
        header = ["k", "lambda", "subgradient", "dual_value", "J", "J_c"]
        extras = j_star is not None and rho_bar is not None
        if extras:
            header += ["opt_gap", "violation"]
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            for it in self.iterations:
                row = [it.k, repr(it.lam), repr(it.subgradient), repr(it.dual_value),
                       repr(it.J), repr(it.J_c)]
                if extras:
                    row.append(repr(abs(it.J - j_star) / abs(j_star)))
                    row.append(repr((it.J_c - rho_bar) / rho_bar))
                writer.writerow(row)


def subgradient(problem: ProblemSpec, lam: float) -> float:
    """Dual subgradient at lam: J_c(u_lam) - rho_bar."""
    policy = synthesize(problem, lam)
    return risk_closed_form(policy, problem) - problem.rho_bar


def feasibility_scan(problem: ProblemSpec, points: int = 16):
    """Coarse geometric multiplier scan used for the Slater check and for
    bounding the certified schedule's constants.

    Returns (lams, risks) over {0} and a geometric ladder under rho_bar.
    """
    base = abs(problem.rho_bar) if problem.rho_bar > 0 else 1.0
    lams = [0.0] + [base * 2.0 ** (-j) for j in range(points - 2, -1, -1)]
    risks = []
    for lam in lams:
        policy = synthesize(problem, lam)
        risks.append(risk_closed_form(policy, problem))
    return np.array(lams), np.array(risks)


def _require_slater(problem, lams, risks):
    if not np.any(risks < problem.rho_bar):
        evidence = list(zip(lams.tolist(), risks.tolist()))
        raise InfeasibilityError(
            "no scanned multiplier meets the risk budget "
            f"(rho_bar={problem.rho_bar:.6g}, min risk {risks.min():.6g}); "
            "the constraint is likely infeasible",
            scanned=evidence,
        )


def estimate_certified_constants(problem: ProblemSpec, safety: float = 2.0):
    """Warm-up estimate of the certified schedule's bounds (b, e).

    b bounds the subgradient magnitudes and e the multiplier magnitudes
    seen along a run; both come from the coarse scan and are inflated by
    ``safety`` because the true run-time bounds are unknown a priori.

    The smallest scanned feasible multiplier bounds the optimum from
    above.  Because a certified step moves the multiplier by at most
    sqrt(2)/e regardless of b, e is additionally raised to the fixed point
    of ``e = bound + sqrt(2)/e`` so the schedule's own steps cannot push
    the iterates past it.
    """
    lams, risks = feasibility_scan(problem)
    _require_slater(problem, lams, risks)
    ds = risks - problem.rho_bar
    b = safety * float(np.abs(ds).max())
    feasible = lams[ds <= 0.0]
    smallest = float(feasible.min()) if feasible.size else float(lams.max())
    containment = 0.5 * (smallest + math.sqrt(smallest * smallest + 4.0 * math.sqrt(2.0)))
    e = safety * max(smallest, containment, float(lams[1]))
    return b, e


def solve_primal_dual(problem: ProblemSpec, schedule: StepSchedule,
                      max_iter: int = 500, lambda1: float = 0.0,
                      stop_tol: float = 1e-6):
    """Projected subgradient ascent on the dual.

    Each iteration synthesizes the policy at the current multiplier,
    evaluates its cost and risk in closed form, records the trace entry,
    and applies ``lam <- max(0, lam + zeta_k d_k)``.  Iteration stops at
    ``max_iter`` or once the subgradient is stationary (|d| <= stop_tol or
    the iterate is pinned at zero with d < 0) and complementary slackness
    ``lam |d| <= stop_tol (1 + |rho_bar|)`` holds.  ``stop_tol=0`` disables
    early stopping, which is how fixed-length traces are produced.

    Returns ``(policy, trace)``.  A run that meets the stop rule returns
    the final iterate's policy.  A constant-rule run that exhausts
    ``max_iter`` instead returns the policy at the averaged multiplier:
    constant steps may orbit the optimum forever, and the average is the
    object the certified guarantee speaks about.  Diminishing rules return
    the last iterate either way.
    """
    if lambda1 < 0.0:
        raise ValueError("initial multiplier must be nonnegative")
    if max_iter < 1:
        raise ValueError("max_iter must be at least 1")

    lams, risks = feasibility_scan(problem)
    _require_slater(problem, lams, risks)

    trace = DualTrace(step_rule=schedule.describe())
    lam = float(lambda1)
    slack_scale = stop_tol * (1.0 + abs(problem.rho_bar))
    converged = False
    for k in range(1, max_iter + 1):
        policy = synthesize(problem, lam)
        J = lqr_cost_closed_form(policy, problem)
        J_c = risk_closed_form(policy, problem)
        d = J_c - problem.rho_bar
        trace.iterations.append(DualIterate(
            k=k, lam=lam, subgradient=d, dual_value=J + lam * d, J=J, J_c=J_c,
        ))
        stationary = abs(d) <= stop_tol or (lam == 0.0 and d <= 0.0)
        if stop_tol > 0.0 and stationary and lam * abs(d) <= slack_scale:
            converged = True
            break
        lam = max(0.0, lam + step_size(schedule, k) * d)

    if schedule.kind == "constant" and not converged:
        final_lam = trace.lambda_bar
    else:
        final_lam = trace.iterations[-1].lam
    return synthesize(problem, final_lam), trace


def bisection_lambda(problem: ProblemSpec, lambda_hi: float = 1.0,
                     tol: float = 1e-8) -> float:
    """Reference optimum: smallest multiplier whose policy meets the budget.

    The risk of the synthesized policy is continuous and non-increasing in
    the multiplier, so the root of J_c(u_lam) = rho_bar is bracketed by
    doubling ``lambda_hi`` and then bisected to width ``tol``.  Returns 0
    when the unconstrained policy is already feasible.

    Raises InfeasibilityError if doubling exhausts the cap (2^30) with the
    constraint still violated.
    """
    if lambda_hi <= 0.0:
        raise ValueError("lambda_hi must be positive")
    d0 = subgradient(problem, 0.0)
    if d0 <= 0.0:
        return 0.0
    lo = 0.0
    hi = float(lambda_hi)
    scanned = [(0.0, d0 + problem.rho_bar)]
    d_hi = subgradient(problem, hi)
    scanned.append((hi, d_hi + problem.rho_bar))
    while d_hi > 0.0:
        lo = hi
        hi *= 2.0
        if hi > _LAMBDA_CAP:
            raise InfeasibilityError(
                f"constraint still violated at lambda={lo:.6g}; budget "
                f"rho_bar={problem.rho_bar:.6g} appears infeasible",
                scanned=scanned,
            )
        d_hi = subgradient(problem, hi)
        scanned.append((hi, d_hi + problem.rho_bar))
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if subgradient(problem, mid) > 0.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


@dataclass
class RateCertificate:
    """Per-iteration duality-gap check against the certified-rate bound."""

    ks: np.ndarray
    gaps: np.ndarray          # D* - D(lambda_bar_k)
    bounds: np.ndarray        # 3 b e / sqrt(k)
    violations: list[int]
    d_star: float
    lam_star: float
    b: float
    e: float

    @property
    def passed(self):
        return not self.violations

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["k", "dual_gap", "bound"])
            for k, gap, bound in zip(self.ks, self.gaps, self.bounds):
                writer.writerow([int(k), repr(float(gap)), repr(float(bound))])


def rate_certificate(trace: DualTrace, problem: ProblemSpec, b: float, e: float,
                     bisect_tol: float = 1e-10) -> RateCertificate:
    """Check D* - D(lambda_bar_k) <= 3be/sqrt(k) at every recorded iteration.

    D* is computed from the bisection reference optimum.  The bound is only
    guaranteed when (b, e) dominate the subgradient and multiplier
    magnitudes observed along the run; any violating iteration is flagged.
    """
    if not trace.iterations:
        raise ValueError("empty trace")
    lam_star = bisection_lambda(problem, tol=bisect_tol)
    d_star = dual_value(problem, lam_star)
    lams = trace.lambdas
    running = np.cumsum(lams) / np.arange(1, lams.size + 1)
    ks = np.arange(1, lams.size + 1)
    gaps = np.array([d_star - dual_value(problem, lb) for lb in running])
    bounds = 3.0 * b * e / np.sqrt(ks)
    violations = [int(k) for k, gap, bound in zip(ks, gaps, bounds) if gap > bound]
    return RateCertificate(
        ks=ks, gaps=gaps, bounds=bounds, violations=violations,
        d_star=d_star, lam_star=lam_star, b=float(b), e=float(e),
    )
