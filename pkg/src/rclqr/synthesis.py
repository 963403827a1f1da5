"""Multiplier-parameterized optimal controller synthesis.

For a multiplier ``lam >= 0`` the risk term folds into an inflated state
penalty ``Q_lam = Q + 4 lam Q W Q`` and a linear stage cost ``2 lam S'x``
with ``S = 2 Q M3``.  The optimal stationary policy for the resulting
average-cost problem is affine, ``u(x) = -K x + l``, with

    P:  fixed point of the Riccati recursion with penalty Q_lam,
    K:  (R + B'PB)^{-1} B'PA,
    g:  fixed point  g' = (2 w' P + g')(A - BK) + 2 lam S',
    l:  -(1/2) (R + B'PB)^{-1} B'(2 P w + g),
    h:  tr{P(W + w w')} + g'w - l'(R + B'PB) l - lam rho_bar,

where ``w`` is the noise mean.  ``h`` is the optimal average Lagrangian
value, including the constant budget offset ``-lam rho_bar``; the
average-cost optimality equation (ACOE) residual check below certifies
the whole construction at runtime.

Sign conventions: K is defined positive and applied as ``u = -Kx + l``,
the unique combination under which the closed loop ``A - BK`` is Schur
stable and the ACOE residual vanishes.  The constant term of ``h`` uses
the completed-square form ``-l'(R + B'PB) l``, which is what the Bellman
backup yields.
"""

from dataclasses import dataclass

import numpy as np

from . import numlin
from .errors import InstabilityError, RclqrError
from .problem import ProblemSpec


@dataclass
class Policy:
    """A stationary affine controller u(x) = -K x + l.

    Synthesized policies also carry the value parameters (P, g, h) for the
    multiplier ``lam`` they were built at.  Hand-built affine policies may
    leave those as None; only K and l are needed to evaluate costs.
    """

    lam: float
    K: np.ndarray
    l: np.ndarray
    P: np.ndarray | None = None
    g: np.ndarray | None = None
    h: float | None = None

    def __post_init__(self):
        self.K = np.atleast_2d(np.asarray(self.K, dtype=float))
        self.l = np.atleast_1d(np.asarray(self.l, dtype=float))

    def control(self, x):
        return -self.K @ x + self.l

    def closed_loop(self, problem):
        return problem.A - problem.B @ self.K

    def to_dict(self):
        out = {
            "lambda": float(self.lam),
            "K": self.K.tolist(),
            "l": self.l.tolist(),
        }
        if self.P is not None:
            out["P"] = self.P.tolist()
        if self.g is not None:
            out["g"] = self.g.tolist()
        if self.h is not None:
            out["h"] = float(self.h)
        return out


def lagrangian_weights(stats, Q, lam):
    """Inflated quadratic weight and linear weight for a multiplier.

    Returns ``(Q_lam, S)`` with ``Q_lam = Q + 4 lam Q W Q`` (symmetric PSD)
    and ``S = 2 Q M3``.
    """
    if lam < 0.0:
        raise ValueError(f"multiplier must be nonnegative, got {lam!r}")
    Q = np.asarray(Q, dtype=float)
    QWQ = Q @ stats.cov @ Q
    Q_lam = numlin.symmetrize(Q + 4.0 * float(lam) * QWQ)
    S = 2.0 * (Q @ stats.weighted_third)
    return Q_lam, S


def synthesize(problem: ProblemSpec, lam: float) -> Policy:
    """Synthesize the optimal stationary affine policy at multiplier ``lam``.

    Raises whatever the Riccati solver raises when (A, B) is not
    stabilizable, and InstabilityError if the resulting closed loop is not
    Schur stable (which certifies detectability operationally).  The
    returned policy is self-checked against the constant term of the
    optimality equation.
    """
    A, B, R = problem.A, problem.B, problem.R
    stats = problem.stats
    Q_lam, S = lagrangian_weights(stats, problem.Q, lam)

    # Absolute Riccati tolerance scaled to the penalty so large multipliers
    # do not push the stopping rule below the floating-point floor.
    tol = 1e-10 * (1.0 + np.abs(Q_lam).max())
    P = numlin.solve_dare(A, B, Q_lam, R, tol=tol)

    M = R + B.T @ P @ B
    K = np.linalg.solve(M, B.T @ P @ A)
    F = A - B @ K
    rho_F = numlin.spectral_radius(F)
    if rho_F >= 1.0:
        raise InstabilityError(
            f"closed loop unstable at lambda={lam!r} (spectral radius {rho_F:.6f})"
        )

    w = stats.mean
    # g solves (I - F)' g = 2 F' P w + 2 lam S; stability makes I - F invertible.
    g = numlin.solve_linear(
        (np.eye(problem.n) - F).T, 2.0 * F.T @ (P @ w) + 2.0 * float(lam) * S
    )
    l = -0.5 * np.linalg.solve(M, B.T @ (2.0 * P @ w + g))
    h_free = (
        float(np.trace(P @ (stats.cov + np.outer(w, w))))
        + float(g @ w)
        - float(l @ M @ l)
    )
    h = h_free - float(lam) * problem.rho_bar

    policy = Policy(lam=float(lam), K=K, l=l, P=P, g=g, h=h)
    # Constant-term identity of the ACOE; an exact algebraic identity given
    # (P, g, l), so failure signals an internal fault rather than roundoff.
    check = acoe_residual(policy, problem, np.zeros((1, problem.n)))
    if not check <= 1e-7 * (1.0 + abs(h_free)):
        raise RclqrError(
            f"internal inconsistency: optimality-equation constant residual {check:.3e}"
        )
    return policy


@dataclass
class BackwardPass:
    """Finite-horizon backward recursion output.

    ``P``, ``g``, ``z`` have T+1 entries (index t = 0..T, terminal values
    zero); ``K`` and ``l`` have T entries (t = 0..T-1).
    """

    P: list
    K: list
    g: list
    l: list
    z: list


def finite_horizon_backward(problem: ProblemSpec, lam: float, T: int) -> BackwardPass:
    """Exact T-step backward value recursion at multiplier ``lam``.

    With terminal values P_T = 0, g_T = 0, z_T = 0, for t = T..1:

        K_{t-1} = (R + B'P_t B)^{-1} B'P_t A
        P_{t-1} = Q_lam + A'P_t A - A'P_t B (R + B'P_t B)^{-1} B'P_t A
        g_{t-1} = (A - B K_{t-1})'(2 P_t w + g_t) + 2 lam S
        l_{t-1} = -(1/2)(R + B'P_t B)^{-1} B'(2 P_t w + g_t)
        z_{t-1} = z_t + tr{P_t (W + w w')} + g_t'w - l_{t-1}'(R + B'P_t B) l_{t-1}

    The gains use the value matrix one step ahead (P_t), which is the
    indexing the Bellman backup produces; the t -> infinity limits of all
    five sequences equal the stationary fixed points.
    """
    if T < 1:
        raise ValueError("horizon T must be at least 1")
    A, B, R = problem.A, problem.B, problem.R
    stats = problem.stats
    Q_lam, S = lagrangian_weights(stats, problem.Q, lam)
    w = stats.mean
    Wm = stats.cov + np.outer(w, w)

    n = problem.n
    P = [None] * (T + 1)
    g = [None] * (T + 1)
    z = [None] * (T + 1)
    K = [None] * T
    l = [None] * T
    P[T] = np.zeros((n, n))
    g[T] = np.zeros(n)
    z[T] = 0.0
    for t in range(T, 0, -1):
        Pt, gt = P[t], g[t]
        M = R + B.T @ Pt @ B
        BtPtA = B.T @ Pt @ A
        Kt = np.linalg.solve(M, BtPtA)
        K[t - 1] = Kt
        P[t - 1] = numlin.symmetrize(Q_lam + A.T @ Pt @ A - BtPtA.T @ Kt)
        drive = 2.0 * Pt @ w + gt
        g[t - 1] = (A - B @ Kt).T @ drive + 2.0 * float(lam) * S
        lt = -0.5 * np.linalg.solve(M, B.T @ drive)
        l[t - 1] = lt
        z[t - 1] = z[t] + float(np.trace(Pt @ Wm)) + float(gt @ w) - float(lt @ M @ lt)
    return BackwardPass(P=P, K=K, g=g, l=l, z=z)


def acoe_residual(policy: Policy, problem: ProblemSpec, states) -> float:
    """Worst-case defect of the average-cost optimality equation.

    For each supplied state x the left side is ``h + lam rho_bar + x'Px +
    g'x`` (the budget constant inside h cancels against the stage cost,
    which omits it) and the right side is the one-step Bellman backup at
    u = -Kx + l with the noise expectation expanded analytically:

        x'Q_lam x + 2 lam S'x + u'Ru + g'(Ax + Bu + w)
        + (Ax+Bu)'P(Ax+Bu) + 2 (Ax+Bu)'P w + tr{PW} + w'Pw.

    Returns the max absolute difference over the states.
    """
    if policy.P is None or policy.g is None or policy.h is None:
        raise ValueError("optimality residual needs a synthesized policy (P, g, h)")
    A, B, R = problem.A, problem.B, problem.R
    stats = problem.stats
    Q_lam, S = lagrangian_weights(stats, problem.Q, policy.lam)
    P, g, K, l = policy.P, policy.g, policy.K, policy.l
    lam = policy.lam
    w = stats.mean
    const = float(np.trace(P @ stats.cov)) + float(w @ P @ w)
    h_free = policy.h + lam * problem.rho_bar

    worst = 0.0
    for x in np.atleast_2d(np.asarray(states, dtype=float)):
        u = -K @ x + l
        y = A @ x + B @ u
        lhs = h_free + float(x @ P @ x) + float(g @ x)
        rhs = (
            float(x @ Q_lam @ x)
            + 2.0 * lam * float(S @ x)
            + float(u @ R @ u)
            + float(g @ (y + w))
            + float(y @ P @ y)
            + 2.0 * float(y @ P @ w)
            + const
        )
        worst = max(worst, abs(lhs - rhs))
    return worst
