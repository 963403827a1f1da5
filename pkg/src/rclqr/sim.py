"""Monte-Carlo rollouts of the closed-loop system and empirical estimators."""

import csv
from dataclasses import dataclass

import numpy as np

from .errors import SimulationOverflowError
from .noise import make_rng, sample_many
from .problem import ProblemSpec
from .synthesis import Policy

_OVERFLOW_NORM = 1e12


@dataclass
class Trajectory:
    """One seeded closed-loop rollout: T+1 states, T inputs, T noises."""

    states: np.ndarray   # (T+1, n)
    inputs: np.ndarray   # (T, m)
    noises: np.ndarray   # (T, n)
    seed: int
    T: int

    def __post_init__(self):
        if self.states.shape[0] != self.T + 1:
            raise ValueError("states must hold T+1 rows")
        if self.inputs.shape[0] != self.T or self.noises.shape[0] != self.T:
            raise ValueError("inputs and noises must hold T rows")

    def to_csv(self, path):
        """Columns: t, x1..xn, u1..um (inputs blank on the final row)."""
        n = self.states.shape[1]
        m = self.inputs.shape[1]
        header = ["t"] + [f"x{i+1}" for i in range(n)] + [f"u{i+1}" for i in range(m)]
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            for t in range(self.T):
                writer.writerow([t] + [repr(v) for v in self.states[t]]
                                + [repr(v) for v in self.inputs[t]])
            writer.writerow([self.T] + [repr(v) for v in self.states[self.T]] + [""] * m)


def rollout(problem: ProblemSpec, policy: Policy, x0, T: int, seed: int) -> Trajectory:
    """Simulate x_{t+1} = A x_t + B u_t + w_t under u_t = -K x_t + l.

    The T disturbances are drawn up front from the seeded counter-based
    generator (the vectorized form of noise.sample), so replays with the
    same seed are bit-identical.  Raises SimulationOverflowError if any
    state norm exceeds 1e12 (an unstable or mis-scaled policy).
    """
    if T < 1:
        raise ValueError("horizon T must be at least 1")
    x0 = np.asarray(x0, dtype=float)
    if x0.shape != (problem.n,):
        raise ValueError(f"x0 must have shape ({problem.n},)")
    rng = make_rng(seed)
    w = sample_many(problem.noise, rng, T)
    F = problem.A - problem.B @ policy.K
    drift = w + problem.B @ policy.l

    states = np.empty((T + 1, problem.n))
    states[0] = x0
    x = x0
    for t in range(T):
        x = F @ x + drift[t]
        states[t + 1] = x

    norms = np.linalg.norm(states, axis=1)
    bad = ~np.isfinite(norms) | (norms > _OVERFLOW_NORM)
    if bad.any():
        t_bad = int(np.argmax(bad))
        raise SimulationOverflowError(
            f"state norm exceeded {_OVERFLOW_NORM:.0e} at step {t_bad}"
        )
    inputs = -(states[:T] @ policy.K.T) + policy.l
    return Trajectory(states=states, inputs=inputs, noises=w, seed=int(seed), T=int(T))


def default_burn_in(T: int) -> int:
    """Transient-shedding default: min(1000, T // 10)."""
    return min(1000, T // 10)


def empirical_costs(traj: Trajectory, problem: ProblemSpec, burn_in: int):
    """Time-averaged stage cost and risk integrand over t in [burn_in, T).

    Returns ``(J_hat, Jc_hat)`` where the risk integrand is
    ``4 x'QWQ x + 4 x'Q M3``.
    """
    if not 0 <= burn_in < traj.T:
        raise ValueError("burn_in must satisfy 0 <= burn_in < T")
    X = traj.states[burn_in:traj.T]
    U = traj.inputs[burn_in:]
    Q, R = problem.Q, problem.R
    J_hat = float(np.mean(
        np.einsum("ti,ij,tj->t", X, Q, X) + np.einsum("ti,ij,tj->t", U, R, U)
    ))
    QWQ = Q @ problem.stats.cov @ Q
    QM3 = Q @ problem.stats.weighted_third
    Jc_hat = float(np.mean(
        4.0 * np.einsum("ti,ij,tj->t", X, QWQ, X) + 4.0 * (X @ QM3)
    ))
    return J_hat, Jc_hat


def empirical_predictive_variance(traj: Trajectory, problem: ProblemSpec,
                                  burn_in: int) -> float:
    """Time-averaged one-step predictive variance of the state penalty.

    For each t the next state's penalty x_{t+1}'Q x_{t+1} is compared with
    its conditional mean given the trajectory through time t,

        m_t = y'Qy + 2 y'Q w + tr{QW} + w'Qw,   y = A x_t + B u_t,

    and the squared deviations are averaged over t in [burn_in, T).
    """
    if not 0 <= burn_in < traj.T - 1:
        raise ValueError("burn_in must satisfy 0 <= burn_in < T - 1")
    X = traj.states[burn_in:traj.T]
    U = traj.inputs[burn_in:]
    X1 = traj.states[burn_in + 1:traj.T + 1]
    Q = problem.Q
    w = problem.stats.mean
    Y = X @ problem.A.T + U @ problem.B.T
    m = (
        np.einsum("ti,ij,tj->t", Y, Q, Y)
        + 2.0 * (Y @ (Q @ w))
        + float(np.trace(Q @ problem.stats.cov))
        + float(w @ Q @ w)
    )
    penalties = np.einsum("ti,ij,tj->t", X1, Q, X1)
    return float(np.mean((penalties - m) ** 2))


def ensemble_costs(problem: ProblemSpec, policy: Policy, x0, T: int, seeds,
                   burn_in: int | None = None):
    """Average empirical cost/risk over independent seeded chains.

    The merged estimate is the mean over chains, so it does not depend on
    how the seeds are grouped.
    """
    if burn_in is None:
        burn_in = default_burn_in(T)
    js, jcs = [], []
    for seed in seeds:
        traj = rollout(problem, policy, x0, T, seed)
        J_hat, Jc_hat = empirical_costs(traj, problem, burn_in)
        js.append(J_hat)
        jcs.append(Jc_hat)
    return float(np.mean(js)), float(np.mean(jcs))
