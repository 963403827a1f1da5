"""Shared test utilities: independent oracles and random problem generators.

The oracles here are deliberately coded from scratch against textbook
definitions (value iteration, truncated series) so they share no code with
the package paths they check.
"""

import numpy as np

from rclqr import noise as noise_mod
from rclqr.problem import ProblemSpec


def lqr_value_iteration(A, B, Q, R, tol=1e-13, max_iter=200_000):
    """Plain textbook value-iteration LQR oracle: returns (P, K)."""
    P = np.zeros_like(A)
    for _ in range(max_iter):
        BtP = B.T @ P
        K = np.linalg.solve(R + BtP @ B, BtP @ A)
        P_next = Q + A.T @ P @ A - (BtP @ A).T @ K
        P_next = 0.5 * (P_next + P_next.T)
        if np.abs(P_next - P).max() < tol:
            P = P_next
            break
        P = P_next
    BtP = B.T @ P
    K = np.linalg.solve(R + BtP @ B, BtP @ A)
    return P, K


def truncated_lyapunov_sum(F, C, terms=200):
    """Oracle for the Lyapunov fixed point: sum_{k<terms} F'^k C F^k."""
    S = np.zeros_like(C)
    G = np.eye(F.shape[0])
    for _ in range(terms):
        S = S + G.T @ C @ G
        G = F @ G
    return S


def random_system(rng, n, m, radius=None):
    """Random (A, B, Q, R) with Q positive definite and R positive definite."""
    A = rng.normal(size=(n, n))
    target = radius if radius is not None else rng.uniform(0.3, 1.2)
    eigs = np.abs(np.linalg.eigvals(A)).max()
    if eigs > 0:
        A *= target / eigs
    B = rng.normal(size=(n, m))
    C = rng.normal(size=(n + 2, n))
    Q = C.T @ C / n
    D = rng.normal(size=(m, m))
    R = D.T @ D + 0.5 * np.eye(m)
    return A, B, Q, R


def random_gaussian_noise(rng, n, mean_scale=0.5):
    mean = rng.normal(scale=mean_scale, size=n)
    L = rng.normal(size=(n, n)) / np.sqrt(n)
    return noise_mod.Gaussian(mean=mean, cov=L @ L.T + 0.05 * np.eye(n))


def random_mixture_noise(rng, n, mean_scale=1.0):
    """Two-component mixture with distinct means: skewed, so M3 != 0."""
    w = rng.uniform(0.15, 0.85)
    means = rng.normal(scale=mean_scale, size=(2, n))
    covs = []
    for _ in range(2):
        L = rng.normal(size=(n, n)) / np.sqrt(n)
        covs.append(L @ L.T + 0.05 * np.eye(n))
    return noise_mod.GaussianMixture(weights=[w, 1.0 - w], means=means, covs=covs)


def random_problem(rng, n=None, m=None, mixture=False, rho_bar=None, m4_draws=200_000):
    """Random stabilizable problem; risk budget defaults to a slack value."""
    n = n if n is not None else int(rng.integers(2, 5))
    m = m if m is not None else int(rng.integers(1, n + 1))
    A, B, Q, R = random_system(rng, n, m)
    noise = (random_mixture_noise(rng, n) if mixture else random_gaussian_noise(rng, n))
    if rho_bar is None:
        return ProblemSpec.create(A, B, Q, R, noise, rho=1e6, certify=False,
                                  m4_draws=m4_draws)
    return ProblemSpec.create(A, B, Q, R, noise, rho_bar=rho_bar, certify=False,
                              m4_draws=m4_draws)
