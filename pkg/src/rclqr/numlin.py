"""Dense-matrix kernels: pivoted solves, Riccati/Lyapunov fixed points, spectral radius.

Everything here targets the small dense systems (n <= ~16) that arise in
controller synthesis.  The Riccati and Lyapunov solvers are fixed-point
iterations on the backward value recursion, which is also how the rest of
the package defines those objects, so the kernels double as the reference
construction rather than wrapping a spectral factorization.
"""

import warnings

import numpy as np
from scipy.linalg import LinAlgWarning, lu_factor, lu_solve

from .errors import ConvergenceError, InstabilityError, SingularMatrixError

# Pivot magnitudes below this declare the system singular.
PIVOT_TOL = 1e-12


def symmetrize(M):
    """Average a nearly-symmetric matrix with its transpose."""
    return 0.5 * (M + M.T)


def solve_linear(M, b):
    """Solve ``M x = b`` by LU factorization with partial pivoting.

    The solution is refined until the residual satisfies
    ``||Mx - b||_inf <= 1e-10 * (1 + ||b||_inf)``.

    Raises
    ------
    SingularMatrixError
        If any pivot magnitude falls below 1e-12, or the refined residual
        never meets the tolerance (ill-conditioned system).
    """
    M = np.asarray(M, dtype=float)
    b = np.asarray(b, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {M.shape}")
    if b.shape != (M.shape[0],):
        raise ValueError(f"right-hand side shape {b.shape} does not match matrix {M.shape}")
    with warnings.catch_warnings():
        # singularity is reported through the pivot check below
        warnings.simplefilter("ignore", LinAlgWarning)
        lu, piv = lu_factor(M)
    pivots = np.abs(np.diag(lu))
    if pivots.size and pivots.min() < PIVOT_TOL:
        raise SingularMatrixError(
            f"pivot magnitude {pivots.min():.3e} below threshold {PIVOT_TOL:.0e}"
        )
    x = lu_solve((lu, piv), b)
    tol = 1e-10 * (1.0 + np.abs(b).max(initial=0.0))
    for _ in range(3):  # iterative refinement, usually a no-op
        r = b - M @ x
        if np.abs(r).max(initial=0.0) <= tol:
            return x
        x = x + lu_solve((lu, piv), r)
    raise SingularMatrixError("no solution within tolerance (system too ill-conditioned)")


def spectral_radius(M):
    """Largest eigenvalue modulus of a square matrix.

    Uses the LAPACK Hessenberg-reduction/QR eigenvalue iteration and falls
    back to a two-step power iteration in the (rare) event that the QR
    sweep fails to converge.
    """
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {M.shape}")
    if not np.isfinite(M).all():
        raise ValueError("matrix entries must be finite")
    if M.size == 0:
        return 0.0
    try:
        return float(np.abs(np.linalg.eigvals(M)).max())
    except np.linalg.LinAlgError:
        return _power_iteration_radius(M)


def _power_iteration_radius(M, max_iter=50_000, tol=1e-9):
    # Order-2 Krylov power iteration: fitting M^2 v = a Mv + b v recovers
    # the characteristic polynomial of the dominant block, so complex
    # conjugate pairs (where plain Rayleigh quotients oscillate) settle too.
    rng = np.random.Generator(np.random.Philox(0x5EED))
    n = M.shape[0]
    v = rng.standard_normal(n)
    v /= np.linalg.norm(v)
    est = np.inf
    hits = 0
    for _ in range(max_iter):
        w1 = M @ v
        w2 = M @ w1
        nv = np.linalg.norm(w2)
        if nv == 0.0:
            return 0.0
        coef, *_ = np.linalg.lstsq(np.column_stack([w1, v]), w2, rcond=None)
        roots = np.roots([1.0, -coef[0], -coef[1]])
        new = float(np.abs(roots).max())
        if abs(new - est) <= tol * max(1.0, new):
            hits += 1
            if hits >= 3:
                return new
        else:
            hits = 0
        est = new
        v = w2 / nv
    raise ConvergenceError("power iteration for the spectral radius failed to settle")


def riccati_step(A, B, Q_w, R, P):
    """One backward step of the discrete Riccati recursion.

    Returns ``Q_w + A'PA - A'PB (R + B'PB)^{-1} B'PA``.
    """
    BtP = B.T @ P
    BtPA = BtP @ A
    G = np.linalg.solve(R + BtP @ B, BtPA)
    return Q_w + A.T @ P @ A - BtPA.T @ G


def riccati_residual(A, B, Q_w, R, P):
    """Max-norm defect of ``P`` as a fixed point of the Riccati recursion."""
    return float(np.abs(P - riccati_step(A, B, Q_w, R, P)).max())


def solve_dare(A, B, Q_w, R, tol=1e-10, max_iter=100_000):
    """Fixed point of the discrete algebraic Riccati equation by value iteration.

    Starting from P = 0, iterates the backward recursion until successive
    iterates differ by less than ``tol`` in the max norm and the Riccati
    residual itself is below ``tol``.  Each iterate is symmetrized to
    suppress floating-point drift.

    ``tol`` is absolute; callers working with large penalty matrices should
    scale it with the data (see :func:`rclqr.synthesis.synthesize`).

    Raises
    ------
    ConvergenceError
        If the iterates exceed 1e12 in magnitude (the pair is not
        stabilizable / detectable enough for the recursion to settle) or
        ``max_iter`` is reached without convergence.
    """
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    Q_w = np.asarray(Q_w, dtype=float)
    R = np.asarray(R, dtype=float)
    n = A.shape[0]
    if A.shape != (n, n):
        raise ValueError("A must be square")
    if B.shape[0] != n:
        raise ValueError("B row count must match A")
    if Q_w.shape != (n, n):
        raise ValueError("Q_w must match A")
    if R.shape != (B.shape[1], B.shape[1]):
        raise ValueError("R must be square with B's column count")

    P = np.zeros((n, n))
    for _ in range(max_iter):
        P_next = symmetrize(riccati_step(A, B, Q_w, R, P))
        if not np.isfinite(P_next).all() or np.abs(P_next).max() > 1e12:
            raise ConvergenceError("Riccati iteration diverged (iterates exceed 1e12)")
        diff = np.abs(P_next - P).max()
        P = P_next
        if diff < tol and riccati_residual(A, B, Q_w, R, P) <= tol:
            return P
    raise ConvergenceError(f"Riccati iteration did not converge in {max_iter} iterations")


def lyapunov_residual(F, C, P):
    """Max-norm defect of ``P`` as a fixed point of ``P = C + F'PF``."""
    return float(np.abs(P - (C + F.T @ P @ F)).max())


def solve_discrete_lyapunov(F, C, tol=1e-10, max_iter=200):
    """Solve ``P = C + F'PF`` for Schur-stable ``F``.

    Accumulates the series sum_k F'^k C F^k by doubling (each pass squares
    the propagator), so convergence takes O(log) passes even for spectral
    radii close to one.  ``tol`` bounds the absolute max-norm residual of
    the returned fixed point.

    Raises
    ------
    InstabilityError
        If ``spectral_radius(F) >= 1`` (the series diverges).
    ConvergenceError
        If the doubling passes are exhausted without meeting ``tol``.
    """
    F = np.asarray(F, dtype=float)
    C = np.asarray(C, dtype=float)
    if F.shape != C.shape or F.ndim != 2 or F.shape[0] != F.shape[1]:
        raise ValueError("F and C must be square matrices of equal shape")
    rho = spectral_radius(F)
    if rho >= 1.0:
        raise InstabilityError(f"spectral radius {rho:.6f} >= 1; Lyapunov series diverges")

    S = symmetrize(np.array(C, dtype=float))
    G = F.copy()
    for _ in range(max_iter):
        T = G.T @ S @ G
        S = symmetrize(S + T)
        G = G @ G
        if np.abs(T).max(initial=0.0) <= 0.01 * tol and lyapunov_residual(F, C, S) <= tol:
            return S
    raise ConvergenceError(f"Lyapunov doubling did not converge in {max_iter} passes")
