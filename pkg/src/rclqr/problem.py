"""Problem container: system matrices, penalties, noise model, risk budget."""

import warnings
from dataclasses import dataclass, field

import numpy as np

from . import noise as noise_mod
from .noise import NoiseModel, NoiseStats


def risk_tolerance_transform(rho, stats, Q):
    """Map the predictive-variance budget rho to the quadratic-constraint
    budget: ``rho_bar = rho - m4 + 4 tr{(WQ)^2}``.

    Emits a RuntimeWarning (not an error) when the transformed budget is
    nonpositive: the constraint may then be infeasible, which the dual
    solver surfaces as a hard error only after its feasibility scan.
    """
    WQ = np.asarray(stats.cov, dtype=float) @ np.asarray(Q, dtype=float)
    rho_bar = float(rho) - stats.weighted_fourth + 4.0 * float(np.trace(WQ @ WQ))
    if rho_bar <= 0.0:
        warnings.warn(
            f"transformed risk budget is nonpositive ({rho_bar:.6g}); "
            "the constraint may be infeasible",
            RuntimeWarning,
            stacklevel=2,
        )
    return rho_bar


def _inverse_risk_transform(rho_bar, stats, Q):
    WQ = np.asarray(stats.cov, dtype=float) @ np.asarray(Q, dtype=float)
    return float(rho_bar) + stats.weighted_fourth - 4.0 * float(np.trace(WQ @ WQ))


@dataclass
class ProblemSpec:
    """One risk-constrained LQR instance.

    ``stats`` caches the noise statistics weighted by this problem's Q;
    ``rho`` is the original predictive-variance budget and ``rho_bar`` the
    derived quadratic-constraint budget.  Stabilizability of (A, B) is
    certified operationally: the first controller synthesis either
    converges with a stable closed loop or raises.
    """

    A: np.ndarray
    B: np.ndarray
    Q: np.ndarray
    R: np.ndarray
    noise: NoiseModel
    rho: float
    stats: NoiseStats
    rho_bar: float = field(init=False)

    def __post_init__(self):
        self.A = np.atleast_2d(np.asarray(self.A, dtype=float))
        self.B = np.atleast_2d(np.asarray(self.B, dtype=float))
        n = self.A.shape[0]
        if self.A.shape != (n, n):
            raise ValueError(f"A must be square, got {self.A.shape}")
        if self.B.shape[0] != n:
            raise ValueError(f"B must have {n} rows, got {self.B.shape}")
        if not (np.isfinite(self.A).all() and np.isfinite(self.B).all()):
            raise ValueError("system matrices must be finite")
        self.Q = noise_mod._check_psd(self.Q, "Q")
        if self.Q.shape != (n, n):
            raise ValueError(f"Q must be {n}x{n}, got {self.Q.shape}")
        self.R = np.atleast_2d(np.asarray(self.R, dtype=float))
        m = self.B.shape[1]
        if self.R.shape != (m, m):
            raise ValueError(f"R must be {m}x{m}, got {self.R.shape}")
        if np.abs(self.R - self.R.T).max() > 1e-9 * (1.0 + np.abs(self.R).max()):
            raise ValueError("R must be symmetric")
        self.R = 0.5 * (self.R + self.R.T)
        if np.linalg.eigvalsh(self.R).min() <= 0.0:
            raise ValueError("R must be positive definite")
        if self.noise.dim != n:
            raise ValueError(
                f"noise dimension {self.noise.dim} does not match state dimension {n}"
            )
        self.rho = float(self.rho)
        if not self.rho > 0.0:
            raise ValueError("risk budget rho must be positive")
        if self.stats.dim != n:
            raise ValueError("cached noise statistics do not match the state dimension")
        self.rho_bar = risk_tolerance_transform(self.rho, self.stats, self.Q)

    @property
    def n(self):
        return self.A.shape[0]

    @property
    def m(self):
        return self.B.shape[1]

    @classmethod
    def create(cls, A, B, Q, R, noise, rho=None, rho_bar=None, certify=True,
               m4_draws=noise_mod.MIXTURE_M4_DRAWS, m4_seed=noise_mod.MIXTURE_M4_SEED):
        """Build a problem, computing noise statistics against Q.

        Exactly one of ``rho`` / ``rho_bar`` must be given; a ``rho_bar``
        is converted back to the equivalent ``rho`` through the moment
        identity so reports can echo both.  With ``certify=True`` the
        unconstrained controller is synthesized once to certify that
        (A, B) is stabilizable.
        """
        if (rho is None) == (rho_bar is None):
            raise ValueError("exactly one of rho and rho_bar must be given")
        Q = np.atleast_2d(np.asarray(Q, dtype=float))
        stats = noise_mod.stats_for(noise, Q, m4_draws=m4_draws, m4_seed=m4_seed)
        if rho is None:
            rho = _inverse_risk_transform(rho_bar, stats, Q)
            if rho <= 0.0:
                raise ValueError(
                    f"rho_bar={rho_bar!r} implies a nonpositive original budget rho={rho!r}"
                )
        problem = cls(A=A, B=B, Q=Q, R=R, noise=noise, rho=rho, stats=stats)
        if certify:
            from .synthesis import synthesize  # deferred: synthesis imports this module

            synthesize(problem, 0.0)
        return problem
