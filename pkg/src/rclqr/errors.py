"""Exception types shared across the package."""


class RclqrError(Exception):
    """Base class for package-specific failures."""


class SingularMatrixError(RclqrError):
    """Linear system has no solution within tolerance."""


class ConvergenceError(RclqrError):
    """An iterative procedure diverged or hit its iteration cap."""


class InstabilityError(RclqrError):
    """A closed-loop matrix is not Schur stable."""


class InfeasibilityError(RclqrError):
    """No scanned multiplier satisfies the risk constraint.

    ``scanned`` holds the (lambda, risk) evidence pairs from the scan.
    """

    def __init__(self, message, scanned=None):
        super().__init__(message)
        self.scanned = list(scanned) if scanned is not None else []


class SimulationOverflowError(RclqrError):
    """State norm exceeded the overflow guard during a rollout."""


class ConfigError(RclqrError):
    """Configuration document is malformed or violates an invariant.

    ``problems`` lists every violation, each prefixed with the config path
    of the offending field.
    """

    def __init__(self, problems):
        if isinstance(problems, str):
            problems = [problems]
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))
