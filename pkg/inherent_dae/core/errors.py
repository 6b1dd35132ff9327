"""
Exception hierarchy for the inherent-ODE machinery.
Numerical failures derive from RuntimeError, bad input from ValueError.
"""


class InherentDaeError(RuntimeError):
    """Base class for numerical failures of a construction or integration"""


class SingularPointError(InherentDaeError):
    """A smooth construction hit a singular point (zero pivot, singular block)"""


class DefinitenessError(SingularPointError):
    """Cholesky pivot became non-positive"""


class RankDeficiencyError(InherentDaeError):
    """Rank at a point differs from the rank fixed at the reference point"""


class RegularityError(InherentDaeError):
    """No level mu up to the configured bound satisfies the hypothesis"""


class ConvergenceError(InherentDaeError):
    """Newton or Gauss-Newton iteration exhausted its budget"""

    def __init__(self, message: str, residuals=None):
        super().__init__(message)
        self.residuals = list(residuals or [])


class StepSizeError(InherentDaeError):
    """Step size underflow or step budget exhausted"""

    def __init__(self, message: str, steps_taken: int = 0, rejected: int = 0):
        super().__init__(message)
        self.steps_taken = steps_taken
        self.rejected = rejected


class ConfigurationError(ValueError):
    """Invalid combination of problem, method, version or parameters"""


class ShapeError(ValueError):
    """Non-conformable operands or mismatched Taylor orders"""
