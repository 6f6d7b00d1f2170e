"""Exception types shared across the package."""


class ConfigError(ValueError):
    """Invalid configuration or missing prerequisite data."""

    def __init__(self, message, field=None):
        super().__init__(message)
        self.field = field


class ThresholdExceeded(ValueError):
    """Coupling at or above the critical value a*; no minimizer exists."""

    def __init__(self, a, a_star):
        super().__init__(
            f"coupling a={a:.17g} is not below the critical value a*={a_star:.17g}; "
            "no minimizer exists for a >= a* and e(a) = -inf for a > a*"
        )
        self.a = a
        self.a_star = a_star


class DivergedNumerically(ArithmeticError):
    def __init__(self, radius):
        super().__init__(f"non-finite state during radial integration at r={radius:.6g}")
        self.radius = radius


class NotApplicable(ValueError):
    """Quantity undefined for the input (e.g. a zero field)."""


class DescentError(RuntimeError):
    """Gradient descent could not make progress (step size underflow)."""


class NoFitError(RuntimeError):
    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report
