"""Exception hierarchy shared by all mixflow modules."""


class MixflowError(Exception):
    """Base class; the CLI maps these to exit code 2."""


class ConfigurationError(MixflowError, ValueError):
    pass


class DimensionError(MixflowError, ValueError):
    pass


class FormatError(MixflowError, ValueError):
    pass


class SolvabilityError(MixflowError, ValueError):
    """Right-hand side is incompatible with the torus (nonzero mean, kernel modes)."""


class DegeneracyError(MixflowError, ValueError):
    """A density or coefficient field drops below the admissible floor."""


class ConvergenceError(MixflowError, RuntimeError):
    def __init__(self, message, residual=float("nan"), iterations=0):
        super().__init__(f"{message} (residual={residual:.3e}, iterations={iterations})")
        self.residual = residual
        self.iterations = iterations


class ConstraintViolationError(MixflowError, ValueError):
    def __init__(self, message, violation=float("nan")):
        super().__init__(f"{message} (|div v| = {violation:.3e})")
        self.violation = violation


class StepSizeError(MixflowError, ValueError):
    pass


class DivergenceError(MixflowError, RuntimeError):
    def __init__(self, message, last_time=float("nan")):
        super().__init__(f"{message} (last valid time {last_time:.6g})")
        self.last_time = last_time


class InfeasibilityError(MixflowError, ValueError):
    def __init__(self, message, best_residual=float("nan")):
        super().__init__(f"{message} (best relative residual {best_residual:.3e})")
        self.best_residual = best_residual


class ReachabilityError(MixflowError, ValueError):
    """Raised when the pushforward necessary condition fails."""
