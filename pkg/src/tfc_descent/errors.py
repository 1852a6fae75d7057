"""Exception hierarchy. The CLI maps each family to one exit code."""


class DescentError(Exception):
    """Base class for every error raised by this package."""


class ConfigurationError(DescentError, ValueError):
    pass


class DegenerateSegmentError(ConfigurationError):
    pass


class InfeasibleProfileError(DescentError):
    """Mass profile reaches the dry-mass floor."""


class SingularCostateError(DescentError, ArithmeticError):
    """||lambda_v|| fell below the floor; thrust direction undefined."""


class InnerSolverError(DescentError):
    def __init__(self, message, times=None):
        super().__init__(message)
        self.times = times


class RankDeficiencyError(InnerSolverError):
    def __init__(self, message, columns=(), times=None):
        super().__init__(message, times)
        self.columns = tuple(columns)


class DivergenceError(InnerSolverError):
    pass


class OuterConvergenceError(DescentError):
    def __init__(self, message, best_times=None, best_residual=None):
        super().__init__(message)
        self.best_times = best_times
        self.best_residual = best_residual


class SegmentCollapseError(OuterConvergenceError):
    """A thrust arc shrank to nothing; usually the wrong profile."""


class ProfileClassificationError(DescentError):
    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class PropagationError(DescentError):
    pass


class ArtifactError(DescentError):
    """Missing, malformed or tampered solve artifacts."""
