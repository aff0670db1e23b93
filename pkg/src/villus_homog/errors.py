"""Exception hierarchy shared by all pipelines."""


class VillusHomogError(Exception):
    """Base class for every error raised by the package."""


class InvalidParameterError(VillusHomogError, ValueError):
    pass


class InvalidInitialConditionError(VillusHomogError, ValueError):
    pass


class StepSizeError(VillusHomogError, ValueError):
    pass


class InvalidProfileError(VillusHomogError, ValueError):
    pass


class SingularGeometryError(VillusHomogError, ValueError):
    pass


class UnsupportedGeometryError(VillusHomogError, ValueError):
    pass


class InvalidGridError(VillusHomogError, ValueError):
    pass


class AssumptionViolationError(VillusHomogError, ValueError):
    """A modelling assumption (C1)-(C3), (T1)-(T2) failed a sampled check."""

    def __init__(self, assumption, message):
        super().__init__(f"{assumption}: {message}")
        self.assumption = assumption


class SolverFailureError(VillusHomogError, RuntimeError):
    def __init__(self, message, residual=None):
        super().__init__(message if residual is None else f"{message} (residual={residual:.3e})")
        self.residual = residual


class ConfigError(VillusHomogError, ValueError):
    """Carries every validation problem found, each as ``(line, message)``."""

    def __init__(self, problems):
        self.problems = list(problems)
        lines = [f"line {ln}: {msg}" if ln else msg for ln, msg in self.problems]
        super().__init__("invalid configuration:\n  " + "\n  ".join(lines))
