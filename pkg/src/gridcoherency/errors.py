"""Exception hierarchy.

Every error carries the process exit code the CLI reports for it:
2 for input/format problems, 3 for numerical failures, 4 for bad
configuration.
"""


class GridCoherencyError(Exception):
    exit_code = 1


class FormatError(GridCoherencyError):
    exit_code = 2


class NonUniformSamplingError(FormatError):
    pass


class ConsistencyError(FormatError):
    pass


class StructuralError(FormatError):
    pass


class NumericalError(GridCoherencyError):
    exit_code = 3


class InsufficientSamplesError(NumericalError):
    pass


class DegenerateSignalError(NumericalError):
    pass


class UndefinedIndexError(NumericalError):
    pass


class IntegrationDivergedError(NumericalError):
    def __init__(self, t, message=None):
        self.t = t
        super().__init__(message or f"integration diverged at t = {t:.6g} s")


class ConfigError(GridCoherencyError):
    exit_code = 4


class ParameterError(ConfigError):
    pass


class WindowTooLongError(ConfigError):
    pass


class BandTooNarrowError(ConfigError):
    pass


class PipelineError(GridCoherencyError):
    """A module error annotated with the window and stage it came from."""

    def __init__(self, cause, stage, window=None):
        self.cause = cause
        self.stage = stage
        self.window = window
        self.exit_code = getattr(cause, "exit_code", 1)
        where = f"stage {stage!r}" if window is None else f"window {window}, stage {stage!r}"
        super().__init__(f"{where}: {type(cause).__name__}: {cause}")
