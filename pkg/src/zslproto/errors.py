"""Exception hierarchy for the pipeline.

The CLI maps these onto process exit codes: ConfigError -> 2,
DataError -> 3, NumericalError -> 4, anything else -> 1.
"""


class PipelineError(Exception):
    """Base class for every error this package raises deliberately."""

    exit_code = 1


class ConfigError(PipelineError):
    """Invalid or inconsistent run configuration."""

    exit_code = 2


class DataError(PipelineError):
    """Malformed, missing, or invariant-violating data."""

    exit_code = 3


class BundleFormatError(DataError):
    """Structural problem in an on-disk bundle file.

    Carries the offending file name and, when known, the byte offset at
    which parsing failed.
    """

    def __init__(self, message, *, filename=None, offset=None):
        loc = ""
        if filename is not None:
            loc = f" [file={filename}"
            if offset is not None:
                loc += f", offset={offset}"
            loc += "]"
        super().__init__(message + loc)
        self.filename = filename
        self.offset = offset


class NumericalError(PipelineError):
    """Numerical failure: divergence, singular system, non-finite result."""

    exit_code = 4


class StageError(PipelineError):
    """A pipeline stage failed; wraps the cause and names the stage.

    The exit code of the underlying failure is preserved.
    """

    def __init__(self, stage, cause):
        super().__init__(f"stage '{stage}' failed: {cause}")
        self.stage = stage
        self.cause = cause
        self.exit_code = getattr(cause, "exit_code", 1)
