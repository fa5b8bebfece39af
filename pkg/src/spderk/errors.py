"""Exception types shared across the package."""


class SpderkError(Exception):
    """Base class for all spderk errors."""


class DimensionError(SpderkError):
    """A field's length does not match the grid or operator it is used with."""


class CapabilityError(SpderkError):
    """An optional capability (e.g. a derivative map) is required but missing."""


class DivergenceError(SpderkError):
    """A trajectory produced a non-finite coefficient.

    Attributes:
        scheme: name of the stepper that diverged.
        step:   0-based index of the offending step.
        mode:   index of the first non-finite coefficient.
    """

    def __init__(self, scheme, step, mode):
        self.scheme = scheme
        self.step = step
        self.mode = mode
        super().__init__(
            "scheme %r produced a non-finite coefficient at step %d, mode %d"
            % (scheme, step, mode)
        )


class ConfigError(SpderkError):
    """A configuration file could not be parsed or validated."""


class StudyError(SpderkError):
    """A Monte-Carlo study failed (e.g. too many flagged realizations)."""
