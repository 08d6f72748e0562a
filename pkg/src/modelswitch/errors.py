"""Exception types shared across the package.

The CLI maps these onto exit-code categories, so raising the right
class matters more than the message text: configuration and input
validation problems are user errors, everything else is internal.
"""


class ModelSwitchError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(ModelSwitchError):
    """Invalid configuration: bad values, missing sections, unknown policy."""


class ValidationError(ModelSwitchError):
    """A value or record violates a documented domain constraint."""


class CalibrationError(ConfigError):
    """A calibration target cannot be reached by the sampler family."""


class TraceParseError(ValidationError):
    """A trace file failed to parse.

    Carries the 1-based line number so the CLI can point at the
    offending record.
    """

    def __init__(self, path: str, line_no: int, message: str) -> None:
        super().__init__(f"{path}:{line_no}: {message}")
        self.path = path
        self.line_no = line_no


class EmptyWindowError(ModelSwitchError):
    """Statistics were requested from a window with no observations.

    The mean of an empty window is undefined; callers must treat this
    as "no data yet", never as zero.
    """
