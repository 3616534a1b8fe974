"""Exception types raised across the package."""


class EtlpError(Exception):
    """Base class for all errors raised by this package."""


class ParameterError(EtlpError, ValueError):
    """A parameter is outside its valid domain."""


class ShapeError(EtlpError, ValueError):
    """Array shapes do not conform."""


class NumericError(EtlpError, ValueError):
    """A NaN or otherwise non-finite value reached a numeric routine."""


class FormatError(EtlpError, ValueError):
    """Malformed input data (event files, record layouts)."""


class ConfigError(EtlpError, ValueError):
    """Invalid or unknown configuration entry."""


class FsmError(EtlpError, RuntimeError):
    """Illegal use of the hardware gradient unit's control state machine."""
