"""Exception types raised across the package."""


class IVBanditsError(Exception):
    """Base class for all package errors."""


class DimensionMismatch(IVBanditsError, ValueError):
    pass


class NotPSD(IVBanditsError, ValueError):
    pass


class SingularDesign(IVBanditsError, ValueError):
    pass


class DegenerateSpan(IVBanditsError, ValueError):
    pass


class BadParam(IVBanditsError, ValueError):
    pass


class NotStochastic(BadParam):
    pass


class TieAtTop(IVBanditsError, ValueError):
    pass


class TooFewSamples(IVBanditsError, ValueError):
    pass


class BadDelta(BadParam):
    pass


class EmptySelection(IVBanditsError, ValueError):
    pass


class ConfigError(IVBanditsError, ValueError):
    """Config file could not be parsed or failed validation."""


class ParseError(ConfigError):
    """Config text is not valid TOML; the message carries the line and column."""


class ValidationError(ConfigError):
    """Config parsed but a field is unknown, missing or out of range."""


class CapExceeded(IVBanditsError, RuntimeError):
    """An adaptive run hit its phase or sample cap.

    The partial run is attached as ``result`` so callers can still log it.
    """

    def __init__(self, message, result=None):
        super().__init__(message)
        self.result = result
