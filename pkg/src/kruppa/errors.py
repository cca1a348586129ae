class KruppaError(Exception):
    """Base class for all errors raised by this package."""


class InvalidIntrinsicsError(KruppaError, ValueError):
    pass


class GeneralPositionError(KruppaError, ValueError):
    """Input hits a special position excluded from the generic case."""


class DegenerateConfigurationError(KruppaError, ValueError):
    pass


class UndefinedImageError(KruppaError, ValueError):
    """Point is a base point of a birational map."""


class InvalidModelError(KruppaError, ValueError):
    pass


class PointAtInfinityError(KruppaError, ValueError):
    pass


class NoValidPoseError(KruppaError):
    pass


class EstimationFailure(KruppaError):
    pass


class NoSolutionError(KruppaError):
    pass


class ParseError(KruppaError, ValueError):
    def __init__(self, msg, line=None):
        self.line = line
        super().__init__(f"line {line}: {msg}" if line is not None else msg)


class ValidationError(ParseError):
    """Well-formed record holding an unusable value (e.g. NaN)."""
