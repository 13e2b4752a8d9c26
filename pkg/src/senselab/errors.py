"""Exception hierarchy shared by all senselab modules."""


class SenselabError(Exception):
    """Base class for every error raised by this package."""


class InputError(SenselabError, ValueError):
    """Input values are malformed: non-finite entries, bad ranges, mismatched lengths."""


class DimensionError(InputError):
    """An array shape violates an operation's contract."""


class ConfigurationError(SenselabError, ValueError):
    """A configuration value is outside the supported set."""


class ConvergenceError(SenselabError, ArithmeticError):
    """An iterative routine hit its sweep cap without converging."""


class ParseError(SenselabError, ValueError):
    """A serialized artifact could not be parsed."""


class DecodeError(SenselabError, ValueError):
    """A packed or serialized payload is structurally invalid."""


class DegenerateGeometryError(SenselabError, ArithmeticError):
    """The measurement geometry admits no well-posed solution."""


class PeakDeficitError(SenselabError, RuntimeError):
    """The spectrum exposes fewer local peaks than requested paths.

    Carries the peak angles that were found (degrees, ascending) so the
    caller can decide on a padding policy.
    """

    def __init__(self, message, found_deg=()):
        super().__init__(message)
        self.found_deg = tuple(float(a) for a in found_deg)
