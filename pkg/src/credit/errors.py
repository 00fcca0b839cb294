"""Error taxonomy shared by the library and the CLI.

Every class carries a distinct ``exit_code`` so that scripted callers can
tell failure modes apart without parsing stderr. Code 1 is reserved for
uncategorised failures.
"""


class CreditError(Exception):
    """Base class for all failures raised by this package."""

    exit_code = 1


class ParamError(CreditError):
    """A parameter is outside its documented domain."""

    exit_code = 2


class FormatError(CreditError):
    """A file does not follow the declared layout (magic, version, header)."""

    exit_code = 3


class DataError(CreditError):
    """Payload values violate a data invariant (non-finite entries etc.)."""

    exit_code = 4


class TruncationError(CreditError):
    """Declared shape and actual payload length disagree."""

    exit_code = 5


class IoError(CreditError):
    """The operating system refused a read or write."""

    exit_code = 6


class SensitivityError(CreditError):
    """Clipping state and the declared sensitivity bound are inconsistent."""

    exit_code = 7


class DomainError(CreditError):
    """A mathematical function was evaluated outside its domain."""

    exit_code = 8


class MarginError(CreditError):
    """A concentration bound was requested with a nonpositive margin."""

    exit_code = 9


class CalibrationError(CreditError):
    """No usable point exists on the requested calibration grid."""

    exit_code = 10


class RankError(CreditError):
    """A least-squares fit is underdetermined."""

    exit_code = 11


class TightnessViolation(CreditError):
    """A measured channel rate escaped its proven bracket."""

    exit_code = 12
