"""Exception classes shared across the package, with CLI exit-code categories."""


class BinsepError(Exception):
    """Base class for all package-specific errors."""


class AudioFormatError(BinsepError):
    """Malformed or unsupported WAV content."""


class SampleRateError(BinsepError):
    """Audio at a rate the pipeline does not accept."""


class DimensionError(BinsepError):
    """Mismatched array shapes between pipeline stages."""


class MaskFileError(BinsepError):
    """Malformed mask exchange file or dimension shortfall."""


class ConvergenceError(BinsepError):
    """Model state became non-finite during EM."""


class DataError(BinsepError):
    """Degenerate or contract-violating signal content."""


# Exit-code categories for the command line front end. 0 is success,
# 1 is reserved for unexpected internal failures.
_EXIT_CODES = (
    (AudioFormatError, 3),
    (SampleRateError, 3),
    (MaskFileError, 4),
    (DimensionError, 5),
    (DataError, 5),
    (ConvergenceError, 6),
    (FileNotFoundError, 7),
    (OSError, 8),
    (ValueError, 2),
)


def exit_code_for(exc: BaseException) -> int:
    for cls, code in _EXIT_CODES:
        if isinstance(exc, cls):
            return code
    return 1
