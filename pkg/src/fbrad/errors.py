"""Exception hierarchy.

Every error carries an ``exit_code`` so the command line can map failures to
distinct process exit statuses without a lookup table.
"""


class FbradError(Exception):
    exit_code = 1


class UsageError(FbradError):
    exit_code = 2


class ValidationError(FbradError, ValueError):
    """Bad argument or configuration value."""

    exit_code = 3


class DataError(FbradError, ValueError):
    """Input data violates a format or content requirement."""

    exit_code = 4


class FormatError(DataError):
    pass


class ParseError(DataError):
    pass


class NumericalError(FbradError, ArithmeticError):
    exit_code = 5


class ModelFileError(FbradError):
    exit_code = 7


class CorruptionError(ModelFileError):
    pass


class CompatibilityError(ModelFileError):
    pass
