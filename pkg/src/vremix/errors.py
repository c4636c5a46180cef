"""Exception hierarchy.

Every error carries an ``exit_code`` used by the command-line front end:
2 for bad input or configuration, 1 for numerical failures.
"""


class VremixError(Exception):
    exit_code = 1


class InputError(VremixError):
    exit_code = 2


class NumericalFailure(VremixError):
    exit_code = 1


class EmptySeries(InputError):
    pass


class AlignmentError(InputError):
    pass


class InsufficientData(InputError):
    pass


class ParseError(InputError):
    def __init__(self, message, path=None, line=None):
        self.path = path
        self.line = line
        where = ""
        if path is not None:
            where = f"{path}"
            if line is not None:
                where += f":{line}"
            where += ": "
        super().__init__(where + message)


class ValidationError(InputError):
    pass


class GapError(InputError):
    def __init__(self, message, missing=()):
        self.missing = list(missing)
        super().__init__(message)


class ConfigError(InputError):
    pass


class RangeError(InputError):
    pass


class NotFound(InputError):
    pass


class DomainError(NumericalFailure, ValueError):
    pass


class FitError(NumericalFailure):
    pass


class NumericalError(NumericalFailure):
    pass
