"""Exception hierarchy. Each class carries the CLI exit code it maps to."""


class JSSLError(Exception):
    exit_code = 1


class InvalidConfigurationError(JSSLError, ValueError):
    exit_code = 2


class DataError(JSSLError, ValueError):
    exit_code = 3


class SchemaError(DataError):
    pass


class ParseError(DataError):
    def __init__(self, message, row=None):
        super().__init__(message)
        self.row = row


class EmptyInputError(DataError):
    pass


class NumericalError(JSSLError, ArithmeticError):
    exit_code = 4


class FitError(NumericalError):
    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = list(trace or [])


class ConvergenceError(FitError):
    pass


class SingularInformationError(FitError):
    pass


class PositivityError(NumericalError):
    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index


class SelectionError(NumericalError):
    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = list(diagnostics or [])


class CalibrationError(NumericalError):
    def __init__(self, message, achieved=None):
        super().__init__(message)
        self.achieved = achieved


class UndefinedIPAError(NumericalError):
    pass
