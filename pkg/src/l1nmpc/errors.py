"""Exception types raised across the package."""


class L1NMPCError(Exception):
    """Base class for all package errors."""


class InvalidArgument(L1NMPCError, ValueError):
    pass


class IntegrationDiverged(L1NMPCError, ArithmeticError):
    pass


class InvalidMismatch(InvalidArgument):
    pass


class LinearizationFailed(L1NMPCError, ArithmeticError):
    pass


class SolverError(L1NMPCError, RuntimeError):
    pass


class BasisSingular(L1NMPCError, ArithmeticError):
    pass


class ObserverDiverged(L1NMPCError, ArithmeticError):
    pass


class ParseError(L1NMPCError, ValueError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class ConfigError(L1NMPCError, ValueError):
    pass
