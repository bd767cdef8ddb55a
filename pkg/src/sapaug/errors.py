"""Exception hierarchy shared by the library and the CLI exit-code mapping."""


class SapAugError(Exception):
    """Base class for all sapaug errors."""


class InputError(SapAugError, ValueError):
    """Invalid argument or malformed input. CLI exit code 1."""


class DomainError(InputError):
    """Argument outside the mathematical domain of a function."""


class NumericalError(SapAugError, ArithmeticError):
    """A numerical routine failed (e.g. covariance not positive definite). CLI exit code 2."""


class StateError(SapAugError, RuntimeError):
    """Operation is not valid in the current state (e.g. no completed trials). CLI exit code 2."""


class PrecisionWarning(UserWarning):
    """An iterative routine hit its iteration cap before converging."""
