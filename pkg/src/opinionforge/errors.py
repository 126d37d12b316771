"""Exception hierarchy. CLI exit codes key off these classes."""


class OpinionForgeError(Exception):
    pass


class ParameterDomainError(OpinionForgeError, ValueError):
    """An argument lies outside the domain of the formula being evaluated."""


class DegenerateOpinionError(ParameterDomainError):
    pass


class InvalidCutpointsError(ParameterDomainError):
    pass


class PreconditionError(OpinionForgeError, ValueError):
    pass


class DataError(OpinionForgeError, ValueError):
    """Malformed or inconsistent input data (CSV, trace, JSON)."""


class NumericalAbort(OpinionForgeError, ArithmeticError):
    pass


class ZeroNormalizerError(NumericalAbort):
    """Every weight of a conditional underflowed or was zero."""


class EmptySupportError(NumericalAbort):
    pass


class InstanceTooLargeError(OpinionForgeError, ValueError):
    pass


class KeyMismatchError(PreconditionError):
    """Two collections that must cover the same edges do not."""
