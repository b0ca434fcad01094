"""Exception hierarchy shared by all modules."""


class OrliczLabError(Exception):
    pass


class DomainError(OrliczLabError, ValueError):
    """A point or argument lies outside the admissible domain."""


class EmptyBallError(OrliczLabError, ValueError):
    """A ball contains no (or too few) active grid nodes."""


class InputError(OrliczLabError, ValueError):
    """Malformed numerical input (grids, samples, parameters)."""


class ConfigurationError(OrliczLabError, ValueError):
    """An experiment or quadrature configuration violates a resolution limit."""


class UnboundedNormError(OrliczLabError, ArithmeticError):
    """No finite scaling brings the modular below one."""


class ConvergenceFailure(OrliczLabError, ArithmeticError):
    """An iterative solver exhausted its iteration budget."""
