"""Exception hierarchy for ibfem."""


class IBFemError(Exception):
    """Base class for all errors raised by ibfem."""


class InvalidArgumentError(IBFemError, ValueError):
    pass


class ConfigurationError(IBFemError, ValueError):
    """An experiment or solver configuration violates a precondition."""


class UnsupportedError(IBFemError, NotImplementedError):
    """Requested capability (quadrature degree, dimension pair, ...) is not shipped."""


class DegenerateElementError(IBFemError, ArithmeticError):
    pass


class OutOfDomainError(IBFemError):
    """A point lies outside the closed Eulerian rectangle."""

    def __init__(self, message, points=None):
        super().__init__(message)
        self.points = points


class StructureEscapedError(OutOfDomainError):
    """A mapped solid point (node or quadrature point) left the fluid domain."""

    def __init__(self, message, points=None, nodes=None):
        super().__init__(message, points)
        self.nodes = nodes


class FactorizationError(IBFemError, ArithmeticError):
    """The per-step linear system could not be factorized or solved accurately."""
