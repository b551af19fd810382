"""Exception hierarchy shared by all modules."""


class EnergySimoError(Exception):
    """Base class for every error raised by this package."""


class DomainError(EnergySimoError, ValueError):
    """An argument lies outside the domain of the operation."""


class ValidationError(EnergySimoError, ValueError):
    """A constellation or configuration violates its invariants."""


class DegenerateSpacingError(EnergySimoError, ArithmeticError):
    """Two adjacent symbols have (numerically) identical energy variance."""


class InfeasibleBudgetError(EnergySimoError, ValueError):
    """The power budget cannot be met by the requested update."""


class GridSizeError(EnergySimoError, ValueError):
    """A brute-force grid would exceed the tractable point count."""
