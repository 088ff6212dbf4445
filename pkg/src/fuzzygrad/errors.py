"""Exception hierarchy shared across the package."""


class FuzzyGradError(Exception):
    """Base class for all errors raised by this package."""


class ShapeError(FuzzyGradError, ValueError):
    pass


class DomainError(FuzzyGradError, ValueError):
    """An elementwise operation received an argument outside its domain."""


class NonFiniteError(FuzzyGradError, ValueError):
    pass


class GraphError(FuzzyGradError, RuntimeError):
    pass


class MembershipError(FuzzyGradError, ValueError):
    pass


class FisError(FuzzyGradError, ValueError):
    pass


class DataError(FuzzyGradError, ValueError):
    pass


class TrainingError(FuzzyGradError, RuntimeError):
    pass
