class UnirectError(Exception):
    """Base class for all library errors."""


class SpecificationError(UnirectError):
    pass


class EmptyMeasureError(UnirectError):
    pass


class EmptyRestrictionError(UnirectError):
    pass


class ParameterError(UnirectError, ValueError):
    pass


class BasisError(UnirectError, ValueError):
    pass


class UndefinedDistanceError(UnirectError):
    pass


class ScaleError(UnirectError):
    pass


class IdentityError(UnirectError):
    pass


class ResolutionError(UnirectError):
    pass


class DensityError(UnirectError):
    """No empty ball of useful size exists (the support fills the region)."""


class ExtentError(UnirectError):
    """A requested ball reaches past the region where the data is valid."""


class HypothesisNotMet(UnirectError):
    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class InputFormatError(UnirectError):
    pass


class SchemaError(InputFormatError):
    """Dimensions in an input file disagree with each other or the request."""
