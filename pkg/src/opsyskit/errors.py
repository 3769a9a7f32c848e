"""Exception hierarchy shared by every module."""


class OpsysError(Exception):
    """Base class for toolkit errors."""


class InvalidInput(OpsysError, ValueError):
    pass


class NotHermitian(InvalidInput):
    pass


class ShapeMismatch(InvalidInput):
    pass


class DependentBasis(InvalidInput):
    pass


class UnitNotInSpan(InvalidInput):
    pass


class EmptyFamily(InvalidInput):
    pass


class SizeCapExceeded(OpsysError):
    pass


class NumericalBreakdown(OpsysError):
    """The SDP kernel produced a non-finite iterate or a singular system."""


class SingularConditioning(OpsysError):
    pass


class SpanDeficit(InvalidInput):
    pass


class NotContraction(InvalidInput):
    pass


class NotPSD(InvalidInput):
    pass


class MissingBlocks(InvalidInput):
    pass


class UnsupportedProfile(InvalidInput):
    pass


class InsufficientMargin(OpsysError):
    pass


class ZeroSecondBlock(InvalidInput):
    pass


class SchemaError(OpsysError, ValueError):
    pass


class VersionMismatch(SchemaError):
    pass
