"""Exception types raised by the detection library."""


class MimoError(ValueError):
    """Base class for all library errors."""


class SingularChannel(MimoError):
    """A diagonal entry of the triangular factor is below the singularity threshold."""


class UnsupportedOrder(MimoError):
    pass


class NotAConstellationPoint(MimoError):
    pass


class BoxLargerThanConstellation(MimoError):
    pass


class SearchSpaceTooLarge(MimoError):
    pass


class UnsupportedDetector(MimoError):
    pass


class NotBracketed(MimoError):
    """The BER records do not cross the requested target."""
