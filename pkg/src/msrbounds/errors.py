"""Exception types raised by msrbounds."""


class MsrBoundsError(Exception):
    """Base class for all package errors."""


class ConfigurationError(MsrBoundsError, ValueError):
    """Invalid layout, scenario or config-file content."""


class DegenerateGeometryError(MsrBoundsError, ValueError):
    """Target (nearly) collocated with a radar node."""


class UnidentifiableLinkError(MsrBoundsError, ArithmeticError):
    """A radar's equivalent delay-Doppler information is singular."""
