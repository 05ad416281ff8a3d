"""Exception hierarchy shared by all modules."""


class GibbsLabError(Exception):
    pass


class DomainError(GibbsLabError, ValueError):
    """An argument lies outside the domain of the operation."""


class ResourceError(GibbsLabError):
    """An enumeration would exceed the configured state budget."""


class PositivityError(GibbsLabError, ValueError):
    """A quantity required to be strictly positive is not."""


class InconsistentKernelError(GibbsLabError, ValueError):
    """A kernel fails its consistency identities beyond tolerance."""


class UnsupportedPotentialError(GibbsLabError):
    """The potential carries neither finite-range nor tail metadata."""
