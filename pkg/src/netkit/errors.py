"""Exception hierarchy shared by all netkit modules."""


class NetkitError(ValueError):
    """Base class for every error raised by netkit."""


class DomainError(NetkitError):
    """An argument lies outside the domain of the operation."""


class InvalidModulationError(DomainError):
    """Modulation variance below the vacuum level (mu < 1)."""


class UnphysicalStateError(NetkitError):
    """A covariance matrix violates the uncertainty principle."""


class SplitError(DomainError):
    """A secret-sharing bipartition does not fit inside the network."""
