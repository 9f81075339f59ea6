"""Exception types shared across the package."""


class BflyError(Exception):
    """Base class for all bfly errors."""


class MissingElementError(BflyError):
    """A decoder or repair routine was not given an element it needs."""


class UnrecoverableLossError(BflyError):
    """More nodes are missing than the code can tolerate."""


class FormatError(BflyError):
    """Shard header, manifest, or digest does not match expectations."""


class SingularSystemError(BflyError):
    """The surviving linear system does not determine the information uniquely."""
