"""Exception and warning classes."""


class SpectraError(Exception):
    """Base class for all library errors."""


class GuardError(SpectraError):
    """A size guard was exceeded (dense table, qubit count, n!)."""


class NormalizationError(SpectraError):
    """A filter did not keep the total probability mass."""


class NegativeMass(SpectraError):
    """A smoothed model has more negative mass than the clipping budget allows."""

    def __init__(self, total, filter=None):
        self.total = total
        self.filter = filter
        msg = f"negative probability mass {total:.3e} exceeds clipping budget"
        if filter is not None:
            msg += f" (filter: {filter!r})"
        super().__init__(msg)


class NegativeConditional(SpectraError):
    """The truncated series produced a negative conditional while sampling."""

    def __init__(self, prefix):
        self.prefix = tuple(int(b) for b in prefix)
        super().__init__(f"negative marginal at prefix {self.prefix}")


class ZeroSuccessProbability(SpectraError):
    """Postselection branch has (numerically) zero probability."""


class ZeroPosteriorMass(SpectraError):
    """Conditioning removed all prior mass."""


class DuplicatesCollapsed(UserWarning):
    """Duplicate samples were merged when building a superposition."""


class InvalidKernel(UserWarning):
    """A kernel with a negative spectrum was used where a positive one is expected."""
