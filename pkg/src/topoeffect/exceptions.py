"""Exception types raised across the package."""


class TopoEffectError(ValueError):
    """Base class for all input and contract errors."""


class DimensionMismatchError(TopoEffectError):
    pass


class EssentialClassError(TopoEffectError):
    """A diagram still carries an infinite bar where a finite diagram is required."""


class InvalidOrderError(TopoEffectError):
    pass


class CoverageError(TopoEffectError):
    """An evaluation grid does not cover the support it has to cover."""


class PositivityError(TopoEffectError):
    """A (treatment, stratum) cell has too few records to build a summary."""

    def __init__(self, t, z, count, minimum, replication=None):
        self.t, self.z, self.count, self.minimum = t, z, count, minimum
        self.replication = replication
        where = "" if replication is None else f" in replication {replication}"
        super().__init__(
            f"positivity violation{where}: cell (t={t}, z={z}) has {count} "
            f"record(s), need at least {minimum}"
        )


class IncompatibleLandscapeError(TopoEffectError):
    pass


class DiagnosticUndefinedError(TopoEffectError):
    pass
