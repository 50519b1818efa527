"""Exception hierarchy shared by the library and the CLI."""


class MultisumError(Exception):
    """Base class for all library errors."""


class NotConvergable(MultisumError):
    """A finite-horizon witness of conditional convergability failed.

    ``failed`` lists the conditions that did not hold, any of
    ``"pos_sum"``, ``"neg_sum"``, ``"tail"``.
    """

    def __init__(self, failed, witness=None):
        self.failed = tuple(failed)
        self.witness = witness
        super().__init__("convergability witness failed: " + ", ".join(self.failed))


class PhaseStarvation(MultisumError):
    """A greedy phase needed a sign the truncated stream could not supply."""

    def __init__(self, message, slab=None):
        self.slab = slab
        if slab is not None:
            message = f"slab {slab}: {message}"
        super().__init__(message)


class PartitionExhausted(PhaseStarvation):
    """The partition would have to scan past its maximum horizon."""


class DepthExceeded(MultisumError):
    """A prefix depth or region lies beyond what was built."""


class MissingStage(MultisumError):
    """A stage needed by a claim series has not been recorded."""


class QuadratureFailure(MultisumError):
    """Quadrature did not reach the requested tolerance."""


class ConfigError(MultisumError):
    """Invalid run configuration; ``path`` names the offending field."""

    def __init__(self, path, message):
        self.path = path
        super().__init__(f"{path}: {message}")
