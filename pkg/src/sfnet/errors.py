"""Exception types shared across the package."""


class SfnetError(Exception):
    """Base class for all package-specific errors."""


class InvalidParams(SfnetError):
    """Generator parameters violate their invariants."""


class DegenerateParams(SfnetError):
    """Parameter combination makes an exponent/offset formula undefined."""


class EmptyFeasibleSet(SfnetError):
    """No (alpha, beta, gamma) grid triple reaches the requested exponents."""


class DegenerateDistribution(SfnetError):
    """An attachment distribution has zero total weight."""


class InsufficientTail(SfnetError):
    """Too few tail observations to estimate a power-law exponent."""


class ShapeMismatch(SfnetError):
    """Input dimensions do not match a model or matrix."""


class EmptyDataset(SfnetError):
    """Training requires at least one sample."""


class OffGridLabel(SfnetError):
    """Exponent pair is not a cell of the subtype grid."""


class NonFiniteParameters(SfnetError):
    """Model parameters became NaN/Inf during training (internal invariant)."""


class InvariantViolation(SfnetError):
    """A postcondition the implementation guarantees was observed broken."""


class BudgetExceeded(SfnetError):
    """Exhaustive candidate enumeration was requested above the ceiling."""


class CorruptMatrix(SfnetError):
    """Adjacency-matrix file or edge list does not match the expected framing."""


class CorruptCheckpoint(SfnetError):
    """Model checkpoint file does not match the expected framing."""


class CorruptDataset(SfnetError):
    """Dataset file does not match the expected framing."""


class VersionMismatch(SfnetError):
    """File was written by an unsupported format version."""
