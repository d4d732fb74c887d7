"""Exception types shared across the package."""


class CbplabError(Exception):
    """Base class for all package-specific errors."""


class TailTooHeavy(CbplabError):
    """A pmf's certified tail mass is too large for the requested operation."""


class SupportOverflow(CbplabError):
    """A lattice operation would produce a support longer than the cap."""


class UnsupportedMoment(CbplabError):
    """No closed form for the requested moment order."""


class OutsideSimplex(CbplabError, ValueError):
    """Moments are incompatible with a probability vector on the support."""


class Unidentifiable(CbplabError, ValueError):
    """The requested parameters are not determined by the given moments."""


class EmptyIndexSet(CbplabError, ValueError):
    """An estimator's index set has no usable terms."""


class MissingProgenitors(CbplabError, ValueError):
    """The trajectory carries no progenitor counts."""


class AllZero(CbplabError, ValueError):
    """A ratio estimator's denominator sums to zero."""


class ZeroPopulation(CbplabError, ValueError):
    """The transition used by the estimator starts from population zero."""


class ImpossibleTransition(CbplabError):
    """A trajectory step has certified probability zero under the model."""


class NumericalInstability(CbplabError):
    """Cancellation in a numerical routine exceeded its tolerance."""


class DegenerateIncrement(CbplabError, ValueError):
    """The increment law has zero variance."""


class InvalidMixing(CbplabError, ValueError):
    """Multi-step bound mixing parameters violate alpha * t > 1."""


class MissingMoment(CbplabError):
    """A family does not expose a moment required by the formula."""


class MseRunFailed(CbplabError):
    """Too many replicate fits failed for the MSE estimate to be trusted."""


class SchemaError(CbplabError, ValueError):
    """A JSON descriptor violates its schema.

    ``path`` is the dotted location of the offending field, e.g.
    ``offspring.params.lam``.
    """

    def __init__(self, path, message):
        self.path = path
        super().__init__(f"{path}: {message}")
