"""Error types shared across the package.

Every error carries a stable class name; the HTTP service and the CLI report
that name verbatim, so renaming a class here is a wire-format change.
"""


class MmforgeError(Exception):
    """Base class for all package errors."""

    @property
    def name(self) -> str:
        return type(self).__name__


# -- grounding text format ------------------------------------------------

class MalformedSyntax(MmforgeError):
    """Text does not match the point/track grammar."""


class CoordOutOfRange(MmforgeError):
    """A coordinate lies outside the normalized [0, 1000] range."""


class NonMonotonicLoci(MmforgeError):
    """Frame loci are not strictly increasing."""


class DuplicateObjectInFrame(MmforgeError):
    """An object id is repeated where ids must be distinct."""


class KindMismatch(MmforgeError):
    """Block kind disagrees with what the caller expected."""


class InvariantViolation(MmforgeError):
    """A programmatically built block violates a structural invariant."""


class OutOfImage(MmforgeError):
    """A pixel coordinate lies outside the image."""


# -- frame / crop geometry ------------------------------------------------

class NonPositiveDuration(MmforgeError):
    """Video duration must be positive."""


class TooManyFrames(MmforgeError):
    """Frame count exceeds the largest supported SlowFast bound."""


class BadArity(MmforgeError):
    """Argument lengths or counts are inconsistent."""


# -- message trees ---------------------------------------------------------

class EmptyAnnotation(MmforgeError):
    """An annotation branch contains no messages."""


class IndexOutOfRange(MmforgeError):
    """A token position is outside the packed sequence."""


class TooLarge(MmforgeError):
    """A dense materialization was requested above the configured cap."""


# -- packing ----------------------------------------------------------------

class InfeasibleCandidate(MmforgeError):
    """A candidate cannot fit any sequence under the budget."""


class EmptyPool(MmforgeError):
    """The packing solver was invoked on an empty pool."""


class CropOverflow(MmforgeError):
    """Crops exceed the budget and cannot be truncated."""


# -- loss weighting ----------------------------------------------------------

class NonPositiveCount(MmforgeError):
    """Answer token count must be at least 1."""


class AllZero(MmforgeError):
    """Every device reported zero loss tokens."""


# -- metrics ------------------------------------------------------------------

class InvalidMask(MmforgeError):
    """Run-length mask does not describe its stated dimensions."""


class MaskDimMismatch(MmforgeError):
    """Ground-truth masks do not share a single (height, width)."""


class ArityMismatch(MmforgeError):
    """Judge verdict arity disagrees with the statement lists."""


class DisconnectedGraph(MmforgeError):
    """The battle comparison graph is not connected."""


class DegenerateWins(MmforgeError):
    """Maximum-likelihood strengths do not exist for this battle set."""


# -- data filters ---------------------------------------------------------------

class NonPositive(MmforgeError):
    """An input that must be positive was not."""


class TooFew(MmforgeError):
    """Too few values for a meaningful statistic."""


class TooShort(MmforgeError):
    """Video shorter than the minimum clip length."""


class TargetTooLarge(MmforgeError):
    """Requested sample size exceeds the candidate pool."""


class EmptyEval(MmforgeError):
    """No evaluation frames to decontaminate against."""


class EmptyMask(MmforgeError):
    """Mask contains no foreground pixels."""


class OutOfUnitInterval(MmforgeError):
    """A ratio input lies outside [0, 1]."""
