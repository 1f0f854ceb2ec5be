"""Exception hierarchy shared across the pipeline."""


class SolarscanError(Exception):
    """Base class for all pipeline errors."""


class NoSuchLabel(SolarscanError):
    """String does not normalize to any admissible location label."""


class InvalidRegion(SolarscanError):
    """Region bounding box is malformed."""


class MalformedResponse(SolarscanError):
    """Upstream JSON payload could not be interpreted."""


class InsufficientSites(SolarscanError):
    """Requested more sampled sites than are available."""


class AuthError(SolarscanError):
    """Missing or rejected API credential."""


class RateLimited(SolarscanError):
    """Upstream rate limit persisted past the retry budget."""


class DecodeError(SolarscanError):
    """Payload is not a decodable raster."""


class EncodeError(SolarscanError):
    """Raster could not be encoded."""


class InvalidSpec(SolarscanError):
    """Scene synthesis layout is invalid."""


class OutOfRange(SolarscanError):
    """Coordinate outside the unit square."""


class NotEnoughExamples(SolarscanError):
    """Fewer few-shot examples available than requested."""


class BackendUnavailable(SolarscanError):
    """Model backend failed after exhausting retries."""


class ReplayMiss(SolarscanError):
    """No stored fixture for the requested bundle hash."""


class AlignmentError(SolarscanError):
    """Prediction and ground-truth lists do not line up by tile id."""


class EmptyEvaluation(SolarscanError):
    """No pairs to evaluate."""


class EmptySubset(SolarscanError):
    """Requested evaluation subset is empty."""


class LengthMismatch(SolarscanError):
    """Paired lists have different lengths."""


class EmptyClass(SolarscanError):
    """A class has no members where at least one is required."""


class NotFound(SolarscanError):
    """Referenced item does not exist."""


class AlreadyResolved(SolarscanError):
    """Review item was already corrected or confirmed."""


class TooFewLabels(SolarscanError):
    """Dataset too small to split."""


class MissingTile(SolarscanError):
    """A split id does not resolve to a tile."""


class MissingLabel(SolarscanError):
    """A split id does not resolve to a ground-truth label."""
