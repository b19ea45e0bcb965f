"""Exception types shared across the toolkit."""


class HomerError(Exception):
    """Base class for all errors raised by this package."""


class ValidationError(HomerError):
    """Malformed input: bad manifest, prompt set, or config."""


class DimensionMismatch(HomerError):
    pass


class EmptyMask(HomerError):
    pass


class EmptyRegion(HomerError):
    pass


class TooSmall(HomerError):
    pass


# -- geometry --

class DegeneratePoint(HomerError):
    """Point maps to (near-)zero projective depth."""


class DegenerateConfiguration(HomerError):
    """Correspondence set cannot determine a homography (collinear/duplicate points)."""


class TooFewCorrespondences(HomerError):
    pass


class DegenerateHomography(HomerError):
    """Matrix is singular or cannot be normalized."""


class NoConsensus(HomerError):
    """Robust estimation found no inlier set above the configured ratio."""


# -- oracles --

class OracleFailure(HomerError):
    """An oracle call failed; carries the oracle's reply when available."""

    def __init__(self, message, reply=None):
        super().__init__(message)
        self.reply = reply


class PromptConflict(HomerError):
    """Foreground and background prompts contradict each other."""


class InsufficientTexture(HomerError):
    """Too few detectable features to match images."""


class FullFrameMask(HomerError):
    """Mask covers the entire frame; no boundary to inpaint from."""


class SegmenterFailed(HomerError):
    """Every refinement candidate raised a segmenter error."""


# -- pipeline / evaluation --

class PipelineAbort(HomerError):
    """First-stage failure that prevents any useful output."""


class MissingGroundTruth(HomerError):
    pass
