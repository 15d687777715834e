"""Exception hierarchy for the nap package.

Every error raised deliberately by this package derives from NapError so
callers (and the CLI) can distinguish validation failures from bugs.
"""


class NapError(Exception):
    """Base class for all nap errors."""


# corpus / manifest loading

class MalformedRowError(NapError):
    """A CSV row does not match the expected schema (line number in message)."""


class DuplicateUtteranceError(NapError):
    """The same (speaker_id, utterance_id) pair appears twice in a manifest."""


class UnknownDiseaseError(NapError):
    """A disease label is not a member of the closed disease set."""


class MissingFileError(NapError):
    """A path referenced by a manifest does not exist."""


class OutOfRangeRatingError(NapError):
    """A clinician rating falls outside the 1..7 scale."""


class DuplicateSpeakerError(NapError):
    """A speaker appears twice in a ratings table."""


# audio / frontend

class UnsupportedEncodingError(NapError):
    """WAV file is not 16-bit PCM mono."""


class CorruptHeaderError(NapError):
    """WAV file header cannot be parsed."""


class UpsamplingRequestedError(NapError):
    """Resampling target rate exceeds the source rate."""


class SignalTooShortError(NapError):
    """Waveform shorter than a single analysis frame."""


class WrongSampleRateError(NapError):
    """Waveform sample rate does not match the frontend's required rate."""


class LevinsonSingularError(NapError):
    """Levinson-Durbin recursion hit a non-positive prediction error."""


# alignment / TextGrid

class MissingTierError(NapError):
    """A required tier is absent from a TextGrid."""


class MalformedTextGridError(NapError):
    """TextGrid text cannot be parsed (line number in message)."""


class OverlappingIntervalsError(NapError):
    """Intervals within one tier overlap."""


class EmptySegmentError(NapError):
    """A phone segment contains no frame centers."""


class InvalidIntervalError(NapError):
    """An interval has start >= end."""


# models

class DimensionMismatchError(NapError):
    """Input dimensionality does not match a model's."""


class InsufficientDataError(NapError):
    """Not enough frames to train a model."""


class UnknownPhoneError(NapError):
    """A phone label has no trained model in the inventory."""


class VersionMismatchError(NapError):
    """A model file was written by an incompatible format version."""


class CorruptFileError(NapError):
    """A model or feature file is truncated or has a bad magic number."""


# features / regression

class MissingFeatureError(NapError):
    """A requested feature is absent and imputation is disabled."""


class SingularSystemError(NapError):
    """The ridge normal equations are singular (lambda=0 with collinear features)."""


class EmptyDiseaseGroupError(NapError):
    """A disease group required by LODO has no speakers."""
