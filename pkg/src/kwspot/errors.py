"""Exception types shared across the package."""


class KwspotError(Exception):
    """Base class for every error this package raises deliberately."""


class UnsupportedRateError(KwspotError):
    """Audio sample rate is not 16 kHz."""


class UnsupportedFormatError(KwspotError):
    """Audio container is not mono 16-bit PCM RIFF."""


class AudioTooShortError(KwspotError):
    """Audio shorter than one 25 ms analysis window."""


class InsufficientFramesError(KwspotError):
    """Feature matrix has too few frames for the requested transform."""


class ShapeError(KwspotError):
    """Tensor shapes are inconsistent with the requested operation."""


class InvalidStatsError(KwspotError):
    """Batch-norm statistics are invalid (negative variance)."""


class ConfigError(KwspotError):
    """Model config fails structural validation."""


class UnknownModelError(KwspotError):
    """Requested reference config name is not in the zoo."""


class FrontEndTooDeepError(KwspotError):
    """Conv front end receptive field exceeds the configured input length."""


class WeightFormatError(KwspotError):
    """Base class for weight-container parsing failures."""


class BadMagicError(WeightFormatError):
    """File does not start with the weight-container magic."""


class BadVersionError(WeightFormatError):
    """Unsupported weight-container format version."""


class TruncatedFileError(WeightFormatError):
    """File ends before a declared header or tensor region."""


class HeaderError(WeightFormatError):
    """Weight-container header is not valid JSON or misses required keys."""


class TensorMismatchError(WeightFormatError):
    """Declared tensors do not match what the config requires."""


class UndefinedThresholdError(KwspotError):
    """fa_at_mr called with no positive scores."""


class UndefinedMeanError(KwspotError):
    """Endpoint deltas requested but no event matched any reference."""


class ClockError(KwspotError):
    """Event carries a negative or missing timestamp."""


class EvalAbortError(KwspotError):
    """Too many manifest entries failed to score."""
