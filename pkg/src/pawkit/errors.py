"""Exception hierarchy shared by all pawkit modules."""


class PawkitError(Exception):
    """Base class for all errors raised by this package."""


class DimensionError(PawkitError):
    """Array shape does not match what the operation requires."""


class NumericError(PawkitError):
    """Non-finite values (NaN/Inf) where finite data is required."""


class ValidationError(PawkitError):
    """Arguments violate an operation's contract."""


class ConfigError(PawkitError):
    """A configuration object is internally inconsistent or degenerate."""


class InsufficientAudioError(PawkitError):
    """Audio clip too short for the requested analysis window."""


class AudioFormatError(PawkitError):
    """WAV file is not PCM16 mono 16 kHz."""


class ImageFormatError(PawkitError):
    """PGM file is not binary (P5) with maxval 255."""


class GenerationError(PawkitError):
    """Synthetic-data request outside the generator's configured ranges."""


class StratificationError(PawkitError):
    """A class has fewer samples than the requested fold count."""


class TrainingError(PawkitError):
    """Training diverged or was asked to run on unusable data."""


class ModelStoreError(PawkitError):
    """Base class for model serialization failures."""


class ChecksumError(ModelStoreError):
    """Stored weight blob does not match its recorded checksum."""


class VersionError(ModelStoreError):
    """Model file was written by an incompatible format version."""


class TruncatedBlobError(ModelStoreError):
    """Model file ends before the declared weight blob length."""
