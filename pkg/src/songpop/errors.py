"""Exception types raised across the pipeline."""


class SongPopError(Exception):
    """Base class for all package errors."""


class WavFormatError(SongPopError):
    pass


class UnsupportedEncodingError(SongPopError):
    pass


class EmptyAudioError(SongPopError):
    pass


class TooShortError(SongPopError):
    pass


class DegenerateFilterbankError(SongPopError):
    pass


class ShapeError(SongPopError):
    pass


class StateError(SongPopError):
    pass


class InvalidInputError(SongPopError, ValueError):
    pass


class SchemaError(SongPopError):
    pass


class DuplicateTrackError(SongPopError):
    pass


class ParseError(SongPopError):
    pass


class DegenerateFeatureError(SongPopError):
    pass


class SplitError(SongPopError):
    pass


class NumericError(SongPopError):
    pass


class ConfigError(SongPopError):
    pass


class CheckpointVersionError(SongPopError):
    pass
