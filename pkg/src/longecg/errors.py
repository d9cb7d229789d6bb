"""Exception types shared by every stage of the pipeline."""


class ECGSynthError(ValueError):
    """Base class for all domain errors raised by this package."""


class OutOfBounds(ECGSynthError):
    pass


class EmptyInput(ECGSynthError):
    pass


class TooShort(ECGSynthError):
    pass


class NoBeatsFound(ECGSynthError):
    pass


class InsufficientData(ECGSynthError):
    pass


class InsufficientBeats(ECGSynthError):
    pass


class LengthMismatch(ECGSynthError):
    pass


class MissingDescriptor(ECGSynthError):
    pass


class DuplicateId(ECGSynthError):
    pass


class LabelEmpty(ECGSynthError):
    pass


class SchemaMismatch(ECGSynthError):
    pass


class UnknownFeature(ECGSynthError):
    pass


class RrTooShort(ECGSynthError):
    pass


class ZeroReference(ECGSynthError):
    pass


class SingleClass(ECGSynthError):
    pass


class TooFewRows(ECGSynthError):
    pass


class TooFewBeats(ECGSynthError):
    pass


class EmptyTestSet(ECGSynthError):
    pass


class FormatError(ECGSynthError):
    """A file could not be parsed; ``line`` is 1-based when known."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class DegenerateFeatureWarning(UserWarning):
    """A feature column is constant and was modelled as a point mass."""
