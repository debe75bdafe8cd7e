"""Exception hierarchy shared by all pipeline stages."""


class PipelineError(Exception):
    """Base class for every error raised by this package."""


class ValidationError(PipelineError, ValueError):
    """Bad input data or configuration."""


# data ingest
class MagicMismatch(ValidationError):
    pass


class CountMismatch(ValidationError):
    pass


class TruncatedFile(ValidationError):
    pass


class InsufficientClassSamples(ValidationError):
    pass


# networks and checkpoints
class ShapeMismatch(ValidationError):
    pass


class StaleCache(ValidationError):
    pass


class EmptyDataset(ValidationError):
    pass


class BadMagic(ValidationError):
    pass


class UnsupportedVersion(ValidationError):
    pass


class TensorShapeCorrupt(ValidationError):
    pass


# nnmf
class NegativeInput(ValidationError):
    pass


class RankTooLarge(ValidationError):
    pass


# hybrid features
class NoFeatureLayer(ValidationError):
    pass


class TooFewSamples(ValidationError):
    pass


class DimMismatch(ValidationError):
    pass


class RowMismatch(ValidationError):
    pass


# diffusion
class BadRange(ValidationError):
    pass


class StepOutOfRange(ValidationError):
    pass


# attacks and metrics
class TooFewClasses(ValidationError):
    pass


class LabelOutOfRange(ValidationError):
    pass


class EmptyMatrix(ValidationError):
    pass


class DegenerateLabels(ValidationError):
    pass


# configuration and orchestration
class ParseError(ValidationError):
    def __init__(self, msg, line=None, column=None):
        super().__init__(msg if line is None else f"{msg} (line {line}, column {column})")
        self.line = line
        self.column = column


class UnknownKey(ValidationError):
    pass


class InvalidValue(ValidationError):
    def __init__(self, key, msg=""):
        super().__init__(f"{key}: {msg}" if msg else key)
        self.key = key


class StaleArtifacts(PipelineError):
    pass


class MissingArtifact(PipelineError):
    pass


class StageError(PipelineError):
    """Wraps any error raised inside a pipeline stage."""

    def __init__(self, stage, cause):
        super().__init__(f"stage '{stage}' failed: {cause}")
        self.stage = stage
        self.cause = cause
