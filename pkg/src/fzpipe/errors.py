"""Exception hierarchy shared by all fzpipe modules."""


class FZError(Exception):
    """Base class for every error raised by fzpipe."""


# --- core / archive format ---

class ZeroRange(FZError):
    """Relative error bound requested on a constant field (max == min)."""


class ArchiveError(FZError):
    """Malformed or inconsistent archive bytes."""


class BadMagic(ArchiveError):
    pass


class UnsupportedVersion(ArchiveError):
    pass


class Truncated(ArchiveError):
    """Byte length does not match what the archive layout declares."""


class UnknownPipelineId(ArchiveError):
    pass


# --- predictors ---

class MalformedCodes(FZError):
    """Quantization codes outside [0, 2*radius) or inconsistent outliers."""


class AnchorSizeMismatch(FZError):
    pass


class FieldTooSmall(FZError):
    """Field extents too small for the interpolation predictor."""


# --- lossless codecs ---

class CodeOutOfRange(FZError):
    pass


class CorruptStream(FZError):
    """Huffman bitstream walks off the codebook or has nonzero padding."""


class RadiusTooLarge(FZError):
    pass


class BitmapPayloadMismatch(FZError):
    pass


class UnknownCodec(FZError):
    pass


class CorruptPayload(FZError):
    pass


# --- pipeline / registry ---

class DuplicateId(FZError):
    pass


class InvalidStageOrder(FZError):
    pass


class MissingStage(FZError):
    pass


class UnsupportedPipeline(FZError):
    pass


class StageError(FZError):
    """A pipeline stage failed; carries the stage name."""

    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"stage '{stage}': {cause}")
        self.stage = stage
        self.cause = cause


# --- task graph ---

class UnknownBuffer(FZError):
    pass


class DuplicateTaskName(FZError):
    pass


class TaskFailed(FZError):
    """A task body raised; carries the task name, downstream tasks were not run."""

    def __init__(self, task: str, cause: BaseException):
        super().__init__(f"task '{task}' failed: {cause}")
        self.task = task
        self.cause = cause


# --- data ingestion / generation ---

class SizeMismatch(FZError):
    pass


class NonFiniteValue(FZError):
    def __init__(self, index: int, msg: str | None = None):
        super().__init__(msg or f"non-finite value at flat index {index}")
        self.index = index


class IoError(FZError):
    pass


class BadParams(FZError):
    pass


# --- metrics ---

class DimMismatch(FZError):
    pass


class ZeroCompressedSize(FZError):
    pass
