"""Exception hierarchy shared by every stage of the pipeline."""


class WarvError(Exception):
    """Base class for all errors raised by this package."""


class ValidationError(WarvError):
    """Bad user input: configuration, arguments, or file contents."""


class FormatError(ValidationError):
    def __init__(self, message, line=None, path=None):
        self.line = line
        self.path = path
        where = []
        if path is not None:
            where.append(str(path))
        if line is not None:
            where.append(f"line {line}")
        prefix = ":".join(where)
        super().__init__(f"{prefix}: {message}" if prefix else message)


class DimMismatch(FormatError):
    pass


class ZeroVector(WarvError, ValueError):
    pass


class BadFractions(ValidationError):
    pass


class EmptyDataset(WarvError):
    pass


class EmptyStats(WarvError):
    pass


class EmptyReview(WarvError):
    pass


class EmptySplit(WarvError):
    pass


class EmptyValidation(WarvError):
    pass


class ShapeMismatch(WarvError, ValueError):
    pass


class BadLabel(WarvError, ValueError):
    pass


class BadSpec(ValidationError):
    pass


class LengthMismatch(WarvError, ValueError):
    pass


class InconsistentClasses(WarvError, ValueError):
    pass


class StageError(WarvError):
    """Wraps an error raised inside a pipeline stage with the stage name."""

    def __init__(self, stage, cause):
        self.stage = stage
        self.cause = cause
        super().__init__(f"[{stage}] {type(cause).__name__}: {cause}")
