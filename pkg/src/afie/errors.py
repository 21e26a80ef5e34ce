"""Exception hierarchy shared across the package."""

from __future__ import annotations


class AFIEError(Exception):
    """Base class for every error raised by this package."""


class ParseError(AFIEError, ValueError):
    """Malformed document input."""

    def __init__(self, message: str, byte_offset: int | None = None) -> None:
        self.byte_offset = byte_offset
        if byte_offset is not None:
            message = f"{message} (at byte {byte_offset})"
        super().__init__(message)


class EmptyDocumentError(ParseError):
    pass


class RetrievalError(AFIEError):
    pass


class EmptyCorpusError(RetrievalError, ValueError):
    pass


class TemplateError(AFIEError, KeyError):
    """A template placeholder was left unbound."""

    def __init__(self, placeholder: str) -> None:
        self.placeholder = placeholder
        super().__init__(placeholder)

    def __str__(self) -> str:
        return f"unbound placeholder {{{self.placeholder}}}"


class IncompleteKeywordError(AFIEError, ValueError):
    pass


class BudgetError(AFIEError, ValueError):
    """A prompt plus its requested output does not fit the model window."""


class LlmError(AFIEError):
    def __init__(self, message: str, retryable: bool = False) -> None:
        self.retryable = retryable
        super().__init__(message)


class MoneyParseError(AFIEError, ValueError):
    pass


class PipelineError(AFIEError):
    """Failure inside an extraction run, tagged with the stage that failed."""

    def __init__(self, stage: str, cause: BaseException) -> None:
        self.stage = stage
        self.cause = cause
        super().__init__(f"[{stage}] {type(cause).__name__}: {cause}")


class DatasetError(AFIEError, ValueError):
    def __init__(self, message: str, line: int | None = None) -> None:
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class EvalError(AFIEError, ValueError):
    pass


class EmptyEvalError(EvalError):
    pass


class UndefinedRpdError(EvalError, ZeroDivisionError):
    pass
