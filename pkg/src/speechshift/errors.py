"""Exception hierarchy shared by every module."""


class SpeechShiftError(Exception):
    """Base class for all package errors."""


class EmptyDocument(SpeechShiftError):
    pass


class FormatError(SpeechShiftError):
    """Raised for malformed input files; carries the offending line number."""

    def __init__(self, message: str, line: int | None = None, path: str | None = None):
        self.line = line
        self.path = path
        where = ""
        if path is not None:
            where = f"{path}:"
        if line is not None:
            where += f"{line}:"
        super().__init__(f"{where} {message}".strip() if where else message)


class MalformedParse(SpeechShiftError):
    def __init__(self, message: str, sentence: int):
        self.sentence = sentence
        super().__init__(f"sentence {sentence}: {message}")


class AlignmentError(SpeechShiftError):
    pass


class LexiconError(SpeechShiftError):
    pass


class DuplicateCategory(LexiconError):
    pass


class BadPattern(LexiconError):
    pass


class UnknownCategory(LexiconError, KeyError):
    def __str__(self) -> str:
        return Exception.__str__(self)


class ConfigError(SpeechShiftError):
    pass


class ScoreError(SpeechShiftError, ValueError):
    pass


class EmptyCorpus(SpeechShiftError):
    pass


class TemplateError(SpeechShiftError):
    pass


class InsufficientData(SpeechShiftError):
    pass


class VersionMismatch(SpeechShiftError):
    pass
