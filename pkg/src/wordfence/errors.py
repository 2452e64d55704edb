"""Exception hierarchy shared by the pipeline stages."""


class WordFenceError(Exception):
    """Base class for every error raised by this package."""


class InvalidInput(WordFenceError, ValueError):
    pass


class InvalidArgument(WordFenceError, ValueError):
    pass


class DegenerateInput(WordFenceError, ValueError):
    pass


class InvalidAnnotation(WordFenceError, ValueError):
    pass


class InvalidState(WordFenceError, RuntimeError):
    pass


class GenerationError(WordFenceError, RuntimeError):
    pass


class FormatError(WordFenceError, OSError):
    """A file on disk is malformed or cannot be decoded."""
