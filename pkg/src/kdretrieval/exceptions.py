"""Exception hierarchy shared by every subsystem.

All errors derive from :class:`KDRError` so the CLI can map them to a
single "data error" exit status.
"""


class KDRError(Exception):
    """Base class for all package errors."""


# autodiff
class ShapeError(KDRError, ValueError):
    pass


class WindowError(KDRError, ValueError):
    pass


class NonScalarError(KDRError, ValueError):
    pass


class TapeError(KDRError, RuntimeError):
    pass


class NumericsError(KDRError, FloatingPointError):
    pass


# corpus
class EmptyCorpusError(KDRError, ValueError):
    pass


class InsufficientCorpusError(KDRError, ValueError):
    pass


class SplitError(KDRError, ValueError):
    pass


# models
class VocabError(KDRError, IndexError):
    pass


class CheckpointError(KDRError, ValueError):
    pass


# distillation
class LabelError(KDRError, ValueError):
    pass


class CacheError(KDRError, KeyError):
    def __str__(self):
        # KeyError quotes its message; keep it readable
        return str(self.args[0]) if self.args else ""


class AlignmentError(KDRError, ValueError):
    pass


class DivergenceError(KDRError, RuntimeError):
    """Raised when a training loss becomes non-finite.

    ``checkpoint`` holds the last parameter snapshot with a finite loss.
    """

    def __init__(self, message, checkpoint=None):
        super().__init__(message)
        self.checkpoint = checkpoint


# metrics / index
class EmptyError(KDRError, ValueError):
    pass


class EmptyIndexError(KDRError, ValueError):
    pass


class IndexFormatError(KDRError, ValueError):
    """Index file is truncated, has a bad magic or trailing bytes."""
