"""Error taxonomy shared by every gaitscreen module.

Data problems derive from :class:`DataError` so the command line can map them
to exit status 1; everything else that is a caller mistake is a plain
``ValueError`` subclass.
"""


class GaitScreenError(Exception):
    """Base class for all errors raised by gaitscreen."""

    code = "GaitScreenError"

    def __str__(self):
        msg = super().__str__()
        return f"{self.code}: {msg}" if msg else self.code


class DataError(GaitScreenError, ValueError):
    """Input data violates a format or content rule."""


# ingest
class WrongColumnCount(DataError):
    code = "WrongColumnCount"


class NonMonotonicTime(DataError):
    code = "NonMonotonicTime"


class EmptyFile(DataError):
    code = "EmptyFile"


class MalformedName(DataError):
    code = "MalformedName"


class ScoreOutOfRange(DataError):
    code = "ScoreOutOfRange"


class BadTimestamp(DataError):
    code = "BadTimestamp"


class ConflictingScore(DataError):
    code = "ConflictingScore"


class EmptyDataset(DataError):
    code = "EmptyDataset"


class UnknownCow(DataError):
    code = "UnknownCow"


# dsp
class EvenOrder(GaitScreenError, ValueError):
    code = "EvenOrder"


class OrderExceedsLength(GaitScreenError, ValueError):
    code = "OrderExceedsLength"


class TooShort(GaitScreenError, ValueError):
    code = "TooShort"


class CutoffOutOfRange(GaitScreenError, ValueError):
    code = "CutoffOutOfRange"


# features
class EmptySignal(GaitScreenError, ValueError):
    code = "EmptySignal"


class BadDimensions(GaitScreenError, ValueError):
    code = "BadDimensions"


# model
class SingleClass(DataError):
    code = "SingleClass"


class NonFiniteFeature(DataError):
    code = "NonFiniteFeature"


class DimensionMismatch(GaitScreenError, ValueError):
    code = "DimensionMismatch"


class TooFewCows(DataError):
    code = "TooFewCows"


# eval
class EmptyConfusion(DataError):
    code = "EmptyConfusion"


# synth
class BadSpec(GaitScreenError, ValueError):
    code = "BadSpec"
