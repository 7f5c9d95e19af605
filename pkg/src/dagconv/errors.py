"""Exception types raised across the package."""


class DagConvError(Exception):
    """Base class for all package errors."""


class DagError(DagConvError, ValueError):
    pass


class CycleDetected(DagError):
    pass


class SelfLoop(DagError):
    pass


class DuplicateEdge(DagError):
    pass


class TooLarge(DagError):
    pass


class DimensionMismatch(DagConvError, ValueError):
    pass


class ShapeMismatch(DimensionMismatch):
    pass


class ColumnMismatch(DimensionMismatch):
    pass


class LengthMismatch(DimensionMismatch):
    pass


class EmptySubset(DagConvError, ValueError):
    pass


class EmptyMask(DagConvError, ValueError):
    pass


class MaskCoversAll(DagConvError, ValueError):
    pass


class LabelOutOfRange(DagConvError, ValueError):
    pass


class NoForwardRecorded(DagConvError, RuntimeError):
    pass


class TooFewSamples(DagConvError, ValueError):
    pass


class ZeroNormTarget(DagConvError, ValueError):
    pass


class InvalidParams(DagConvError, ValueError):
    pass


class ParseError(DagConvError, ValueError):
    pass


class UnknownKey(ParseError):
    pass


class IncompatibleTaskModel(ParseError):
    pass


class DegenerateTask(UserWarning):
    """Emitted when a generated task carries no usable signal."""


class MalformedData(DagConvError, ValueError):
    """A data file could not be read as numbers of the expected layout."""


class NumericalFailure(DagConvError, ArithmeticError):
    """Training or evaluation produced non-finite values."""
