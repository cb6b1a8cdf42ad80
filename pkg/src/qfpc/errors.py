"""Exception classes shared across the package."""


class QFPCError(Exception):
    """Base class for all domain errors."""


# numerics

class NotHermitian(QFPCError):
    pass


class NotPositive(QFPCError):
    pass


class TraceExceedsOne(QFPCError):
    pass


class DimMismatch(QFPCError):
    pass


class NotCP(QFPCError):
    pass


class NotUnitary(QFPCError):
    pass


# syntax

class SyntaxError(QFPCError):
    """Parse failure with a 1-based source position."""

    def __init__(self, line, col, expected, found=None):
        self.line = line
        self.col = col
        self.expected = expected
        self.found = found
        msg = f"{line}:{col}: expected {expected}"
        if found is not None:
            msg += f", found {found!r}"
        super().__init__(msg)


class ShapeError(QFPCError):
    pass


class InfiniteAnnotation(QFPCError):
    pass


# typing

class TypeCheckError(QFPCError):
    """Base class for typing errors. ``span`` is set when known."""

    def __init__(self, msg, span=None):
        self.span = span
        super().__init__(msg)


class UnboundVariable(TypeCheckError):
    pass


class LinearVariableUnused(TypeCheckError):
    pass


class LinearVariableReused(TypeCheckError):
    pass


class TypeMismatch(TypeCheckError):
    def __init__(self, expected, found, span=None, what=""):
        self.expected = expected
        self.found = found
        msg = f"type mismatch{(' in ' + what) if what else ''}: expected {expected}, found {found}"
        super().__init__(msg, span)


class BangBodyUsesLinear(TypeCheckError):
    pass


class NotUnitType(TypeCheckError):
    pass


class FreeTypeVariable(TypeCheckError):
    pass


class IllTyped(QFPCError):
    pass


# operational

class Stuck(QFPCError):
    pass


class IllFormedClosure(QFPCError):
    pass


# denotational

class TruncationTooSmall(QFPCError):
    pass


class NotBangContext(QFPCError):
    pass


# norms

class NonMember(QFPCError):
    pass


class WitnessInvalid(QFPCError):
    pass


class ResourceLimit(QFPCError):
    """A basis element exceeds the configured dimension cap."""
