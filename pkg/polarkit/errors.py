from typing import Optional


class PolarkitError(ValueError):
    """Base class for every error raised by the library."""


class DegeneratePolygon(PolarkitError):
    pass


class DimensionMismatch(PolarkitError):
    pass


class EmptyMask(PolarkitError):
    pass


class InvalidRayCount(PolarkitError):
    pass


class NonPositiveRay(PolarkitError):
    pass


class InvalidRayPair(PolarkitError):
    pass


class AnnotationError(PolarkitError):
    pass


class MalformedJson(AnnotationError):
    def __init__(self, path: str, message: str, line: int, column: int):
        super().__init__(f"{path}: malformed JSON at line {line}, column {column}: {message}")
        self.line = line
        self.column = column


class SchemaError(AnnotationError):
    def __init__(self, field: str, message: Optional[str] = None):
        super().__init__(message or f"missing or invalid field '{field}'")
        self.field = field
