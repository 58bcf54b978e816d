"""Exception hierarchy shared across the package."""


class UnigraphError(Exception):
    """Base class for all errors raised by this package."""


class AnnotationParseError(UnigraphError):
    """Raised when an annotation file is not syntactically valid JSON."""

    def __init__(self, message: str, byte_offset: int | None = None):
        super().__init__(message)
        self.byte_offset = byte_offset


class AnnotationValidationError(UnigraphError):
    """Raised when a structurally valid file violates a document invariant.

    Carries enough context to point at the offending document and item.
    """

    def __init__(self, message: str, doc_id: str = "", rule: str = "", index: int | None = None):
        super().__init__(message)
        self.doc_id = doc_id
        self.rule = rule
        self.index = index


class GraphError(UnigraphError):
    """Raised on malformed graphs or unsatisfied graph-operation preconditions."""


class ModelError(UnigraphError):
    """Raised on model-configuration or shape contract violations."""
