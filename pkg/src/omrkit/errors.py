"""Exception hierarchy shared across modules.

Everything derives from :class:`ValueError` so callers that only care about
bad input can catch that.
"""


class OmrError(ValueError):
    """Base class for input and parameter errors raised by omrkit."""


class InvalidInputError(OmrError):
    pass


class ParameterError(OmrError):
    pass


class MalformedMaskError(OmrError):
    pass


class AnnotationParseError(OmrError):
    """Annotation XML could not be read.  ``object_id`` names the culprit when known."""

    def __init__(self, message, object_id=None):
        if object_id is not None:
            message = f"object {object_id!r}: {message}"
        super().__init__(message)
        self.object_id = object_id


class SchemaError(OmrError):
    """A JSON document does not follow its schema.  ``field`` names the offending key."""

    def __init__(self, message, field=None):
        if field is not None:
            message = f"{field}: {message}"
        super().__init__(message)
        self.field = field


class UnassignableError(OmrError):
    pass


class EvalError(OmrError):
    pass
