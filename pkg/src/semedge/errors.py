"""Exception hierarchy shared across the package."""


class SemEdgeError(Exception):
    """Base class for all package errors."""


class ParseError(SemEdgeError, ValueError):
    """Input text or file could not be parsed.

    ``raw`` keeps the offending text so callers can log or re-prompt.
    """

    def __init__(self, message, raw=None):
        super().__init__(message)
        self.raw = raw


class ValidationError(SemEdgeError, ValueError):
    pass


class MissingLabelsError(SemEdgeError):
    pass


class CoverageError(SemEdgeError):
    pass


class ConfigError(SemEdgeError, ValueError):
    pass


class TemplateError(SemEdgeError, KeyError):
    def __init__(self, placeholder):
        super().__init__(placeholder)
        self.placeholder = placeholder

    def __str__(self):
        return f"unbound placeholder {{{self.placeholder}}}"


class BackendError(SemEdgeError):
    pass


class OracleError(BackendError):
    pass


class PipelineError(SemEdgeError):
    pass


class ShapeError(SemEdgeError, ValueError):
    pass


class DegenerateFeatureError(SemEdgeError, ValueError):
    pass


class DegeneratePrototypeError(SemEdgeError, ValueError):
    pass


class NumericsError(SemEdgeError, ArithmeticError):
    def __init__(self, message, epoch=None):
        super().__init__(message)
        self.epoch = epoch
