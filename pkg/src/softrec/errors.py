"""Exception types with stable machine-readable categories.

The CLI maps every failure to a single ``ERROR\t<category>\t<message>``
line on stderr; the category strings below are part of that contract.
"""


class SoftrecError(Exception):
    category = "internal"


class ConfigError(SoftrecError):
    category = "config"


class ParseError(SoftrecError):
    category = "parse"

    def __init__(self, message, line_no=None):
        if line_no is not None:
            message = f"line {line_no}: {message}"
        super().__init__(message)
        self.line_no = line_no


class EmptyCorpusError(SoftrecError):
    category = "empty-corpus"


class EmptyInputError(SoftrecError):
    category = "empty-input"


class UnknownUserError(SoftrecError):
    category = "unknown-user"


class ShapeError(SoftrecError):
    category = "shape"


class DivergenceError(SoftrecError):
    category = "divergence"


class StaleCheckpointError(SoftrecError):
    category = "stale-checkpoint"


class EvaluationError(SoftrecError):
    category = "evaluation"
