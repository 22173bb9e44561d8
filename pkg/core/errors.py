"""Error types shared by every module.

Each error carries a ``code`` naming the module and failure kind (for example
``inverse/singular-input``) and the process exit code the CLI maps it to.
"""


class FFMError(Exception):
    """Base class for all toolkit errors."""

    kind = "error"
    exit_code = 1

    def __init__(self, message: str, module: str = "core"):
        super().__init__(message)
        self.module = module

    @property
    def code(self) -> str:
        return f"{self.module}/{self.kind}"


class InvalidArgumentError(FFMError, ValueError):
    """Bad shapes, ranges or tags supplied by the caller."""

    kind = "invalid-argument"
    exit_code = 2


class SchemaError(FFMError):
    """Malformed input files or run configurations."""

    kind = "schema"
    exit_code = 2


class SingularInputError(FFMError):
    """An operator that must be inverted has no usable spectrum."""

    kind = "singular-input"


class NumericalError(FFMError):
    """A quantity that is nonnegative in exact arithmetic came out negative."""

    kind = "numerical-error"


class DegenerateConfigError(FFMError):
    """A simulation configuration that cannot produce valid data."""

    kind = "degenerate-config"
