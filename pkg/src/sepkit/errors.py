"""Exception hierarchy shared by every sepkit module."""


class SepkitError(Exception):
    """Base class for all toolkit errors."""


class ValidationError(SepkitError, ValueError):
    """Input data violates a schema or a precondition."""


class ConfigError(ValidationError):
    """A run parameter is out of its allowed range."""


class DegenerateGenerationError(ValidationError):
    """A generation is empty where a nonempty one is required."""


class MissingAuxiliaryError(ValidationError, KeyError):
    """A metric needs embeddings or entities that were not supplied."""

    def __str__(self) -> str:
        return str(self.args[0]) if self.args else "missing auxiliary data"


class SamplingError(SepkitError):
    """A generation request failed after all retries."""
