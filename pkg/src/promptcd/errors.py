"""Exception hierarchy shared across the package.

CLI exit-code mapping: InputError and GenerationError exit 2,
BackendError exits 3.
"""


class PromptCDError(Exception):
    """Base class for all errors raised by this package."""


class InputError(PromptCDError):
    """Invalid caller input: bad paths, shapes, labels, or parameter values."""


class BackendError(PromptCDError):
    """Segmentation backend failed to load or run."""

    def __init__(self, message: str, excluded_label: int | None = None):
        super().__init__(message)
        self.excluded_label = excluded_label


class GenerationError(PromptCDError):
    """Synthetic scene generation could not satisfy its constraints."""
