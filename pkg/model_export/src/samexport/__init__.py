"""Checkpoint-to-graph-file conversion for the promptable-segmentation family."""

from .errors import ExportError
from .export import DEFAULT_OPSET, ExportManifest, export
from .probe import probe_model
from .variants import DEFAULT_VARIANT, VARIANTS, build_model, load_checkpoint, save_checkpoint

__version__ = "0.1.0"

__all__ = [
    "DEFAULT_OPSET",
    "DEFAULT_VARIANT",
    "ExportError",
    "ExportManifest",
    "VARIANTS",
    "build_model",
    "export",
    "load_checkpoint",
    "probe_model",
    "save_checkpoint",
    "__version__",
]
