class ExportError(Exception):
    """Checkpoint, variant, or graph-serialization failure."""
