class TargetLabelError(RuntimeError):
    """Target-domain annotations were requested by a training path."""
