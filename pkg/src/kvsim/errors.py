class InvalidStateError(RuntimeError):
    """Raised when an operation hits an object whose state cannot support it."""
