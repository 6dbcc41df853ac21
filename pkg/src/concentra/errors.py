class DomainError(ValueError):
    """Raised when an input violates a documented precondition."""
