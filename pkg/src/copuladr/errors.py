"""Semantic exception types shared across the package."""


class ContractViolation(ValueError):
    """An input violates a documented precondition."""


class DegenerateNeighborhood(RuntimeError):
    """Too few observations carry positive kernel weight for a local fit."""


class EstimationFailed(RuntimeError):
    """An estimator could not produce a usable result."""


class UnsupportedMarginMode(RuntimeError):
    """Oracle margins were requested for data without stored uniforms."""
