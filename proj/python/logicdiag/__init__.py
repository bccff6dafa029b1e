"""Pseudo-label revision against a label hierarchy."""

from ._core import ContractViolation, DataError, LogicDiagError, Session, __version__

__all__ = ["ContractViolation", "DataError", "LogicDiagError", "Session", "__version__", "create_session"]


def create_session(hierarchy_text, config=None):
    """Parse a hierarchy and revision config into a reusable session."""
    return Session(hierarchy_text, dict(config or {}))
