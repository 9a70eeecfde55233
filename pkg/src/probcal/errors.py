from __future__ import annotations


class ProbcalError(Exception):
    """Base class for library errors."""


class ContractError(ProbcalError, ValueError):
    """Input violates a documented precondition (bad file, bad range, empty set)."""


class ConvergenceError(ProbcalError, RuntimeError):
    """A numerical routine failed to reach its tolerance."""
