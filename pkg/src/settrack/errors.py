"""Exception types shared by the pure-Python and compiled kernels."""


class SetTrackError(Exception):
    """Base class for all package errors."""


class InfeasibleAssignment(SetTrackError):
    """No finite-cost perfect assignment exists."""


class AssignmentCapExceeded(SetTrackError):
    """Ranked enumeration would return more assignments than the cap allows."""


class SizeGuardError(SetTrackError):
    """Input too large for an exhaustive routine."""


class DataError(SetTrackError):
    """Malformed or inconsistent input data (files, frames)."""
