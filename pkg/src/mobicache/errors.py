"""Exception types shared across the package."""


class InstanceTooLargeError(Exception):
    """Raised when an exhaustive computation would exceed its configured cap."""


class InternalConsistencyError(Exception):
    """Raised when a self-check on a constructed object fails.

    Signals a construction bug rather than bad user input.
    """
