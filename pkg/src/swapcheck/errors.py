"""Exception types shared across the package."""

from __future__ import annotations


class SwapError(Exception):
    """Base class for every error raised by swapcheck."""


class SortError(SwapError):
    pass


class UnboundVariable(SwapError):
    pass


class DomainError(SwapError):
    """A value falls outside the declared domain of its variable."""


class MachineError(SwapError):
    """Structural problem in a machine definition."""


class FormatError(SwapError):
    """Malformed machine-definition JSON."""


class InitViolatesInvariant(SwapError):
    def __init__(self, machine: str, predicate: str):
        super().__init__(f"{machine}: initial state violates invariant {predicate}")
        self.machine = machine
        self.predicate = predicate


class GuardFalse(SwapError):
    pass


class UnknownEvent(SwapError):
    pass


class StateCapExceeded(SwapError):
    def __init__(self, cap: int, frontier: int):
        super().__init__(f"state cap {cap} exceeded with {frontier} states still on the frontier")
        self.cap = cap
        self.frontier = frontier


class GluingIllSorted(SwapError):
    pass


class ConfigError(SwapError):
    pass


class Unrecoverable(SwapError):
    def __init__(self, message: str, constraints: tuple[str, ...] = ()):
        super().__init__(message)
        self.constraints = constraints


class WrongActiveSystem(SwapError):
    pass


class MaxStepsExceeded(SwapError):
    def __init__(self, max_steps: int, trace=None):
        super().__init__(f"no quiescence within {max_steps} steps")
        self.max_steps = max_steps
        self.trace = trace
