"""Exception hierarchy shared by all modules."""

from __future__ import annotations


class SegShapError(Exception):
    """Base class for every error raised by this package."""


class ContractViolation(SegShapError, ValueError):
    """An argument broke a documented precondition."""


class SplitError(SegShapError):
    """A splitter could not produce a partition.

    ``reason`` is a short machine-readable tag such as ``"parse"`` or ``"empty"``.
    """

    def __init__(self, reason: str, message: str = "") -> None:
        self.reason = reason
        super().__init__(f"{reason}: {message}" if message else reason)


class ExactModeCap(SegShapError):
    def __init__(self, n_features: int, cap: int) -> None:
        self.n_features = n_features
        self.cap = cap
        super().__init__(
            f"exact mode supports at most {cap} features, got {n_features}"
        )


class IncompleteTable(SegShapError):
    pass


class PlanInvariantViolated(SegShapError):
    pass


class ComparatorError(SegShapError):
    def __init__(self, reason: str, message: str = "") -> None:
        self.reason = reason
        super().__init__(f"{reason}: {message}" if message else reason)


class ProviderError(SegShapError):
    """Generation or embedding endpoint failed after all retries."""

    def __init__(self, message: str, status: int | None = None) -> None:
        self.status = status
        super().__init__(message if status is None else f"HTTP {status}: {message}")


class InjectionError(SegShapError):
    def __init__(self, reason: str, message: str = "") -> None:
        self.reason = reason
        super().__init__(f"{reason}: {message}" if message else reason)


class AttributorError(SegShapError):
    pass


class DegenerateTest(SegShapError):
    """All paired differences are zero; the test has no information.

    By convention the p-value of such a comparison is 1.0.
    """

    p_value = 1.0


class ReportError(SegShapError):
    pass
