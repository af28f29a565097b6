from typing import Any, Optional


class EquidistError(Exception):
    """
    Base error of the package.
    Carries a human readable `detail` and the process `exit_code` the CLI maps it to.
    """
    exit_code: int = 1

    def __init__(self, detail: str):
        super().__init__(detail)
        self.detail = detail


class DomainError(EquidistError):
    """A numeric precondition or hypothesis does not hold for the given inputs."""
    exit_code = 1


class DegenerateProductError(DomainError):
    """
    Raised when a factor (1 - h(p)) of an Euler-type product is not positive.
    """

    def __init__(self, prime: int, value: float, detail: Optional[str] = None):
        self.prime = prime
        self.value = value
        super().__init__(
            detail or f"Degenerate product: h({prime}) = {value!r} >= 1."
        )


class HypothesisViolation(DomainError):
    """An input function fails a growth hypothesis; `witness` locates the failure."""

    def __init__(self, detail: str, witness: Any = None):
        self.witness = witness
        super().__init__(detail)


class PreconditionError(DomainError):
    """Names the violated inequality in its detail."""


class ConfigError(EquidistError):
    """Experiment configuration could not be read or validated."""
    exit_code = 2

    def __init__(self, detail: str, location: Optional[str] = None):
        self.location = location
        super().__init__(f"{location}: {detail}" if location else detail)
