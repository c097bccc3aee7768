"""Exception types shared across the package.

The CLI maps these onto exit codes, so solver code should raise the most
specific class that applies rather than bare ValueError for domain failures.
"""


class MwcutError(Exception):
    """Base class for all package-specific errors."""


class ParseError(MwcutError):
    """Malformed instance text. Carries a 1-based line number."""

    def __init__(self, line: int, message: str):
        self.line = line
        self.message = message
        super().__init__(f"line {line}: {message}")


class InfeasibleError(MwcutError):
    """No solution satisfies the stated constraints."""


class InstanceTooLargeError(MwcutError):
    """Instance exceeds an enumeration cap or oracle budget."""


class CapabilityError(MwcutError):
    """A norm oracle was requested that the norm does not support."""


class GuessTooLowError(MwcutError):
    """Covering threshold guess rejected every candidate set in an iteration."""


class TrialRejectedError(MwcutError):
    """One uncrossing/aggregation trial left a terminal uncovered or displaced."""


class AllTrialsRejectedError(MwcutError):
    """Every uncrossing/aggregation trial left a terminal uncovered."""


class InvariantViolationError(MwcutError):
    """A runtime self-check failed; indicates a bug, not bad input."""
