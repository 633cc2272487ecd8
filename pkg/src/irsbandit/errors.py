"""Exception types shared across the package."""


class ValidationError(ValueError):
    """Rejected input: bad arm index, wrong reward type, malformed config."""


class BudgetExceededError(RuntimeError):
    """A solver refused an instance whose size exceeds its configured budget."""


class NumericalError(ArithmeticError):
    """A numerical routine failed to converge or to bracket its target."""
