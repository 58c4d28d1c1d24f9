class ValidationError(ValueError):
    """Input violates an operation's preconditions."""


class NumericBudgetError(RuntimeError):
    """A numerical routine could not reach its tolerance within budget."""
