"""Exception types shared across the package."""


class PreconditionError(ValueError):
    """An input violates an operation's documented precondition."""


class StepSizeError(PreconditionError):
    """Step size exceeds the ``eta <= 1/L`` guard."""


class RGOError(RuntimeError):
    """The rejection oracle gave up; ``stats`` holds the counts so far."""

    def __init__(self, message, stats=None):
        super().__init__(message)
        self.stats = stats
