class BmmppError(Exception):
    """Base class for errors raised by the package."""

    stage = "bmmpp"

    def __init__(self, message, *, stage=None, data=None):
        super().__init__(message)
        if stage is not None:
            self.stage = stage
        self.data = data or {}

    def envelope(self):
        return {"stage": self.stage, "message": str(self), "data": self.data}


class InvalidModelError(BmmppError, ValueError):
    stage = "model"


class ReducibleModelError(InvalidModelError):
    """Stationary quantities requested for a model with y = 0 or r = 0."""


class InfeasibleMomentsError(BmmppError, ValueError):
    """No valid parameter point reproduces the requested moments.

    ``constraint`` names the first violated inequality.
    """

    stage = "canonical"

    def __init__(self, message, *, constraint=None, stage=None, data=None):
        super().__init__(message, stage=stage, data=data)
        self.constraint = constraint
        if constraint is not None:
            self.data.setdefault("constraint", constraint)


class DegenerateError(BmmppError, ValueError):
    """A closed-form expression hits a zero denominator."""


class TruncationError(BmmppError, RuntimeError):
    stage = "counting"


class ConvergenceError(BmmppError, RuntimeError):
    pass


class UnstableQueueError(BmmppError, ValueError):
    stage = "queue"
