"""Exception types shared across the package."""


class NumericalFailure(RuntimeError):
    """A linear-algebra kernel or an integrator lost numerical control.

    Carries optional context: the grid time where an integration blew up,
    or the (path, step) pair for a simulation failure.
    """

    def __init__(self, message, *, time=None, path=None, step=None):
        super().__init__(message)
        self.time = time
        self.path = path
        self.step = step


class OutOfHorizon(ValueError):
    """Requested evaluation time lies outside the problem horizon."""


class RegularityViolation(RuntimeError):
    """A pointwise solvability gate failed during a derivative evaluation.

    ``which`` is "PSD" (effective control weight not positive semidefinite)
    or "RANGE" (cross term not inside the range of the weight).
    """

    def __init__(self, time, which):
        super().__init__(f"regularity gate {which} failed at t={time:.9g}")
        self.time = time
        self.which = which


class ClosedLoopUnsolvable(RuntimeError):
    """No closed-loop optimal strategy exists for the given data.

    Raised when a solvability gate fails at a grid point during the backward
    sweep.  ``reason`` is "PSD", "RANGE", or "RANGE_FEEDFORWARD"; ``time`` is
    the grid time where the gate first failed (the sweep runs backward from
    the horizon, so this is the largest failing time).
    """

    def __init__(self, time, reason):
        super().__init__(f"closed-loop synthesis failed at t={time:.9g}: {reason}")
        self.time = time
        self.reason = reason


class ProblemValidationError(ValueError):
    """Problem data violates a validation rule.

    ``errors`` lists every violation found, each naming the offending field
    and location.
    """

    def __init__(self, errors):
        super().__init__("; ".join(errors))
        self.errors = list(errors)


class ProblemFormatError(ValueError):
    """Problem document failed to parse or does not match the schema."""
