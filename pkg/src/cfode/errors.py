"""Exception hierarchy shared by the solvers, the parser and the CLI."""


class CFOdeError(Exception):
    """Base class for all errors raised by :mod:`cfode`."""


class GridTooSmall(CFOdeError, ValueError):
    pass


class OrderOutOfRange(CFOdeError, ValueError):
    pass


class NonzeroForcingAtStart(CFOdeError, ValueError):
    """The forcing does not vanish at the interval start.

    ``magnitude`` is ``|f(a)|``, the amplitude of the residual term
    ``f(a) exp(-alpha (t - a) / (1 - alpha))`` the closed form would leave.
    """

    def __init__(self, magnitude: float):
        self.magnitude = magnitude
        super().__init__(f"forcing must vanish at the start of the interval, |f(a)| = {magnitude:.6g}")


class SingularConstantFit(CFOdeError, ArithmeticError):
    pass


class DegenerateLeadingCoefficient(CFOdeError, ValueError):
    pass


class NotContractive(CFOdeError):
    def __init__(self, q: float):
        self.q = q
        super().__init__(f"not contractive: q={q!r}")


class MaxIterationsExceeded(CFOdeError):
    def __init__(self, iterations: int, last_diff: float):
        self.iterations = iterations
        self.last_diff = last_diff
        super().__init__(f"no convergence after {iterations} iterations (last diff {last_diff:.3e})")


class SolvabilityViolation(CFOdeError, ValueError):
    pass


class NearSingularStep(CFOdeError, ArithmeticError):
    pass


class ExprError(CFOdeError):
    """Base class for expression errors; ``offset`` is a byte offset or None."""

    def __init__(self, message: str, offset: int | None = None):
        self.offset = offset
        if offset is not None:
            message = f"{message} (at byte {offset})"
        super().__init__(message)


class ExprSyntaxError(ExprError):
    pass


class UnknownIdentifier(ExprError):
    def __init__(self, name: str, offset: int | None = None):
        self.name = name
        super().__init__(f"unknown identifier {name!r}", offset)


class EvalDomainError(ExprError, ArithmeticError):
    pass


class MissingVariable(ExprError):
    pass


class UnsupportedDifferentiation(ExprError):
    pass
