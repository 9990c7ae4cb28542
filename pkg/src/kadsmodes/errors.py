"""Exception hierarchy shared by the solver modules."""


class KadsError(Exception):
    """Base class for all numerical failures raised by the package."""


class Inadmissible(KadsError, ValueError):
    """Black hole parameters outside the sub-extremal admissible set."""


class DomainError(KadsError, ValueError):
    """Argument outside the domain of a map (e.g. r <= r_+)."""


class ConvergenceError(KadsError):
    """An iterative solver or integrator did not reach its tolerance."""


class NonNegativeLambdaTilde(KadsError):
    """The shifted separation constant is >= 0, so no WKB frequency exists."""


class CertificateFailure(KadsError):
    """A positivity certificate failed; indicates a bug or bad input."""


class EnvelopeViolation(KadsError):
    """WKB residuals exceeded the exp(F) - 1 envelope."""


class NoBracket(KadsError):
    """The bullet minimum does not change sign along the scanned path."""


class ReboundDetected(KadsError):
    """At the bisection limit the first zero of the bullet is interior."""


class BisectionStall(KadsError):
    """Bisection failed to shrink the bracket to the requested width."""
