"""Exception hierarchy shared across the package."""


class DoptError(Exception):
    """Base class for all package-specific failures."""


class NotPositiveDefinite(DoptError):
    """Matrix required to be positive definite fails factorization."""


class ConvergenceFailure(DoptError):
    """Iterative routine hit its sweep/iteration cap without converging."""


class DimensionMismatch(DoptError):
    """Operands have incompatible shapes."""


class IndexOutOfRange(DoptError):
    """Design or scan refers to a candidate index outside the candidate set."""


class RankDeficient(DoptError):
    """No nonsingular design exists on the given candidates."""


class IterationCap(DoptError):
    """Optimality certificate not reached within the iteration budget."""


class TooFewTrials(DoptError):
    """Requested exact-design size is smaller than the support to round."""


class SingularStart(DoptError):
    """Exchange heuristic started from a singular design."""


class BudgetExceeded(DoptError):
    """Exhaustive enumeration would exceed the configured budget."""


class InfeasiblePair(DoptError):
    """(trace, determinant) pair admits no eigenvalue bracket."""


class SafetyViolation(DoptError):
    """A provably non-removable candidate was removed; release blocker."""
