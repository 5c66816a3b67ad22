"""Exception types raised across the package."""


class RegulusError(Exception):
    """Base class for package errors."""


class ShapeError(RegulusError, ValueError):
    """Operand dimensions are inconsistent."""


class InputError(RegulusError, ValueError):
    """Input data is malformed (e.g. non-finite entries)."""


class ParameterError(RegulusError, ValueError):
    """A numerical parameter is outside its admissible range."""


class PreconditionError(RegulusError, ValueError):
    """A mathematical precondition of a factorization or solver does not hold.

    The ``check`` attribute names the failed condition.
    """

    def __init__(self, message, check=None):
        super().__init__(message)
        self.check = check


class RankDeficiencyError(RegulusError):
    """A requested truncation index hits numerically zero singular values."""


class DpInfeasibleError(RegulusError):
    """The discrepancy equation has no root.

    ``side`` is ``"upper"`` when the target exceeds the largest attainable
    residual (alpha -> infinity) and ``"lower"`` when it is below the
    smallest one (alpha -> 0).
    """

    def __init__(self, message, side):
        super().__init__(message)
        self.side = side


class Breakdown(RegulusError):
    """Krylov basis could not be extended (invariant subspace reached).

    The decomposition state is left consistent: the new basis vector is
    stored as zeros and the corresponding subdiagonal entry as 0.
    """

    def __init__(self, d, state=None):
        super().__init__(f"breakdown at step d={d}")
        self.d = d
        self.state = state
