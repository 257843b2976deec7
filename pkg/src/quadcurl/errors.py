"""Exception types raised across the package."""


class QuadCurlError(Exception):
    """Base class for all package errors."""


class ParseError(QuadCurlError):
    pass


class EmptyMesh(QuadCurlError):
    pass


class NonManifold(QuadCurlError):
    pass


class ArityMismatch(QuadCurlError, ValueError):
    pass


class UnsupportedDegree(QuadCurlError, ValueError):
    pass


class DeficientPatch(QuadCurlError):
    """Collocation points of a patch do not determine a unique polynomial."""

    def __init__(self, element, rank, needed):
        self.element = element
        self.rank = rank
        self.needed = needed
        super().__init__(f"patch of element {element} has rank {rank} < {needed}")


class NonSPD(QuadCurlError):
    """System matrix is not positive definite; usually the penalty is too small."""


class NoConvergence(QuadCurlError):
    def __init__(self, iterations, residual):
        self.iterations = iterations
        self.residual = residual
        super().__init__(f"no convergence after {iterations} iterations (residual {residual:.3e})")


class DegenerateH(QuadCurlError, ValueError):
    pass


class StageError(QuadCurlError):
    """A pipeline stage failed; wraps the original error with the stage name."""

    def __init__(self, stage, n, cause):
        self.stage = stage
        self.n = n
        self.cause = cause
        super().__init__(f"stage '{stage}' failed at n={n}: {type(cause).__name__}: {cause}")
