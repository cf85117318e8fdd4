"""Exception types raised across the package."""


class CapacityError(ValueError):
    """Lattice box has too few sites for the requested particle number."""


class InvalidConfigError(ValueError):
    """Configuration has coinciding points where distinct points are required."""


class LiftError(ValueError):
    """Start configuration does not project onto the head of the path."""


class NotALoopError(ValueError):
    """A closed path was required but the path is open."""


class ShapeError(ValueError):
    """Mismatched sizes, graphs or ranks."""


class DimensionError(ValueError):
    """Operation is not defined in this space dimension."""


class UnsupportedTopologyError(ValueError):
    """Operation is not defined on this graph (periodic box or coinciding points)."""


class RepresentationError(ValueError):
    """Matrix-valued map on S_N is not a unitary homomorphism."""


class SymmetryError(ValueError):
    """Function or potential lacks the required permutation symmetry."""


class InvalidFrameError(ValueError):
    """Frame is not parallel for the bundle it claims to trivialize."""


class NodeError(ArithmeticError):
    """Wave function (nearly) vanishes, so the velocity field is undefined."""

    def __init__(self, message, location=None, time=None):
        super().__init__(message)
        self.location = location
        self.time = time


class TrivializationObstruction(Exception):
    """A fundamental cycle with non-identity holonomy blocks trivialization.

    ``loop`` is the offending closed vertex path and ``holonomy`` its
    transport matrix.
    """

    def __init__(self, loop, holonomy, residual):
        self.loop = list(loop)
        self.holonomy = holonomy
        self.residual = float(residual)
        super().__init__(
            f"bundle is not trivial: cycle of length {len(self.loop) - 1} has "
            f"holonomy deviating from identity by {self.residual:.3g}"
        )
