"""Exception hierarchy.

Every error carries an ``exit_code`` used by the command line front-end:
2 for numerical non-convergence, 3 for configuration/input problems and
4 for consistency failures (monotonicity, transversality).
"""


class CritError(Exception):
    exit_code = 3


class ConfigError(CritError):
    exit_code = 3


class GeometryError(CritError):
    """Invalid geometry: degenerate intervals, self-intersections, disconnected windows."""


class DecompositionError(GeometryError):
    """A boundary point is claimed by neither (or both) of the Robin/Dirichlet predicates."""


class TransversalityError(GeometryError):
    exit_code = 4


class EllipticityError(CritError):
    def __init__(self, message, point=None):
        super().__init__(message)
        self.point = point


class RobinDataError(CritError):
    pass


class PositivityError(CritError):
    exit_code = 2


class NumericalError(CritError):
    exit_code = 2


class NonConvergenceError(NumericalError):
    def __init__(self, message, iterations=None, residual=None, level=None):
        super().__init__(message)
        self.iterations = iterations
        self.residual = residual
        self.level = level


class ResolventError(NumericalError):
    """The shift lies (numerically) in the spectrum; the resolvent does not exist."""


class ConsistencyError(CritError):
    exit_code = 4

    def __init__(self, message, level=None):
        super().__init__(message)
        self.level = level


class PolePlacementError(CritError):
    pass


class NonpositiveOperatorError(CritError):
    pass


class SymmetryRequiredError(CritError):
    pass


class DegeneratePairError(CritError):
    pass


class ResolutionError(CritError):
    pass


class MisuseError(CritError):
    pass


class OracleError(CritError):
    pass


class WeightError(CritError):
    pass
