"""Exception types shared across the solvers and diagnostics."""


class StratoError(Exception):
    """Base class for all solver and harness errors."""


class GridMismatch(StratoError):
    """Fields passed to an operation live on different grids."""


class NonPositiveProfile(StratoError):
    """Hydrostatic density would touch zero inside the slab."""


class NegativeDensity(StratoError):
    """Assembled initial density is not positive everywhere."""


class BlowUp(StratoError):
    """A field became non-finite during time stepping."""


class PositivityLoss(StratoError):
    """Density or weighted potential temperature dropped below -10*eps."""


class IncompatibleData(StratoError):
    """Neumann right-hand side violates the solvability condition."""


class NoConvergence(StratoError):
    """An iterative solve stalled before reaching its tolerance."""


class NonPositiveReference(StratoError):
    """Relative-energy reference density is not strictly positive."""


class DegeneratePoints(StratoError):
    """Rate fit received a metric value of zero."""


class EigensolverFailure(StratoError):
    """The vertical eigenvalue solve did not return a clean spectrum."""


class ConfigError(StratoError):
    """Experiment configuration failed validation."""
