"""Exception hierarchy.

Every error raised by the package derives from :class:`MagspecError` and
belongs to one of three families, which the command line maps to exit
codes: numerical failures (1), invalid input or configuration (2) and
failed geometric hypotheses (3).
"""


class MagspecError(Exception):
    """Base class for all package errors."""

    exit_code = 1


class NumericalError(MagspecError):
    """A computation did not reach its tolerance or broke down."""

    exit_code = 1


class InputError(MagspecError, ValueError):
    """Invalid parameters or configuration."""

    exit_code = 2


class HypothesisError(MagspecError):
    """The geometry violates a hypothesis of the asymptotic theory."""

    exit_code = 3


# numerical
class NonConvergence(NumericalError):
    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class GridTooCoarse(NumericalError):
    pass


class BracketingFailure(NumericalError):
    pass


class SingularSystem(NumericalError):
    pass


class IdentityViolation(NumericalError):
    def __init__(self, name, residual, tol):
        super().__init__(f"identity {name!r} violated: residual {residual:.3e} > tol {tol:.1e}")
        self.name = name
        self.residual = residual
        self.tol = tol


class FactorizationFailure(NumericalError):
    pass


class ResolutionTooCoarse(NumericalError):
    pass


class MetricDegenerate(NumericalError):
    pass


class NonSmooth(NumericalError):
    pass


class WindowTooNarrow(NumericalError):
    pass


class SupportClipped(NumericalError):
    def __init__(self, message, clipped_mass=None):
        super().__init__(message)
        self.clipped_mass = clipped_mass


class FitIllConditioned(NumericalError):
    pass


class EmptySweep(NumericalError):
    pass


# input / configuration
class StripTooDeep(InputError):
    pass


class ThresholdViolation(InputError):
    pass


class ConfigError(InputError):
    pass


# hypotheses of the theory
class NotSimpleCurve(HypothesisError):
    pass


class DegenerateGeometry(HypothesisError):
    pass


class DegenerateMaximum(DegenerateGeometry):
    pass


class MultipleMaxima(DegenerateGeometry):
    pass
