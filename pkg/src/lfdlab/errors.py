"""Exception and warning taxonomy shared by every module."""


class LfdError(Exception):
    """Base class for all package errors."""


class InvalidGrid(LfdError):
    """Grid construction parameters violate a precondition."""


class NoEquilibrium(LfdError):
    """No Fermi-Dirac state carries the requested mass and energy."""


class NonConvergence(LfdError):
    """An iterative solver exhausted its budget; carries residual info."""


# Some call sites use this historical alias.
NoConvergence = NonConvergence


class BallTooLarge(LfdError):
    """Saturated ball radius exceeds half the grid half-width."""


class PauliViolation(LfdError):
    """A field exceeds its ceiling 1/eps beyond tolerance."""


class StepTooLarge(LfdError):
    """Time step violates the parabolic stability restriction."""


class BlowUp(LfdError):
    """Non-finite values appeared during time marching."""


class ProjectionInfeasible(LfdError):
    """The conservative moment correction has a singular system."""


class MassMismatch(LfdError):
    """Two fields that must share mass do not."""


class DegenerateFit(LfdError):
    """Decay-rate fit attempted on values at the floor."""


class NotRadial(LfdError):
    """Operation requires a radially symmetric field."""


class EpsilonOutOfRange(LfdError):
    """Quantum parameter violates a named threshold.

    Attributes
    ----------
    threshold : str
        Name of the violated threshold (e.g. "eps_dagger", "eps_one").
    """

    def __init__(self, message, threshold=""):
        super().__init__(message)
        self.threshold = threshold


class GramSingular(LfdError):
    """Gram matrix of the collision invariants is singular."""


class AliasingRisk(UserWarning):
    """Significant mass near the grid boundary; convolution may alias."""
