"""Exception types shared across the package."""


class TorusDriftError(Exception):
    """Base class for all package-specific errors."""


class DimensionMismatch(TorusDriftError):
    """Operands live on tori of different dimensions."""


class VanishingField(TorusDriftError):
    """A field required to be strictly positive (or sign-definite) vanishes."""


class VanishesOnLine(TorusDriftError):
    """The scalar factor vanishes somewhere along the sampled line."""


class SingularJacobian(TorusDriftError):
    """A diffeomorphism Jacobian is numerically singular."""


class NewtonDivergence(TorusDriftError):
    """Safeguarded Newton failed to converge within the iteration budget."""


class IntegrationError(TorusDriftError):
    """The adaptive integrator could not complete (underflow, non-finite state)."""


class ResolutionOverflow(TorusDriftError):
    """A requested grid would allocate more bins than the safety cap."""


class ScenarioError(TorusDriftError):
    """A scenario file failed strict validation."""
