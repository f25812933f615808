"""Exception types raised by the package."""


class WeakRigidityError(Exception):
    """Base class for all package errors."""


class InvalidSpec(WeakRigidityError, ValueError):
    """A framework description failed validation."""


class InvalidArgument(WeakRigidityError, ValueError):
    pass


class InvalidPrecondition(WeakRigidityError):
    pass


class DegenerateConfiguration(WeakRigidityError):
    """Two agents that share a constraint are (numerically) coincident."""


class NotGIWR(WeakRigidityError):
    pass


class NotCollinear(WeakRigidityError):
    pass


class NoRealRoot(WeakRigidityError):
    pass


class AmbiguousRoot(WeakRigidityError):
    def __init__(self, roots):
        self.roots = tuple(roots)
        super().__init__(f"two admissible roots: {self.roots}")


class ScenarioError(WeakRigidityError, ValueError):
    """Scenario file could not be parsed or validated."""
