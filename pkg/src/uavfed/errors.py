"""Exception types shared across the simulator."""


class ValidationError(ValueError):
    """A configuration or input value violates a documented invariant."""


class PlacementInfeasible(RuntimeError):
    """UAV placement constraints could not be satisfied within the attempt budget."""


class DegenerateTopology(RuntimeError):
    """A realized device placement left the network with no devices."""


class CoverageInfeasible(RuntimeError):
    """No UAV subset covers enough devices for the requested selection size."""
