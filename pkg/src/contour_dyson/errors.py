"""Exception types raised across the package."""


class ContourError(ValueError):
    """Invalid contour: self-intersecting, degenerate, or unsuitable for an operation."""


class CollisionError(ValueError):
    """Two particles coincide (or sit closer than the separation guard)."""

    def __init__(self, i, j, distance):
        self.pair = (int(i), int(j))
        self.distance = float(distance)
        super().__init__(
            f"particles {i} and {j} coincide (chordal distance {distance:.3e})"
        )


class StepSizeError(RuntimeError):
    """Persistent collision rejections in the SDE integrator."""


class SamplerError(RuntimeError):
    """Metropolis chain stalled or too short for the requested estimate."""


class ConvergenceError(RuntimeError):
    """An iterative solver failed to reach its tolerance."""

    def __init__(self, message, defect=float("nan")):
        self.defect = defect
        super().__init__(message)


class ConfigError(ValueError):
    """Run configuration failed validation."""
