"""Exception hierarchy shared by all kvwave modules."""


class KVWaveError(Exception):
    """Base class for every error raised by kvwave."""


# geometry

class GeometryError(KVWaveError, ValueError):
    pass


class NonPositiveExtent(GeometryError):
    pass


class TooFewNodes(GeometryError):
    pass


class RegionTouchesBoundary(GeometryError):
    pass


class EpsTooLarge(GeometryError):
    pass


# constitutive assumptions

class AssumptionViolated(KVWaveError, ValueError):
    """A constitutive or damping assumption fails on the sampled data."""

    def __init__(self, message, witness=None):
        super().__init__(message)
        self.witness = witness


class SupercriticalExponent(AssumptionViolated):
    pass


class SignConditionViolated(AssumptionViolated):
    pass


class GrowthViolated(AssumptionViolated):
    pass


class GrowthBoundViolated(AssumptionViolated):
    pass


class NotMonotone(AssumptionViolated):
    pass


class NegativeCoefficient(AssumptionViolated):
    pass


class EtaFloorViolated(AssumptionViolated):
    pass


# time stepping

class SolverDiverged(KVWaveError, RuntimeError):
    def __init__(self, message, residual_norm=float("nan"), iterations=0):
        super().__init__(message)
        self.residual_norm = residual_norm
        self.iterations = iterations


class NonFiniteState(KVWaveError, FloatingPointError):
    pass


# trajectories and post-processing

class EmptyTrajectory(KVWaveError, ValueError):
    pass


class TrajectoryTooShort(KVWaveError, ValueError):
    pass


class DegenerateFeedback(KVWaveError, ValueError):
    pass


class NonPositiveConstant(KVWaveError, ValueError):
    pass


class HypothesisViolated(KVWaveError, ValueError):
    """The sequence recursion fails; ``index`` is the first offending term."""

    def __init__(self, message, index):
        super().__init__(message)
        self.index = index


class DampingAbsent(KVWaveError, ValueError):
    pass


class ConfigInvalid(KVWaveError, ValueError):
    """Configuration errors; ``errors`` holds ``(key_path, reason)`` pairs."""

    def __init__(self, errors):
        if isinstance(errors, str):
            errors = [("", errors)]
        self.errors = list(errors)
        lines = [f"{key or '<config>'}: {reason}" for key, reason in self.errors]
        super().__init__("invalid configuration:\n  " + "\n  ".join(lines))
