"""Exception hierarchy shared by all raylimit modules."""


class RayLimitError(Exception):
    """Base class for domain errors; the CLI maps these to exit code 1."""

    def details(self):
        return {"error": type(self).__name__, "message": str(self)}


class RootFindingFailed(RayLimitError):
    pass


class NoConvergence(RayLimitError):
    pass


class DegenerateDerivative(RayLimitError):
    """Newton derivative vanished: the seed converged to a multiple root.

    The approximate location is kept in ``point`` so callers can switch to
    multiplicity-aware refinement.
    """

    def __init__(self, message, point=None):
        super().__init__(message)
        self.point = point


class PoleOnContour(RayLimitError):
    pass


class EnclosureAmbiguous(RayLimitError):
    pass


class DegenerateLeading(RayLimitError):
    pass


class IrrationalIndifferent(RayLimitError):
    pass


class RangeGuard(RayLimitError):
    pass


class ClusterMiscount(RayLimitError):
    pass


class NotInPetal(RayLimitError):
    pass


class TooCoarse(RayLimitError):
    pass


class TooShallow(RayLimitError):
    pass


class Crashed(RayLimitError):
    def __init__(self, message, s_crash=None, near_critical=None):
        super().__init__(message)
        self.s_crash = s_crash
        self.near_critical = near_critical

    def details(self):
        out = super().details()
        out["s_crash"] = self.s_crash
        if self.near_critical is not None:
            w = complex(self.near_critical)
            out["near_critical"] = [w.real, w.imag]
        return out


class BranchAmbiguous(RayLimitError):
    pass


class NoNearbyPeriodic(RayLimitError):
    pass


class NotCauchy(RayLimitError):
    def __init__(self, message, tail_diameter=None, distances=None):
        super().__init__(message)
        self.tail_diameter = tail_diameter
        self.distances = distances

    def details(self):
        out = super().details()
        out["tail_diameter"] = self.tail_diameter
        return out


class UnclassifiablePoint(RayLimitError):
    pass


class OrphanArc(RayLimitError):
    pass


class Inconclusive(RayLimitError):
    pass


class InequalityViolated(RayLimitError):
    pass


class ResitNonNegative(RayLimitError):
    pass


class PairNotAttracting(RayLimitError):
    pass
