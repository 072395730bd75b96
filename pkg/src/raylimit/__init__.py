"""External rays, parabolic invariants and Hausdorff limits of rays for monic polynomials."""

from .errors import RayLimitError
from .polynomial import MonicPoly, angle_period, angle_times_d, evaluate, orbit

__all__ = ["MonicPoly", "RayLimitError", "angle_period", "angle_times_d", "evaluate", "orbit"]
__version__ = "0.1.0"
