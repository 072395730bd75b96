"""Documented families behind the figure scenarios.

Each scenario fixes a perturbation family, a periodic angle, a viewport and
the outcome the analysis is expected to show.  The schedules are short
tails chosen so that one run fits on a desk machine; ``representative``
marks scenarios whose exact parameters are a stand-in chosen to show the
same structure.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from .family import PerturbationFamily, horocycle
from .maxwild import build_maxwild
from .polynomial import MonicPoly, format_angle


@dataclass(frozen=True)
class Scenario:
    name: str
    description: str
    angle: Fraction
    center: complex
    width: float
    expected: dict
    representative: bool = False

    def family(self) -> PerturbationFamily:
        return _FAMILIES[self.name]()

    def to_json(self) -> dict:
        return {
            "name": self.name,
            "description": self.description,
            "angle": format_angle(self.angle),
            "viewport": {"center": [self.center.real, self.center.imag], "width": self.width},
            "expected": dict(self.expected),
            "representative": self.representative,
            "family": self.family().to_json(),
        }


EPS_TAIL = [1e-2, 1e-3, 1e-4, 1e-5]


def _pert_left():
    return PerturbationFamily.additive(build_maxwild(1).P_monic, EPS_TAIL)


def _pert_mid():
    fam = PerturbationFamily.multiplier_path("power", horocycle(0.1, [10, 12, 14]), degree=3)
    fam.spec = dict(fam.spec, horocycle={"a": 0.1, "t": [10, 12, 14]})
    return fam


def _pert_right():
    ts = [12, 16, 20, 24]
    fam = PerturbationFamily.multiplier_path("power", horocycle(0.25, ts), degree=2)
    fam.spec = dict(fam.spec, horocycle={"a": 0.25, "t": ts})
    return fam


def _double():
    ts = [12, 14, 16]
    fam = PerturbationFamily.multiplier_path("power", horocycle(0.25, ts), degree=3)
    fam.spec = dict(fam.spec, horocycle={"a": 0.25, "t": ts})
    return fam


def _pinch():
    return PerturbationFamily.additive(build_maxwild(2).P_monic, EPS_TAIL)


PERS_POLY = MonicPoly.from_coeffs([0, -1, 0.6j])


def _pers():
    lams = [-1 + 1j * d for d in (0.04, 0.02, 0.01, 0.005)]
    return PerturbationFamily.multiplier_path("linear", lams, base=PERS_POLY, z0=0j)


_FAMILIES = {
    "pert_left": _pert_left,
    "pert_mid": _pert_mid,
    "pert_right": _pert_right,
    "double": _double,
    "pinch": _pinch,
    "pers": _pers,
}

SCENARIOS = {
    "pert_left": Scenario(
        "pert_left",
        "cubic z + C z (z - 1)^2 (monic form) with a non-degenerate parabolic point, plus eps",
        Fraction(0), 0.3 + 0j, 2.4, {"classification": "wild", "N": 1}, representative=True),
    "pert_mid": Scenario(
        "pert_mid",
        "lam z + z^3 with lam on the horocycle |lam - 1.1| = 0.1: one loop at 0",
        Fraction(0), 0j, 2.0, {"classification": "semi_wild", "M": 1, "Msharp": 1},
        representative=True),
    "pert_right": Scenario(
        "pert_right",
        "lam z + z^2 with lam on the horocycle |lam - 1.25| = 0.25: Hawaiian earring at 0",
        Fraction(0), -0.5 + 0j, 3.0, {"classification": "semi_wild", "Msharp": 1}),
    "double": Scenario(
        "double",
        "lam z + z^3 with lam on the horocycle |lam - 1.25| = 0.25: two interlacing earrings",
        Fraction(0), 0j, 2.0, {"classification": "semi_wild", "N": 0, "Msharp": 2}),
    "pinch": Scenario(
        "pinch",
        "real quintic with two double parabolic points and a repelling point at 0, plus eps",
        Fraction(0), 0.6 + 0j, 2.6, {"classification": "wild", "N": 2}),
    "pers": Scenario(
        "pers",
        "-z + 0.6i z^2 + z^3 perturbed through the multiplier at 0, angle 1/4",
        Fraction(1, 4), -0.2 + 0j, 2.4, {"classification": "wild", "N": 1, "w1_period": 2}),
}


def check_expected(scenario: Scenario, report: dict) -> list:
    """Names of expectations the report does not meet."""
    misses = []
    for key, want in scenario.expected.items():
        if key == "w1_period":
            jp = report["julia_points"]
            got = jp[1]["period"] if len(jp) > 1 else None
        else:
            got = report.get(key)
        if got != want:
            misses.append(f"{key}: expected {want}, got {got}")
    return misses
