import cmath
import sys

import numpy as np
import pytest
from hypothesis import settings

from raylimit.polynomial import MonicPoly

settings.register_profile("ci", deadline=None, max_examples=40)
settings.load_profile("ci")


def poly(*coeffs):
    """Monic polynomial from its lower coefficients c_0..c_{d-1}."""
    return MonicPoly.from_coeffs(list(coeffs))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def close(a, b, tol):
    return abs(complex(a) - complex(b)) <= tol


TAU = 2 * cmath.pi


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "LINES", [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda t: int(t.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
