import cmath
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from raylimit.errors import DegenerateDerivative, NoConvergence, RangeGuard
from raylimit.polynomial import (
    MonicPoly,
    angle_cycle,
    angle_period,
    angle_times_d,
    compose_expanded,
    critical_points,
    evaluate,
    fixed_points,
    horner,
    orbit,
    parse_angle,
    refine_periodic,
    taylor_of_iterate,
)

from conftest import poly

coef = st.complex_numbers(max_magnitude=2.0, allow_nan=False, allow_infinity=False)


@st.composite
def polys(draw, dmin=2, dmax=5):
    d = draw(st.integers(dmin, dmax))
    return MonicPoly.from_coeffs(draw(st.lists(coef, min_size=d, max_size=d)))


@pytest.mark.parametrize("p,z,k,want", [
    (poly(0, 0), 3, 0, 9),
    (poly(0, 0), 3, 1, 6),
    (poly(0, 1, 0), 1, 0, 2),
    (poly(0, 1, 0), 1, 3, 6),
    (poly(0, 0), 3, 5, 0),
])
def test_evaluate(p, z, k, want):
    assert evaluate(p, z, k) == want


def test_rejects_bad_input():
    with pytest.raises(ValueError):
        MonicPoly(1, (0,))
    with pytest.raises(ValueError):
        MonicPoly(2, (0,))
    with pytest.raises(ValueError):
        MonicPoly(2, (0, float("inf")))


def test_json_roundtrip():
    p = poly(1 - 2j, 0.5)
    assert MonicPoly.from_json(p.to_json()) == p


def test_compensated_horner_huge_argument():
    # (z - 1)^3 at a huge z, exact answer (z-1)^3 computed by Fraction
    p = poly(-1, 3, -3)
    z = 123456789.0 + 0j
    exact = (Fraction(123456789) - 1) ** 3
    assert abs(evaluate(p, z).real - float(exact)) <= 1e-15 * float(exact)


def test_overflow_propagates():
    p = poly(0, 0)
    assert not math.isfinite(abs(evaluate(p, 1e200)))


def test_orbit_examples():
    o = orbit(poly(0, 0), 2, 3)
    assert o.points == [2, 4, 16, 256]
    assert o.derivative_product == 1024
    o = orbit(poly(3, 1), 5, 0)
    assert o.points == [5] and o.derivative_product == 1
    assert orbit(poly(-1, 0), 0, 2).points == [0, -1, 0]


def test_orbit_truncates_on_overflow():
    o = orbit(poly(0, 0), 1e10, 20)
    assert o.truncated
    assert all(math.isfinite(abs(z)) for z in o.points)


@given(polys(2, 3), coef, st.integers(1, 4))
def test_orbit_matches_expanded_composition(p, z, n):
    if p.degree ** n > 256:
        n = 2
    o = orbit(p, z, n)
    full = compose_expanded(p, n)
    val = horner(full, z)
    der = horner(np.arange(1, len(full)) * full[1:], z)
    # rounding scale of the expanded form: |coefficients| evaluated at |z|
    absval = horner(np.abs(full), abs(z)).real
    absder = horner(np.arange(1, len(full)) * np.abs(full[1:]), abs(z)).real
    assert abs(o.points[-1] - val) <= 1e-12 * (1 + absval)
    assert abs(o.derivative_product - der) <= 1e-12 * (1 + absder)


def test_critical_points():
    assert np.allclose(critical_points(poly(0, 0)), [0])
    cps = sorted(critical_points(poly(0, 1, 0)), key=lambda c: c.imag)
    assert np.allclose(cps, [-1j / math.sqrt(3), 1j / math.sqrt(3)], atol=1e-14)
    # w (1 + w)^2 = w^3 + 2 w^2 + w
    cps = sorted(critical_points(poly(0, 1, 2)), key=lambda c: c.real)
    assert np.allclose(cps, [-1, -1 / 3], atol=1e-7)


@given(polys())
def test_critical_points_residual(p):
    cps = critical_points(p)
    assert len(cps) == p.degree - 1
    # multiple critical points carry rounding-limited residuals
    for c in cps:
        assert abs(evaluate(p, c, 1)) < 1e-6 * p.scale ** p.degree


@pytest.mark.parametrize("p,want", [
    (poly(0, 1), [(0, 2)]),
    (poly(0, 0), [(0, 1), (1, 1)]),
    # z + 0.5 z (z-1)^2 scaled to monic form is not monic; use 0.5-rescaled
    # conjugate z + z(z-1)^2 / ... handled in maxwild; here z + z(z-1)^2
    (poly(0, 2, -2), [(0, 1), (1, 2)]),
    (poly(0, 1, 0), [(0, 3)]),
    (poly(0, 1, 0, 0, 0), [(0, 5)]),
])
def test_fixed_points(p, want):
    got = [(complex(round(z.real, 6), round(z.imag, 6)), m) for z, m in fixed_points(p)]
    assert got == [(complex(z), m) for z, m in want]


def test_fixed_points_maxwild_example():
    # z + 0.5 z (z - 1)^2 has fixed points 0 (simple) and 1 (double)
    # P(z) - z = 0.5 z (z-1)^2; conjugating by z -> sqrt(2) z makes it monic
    g = math.sqrt(2)
    p = MonicPoly.from_full([0, 1 + 0.5, -1 * g, 0.5 * g * g])
    fps = fixed_points(p)
    assert [m for _, m in fps] == [1, 2]
    assert abs(fps[0][0]) < 1e-12 and abs(fps[1][0] * g - 1) < 1e-8


@given(polys())
def test_fixed_points_symmetric_functions(p):
    fps = fixed_points(p)
    assert sum(m for _, m in fps) == p.degree
    roots = [z for z, m in fps for _ in range(m)]
    rebuilt = np.poly(roots)[::-1]
    target = p.full.copy()
    target[1] -= 1
    assert np.allclose(rebuilt, target, rtol=0, atol=1e-8 * p.scale ** p.degree)


def test_refine_periodic_examples():
    w = cmath.exp(2j * math.pi / 3)
    pt = refine_periodic(poly(0, 0), 2, w + 0.01)
    assert abs(pt.point - w) < 1e-12 or abs(pt.point - w.conjugate()) < 1e-12
    assert abs(pt.multiplier - 4) < 1e-12
    assert pt.period == 2
    pt = refine_periodic(poly(0, 0), 1, 0.9)
    assert abs(pt.point - 1) < 1e-14 and abs(pt.multiplier - 2) < 1e-13 and pt.period == 1
    # a fixed point found while looking for period 2 reports period 1
    assert refine_periodic(poly(0, 0), 2, 1.05).period == 1


def test_refine_periodic_parabolic_is_degenerate():
    with pytest.raises(DegenerateDerivative):
        refine_periodic(poly(0, 1), 1, 0.01)


def test_refine_periodic_guards():
    with pytest.raises(RangeGuard):
        refine_periodic(poly(0, 0), 65, 0.5)
    with pytest.raises(NoConvergence):
        refine_periodic(poly(0, 0), 1, 1e10, max_iter=5)


@given(polys(2, 3), coef, st.integers(1, 3))
def test_refine_periodic_claims(p, seed, q):
    try:
        pt = refine_periodic(p, q, seed)
    except (NoConvergence, DegenerateDerivative):
        return
    o = orbit(p, pt.point, q)
    assert abs(o.points[-1] - pt.point) < 1e-11 * p.scale
    assert abs(o.derivative_product - pt.multiplier) <= 1e-10 * abs(pt.multiplier) + 1e-14
    assert q % pt.period == 0


@pytest.mark.parametrize("theta,d,want", [
    (Fraction(1, 4), 3, Fraction(3, 4)),
    (Fraction(3, 4), 3, Fraction(1, 4)),
    (Fraction(0), 5, Fraction(0)),
])
def test_angle_times_d(theta, d, want):
    assert angle_times_d(theta, d) == want


@pytest.mark.parametrize("theta,d,want", [
    (Fraction(0), 2, 1),
    (Fraction(1, 4), 3, 2),
    (Fraction(1, 2), 2, None),
    (Fraction(1, 7), 2, 3),
    (Fraction(1, 3), 2, 2),
])
def test_angle_period(theta, d, want):
    assert angle_period(theta, d) == want


def _brute_period(theta, d):
    x = theta
    for k in range(1, theta.denominator + 1):
        x = (x * d) % 1
        if x == theta:
            return k
    return None


@given(st.integers(1, 1000), st.integers(0, 999), st.integers(2, 6))
def test_angle_period_brute_force(den, num, d):
    theta = Fraction(num % den, den)
    q = angle_period(theta, d)
    assert q == _brute_period(theta, d)
    if q is not None:
        for t in angle_cycle(theta, d):
            assert angle_period(t, d) == q


def test_parse_angle():
    assert parse_angle("2/8") == Fraction(1, 4)
    assert parse_angle("5/4") == Fraction(1, 4)
    assert parse_angle("0") == 0


def test_taylor_of_iterate():
    # (z + z^2) o (z + z^2) = z + 2 z^2 + 2 z^3 + z^4
    s = taylor_of_iterate(poly(0, 1), 2, 0, 5)
    assert np.allclose(s, [0, 1, 2, 2, 1, 0])
    s = taylor_of_iterate(poly(0, 0), 1, 1, 3)
    assert np.allclose(s, [1, 2, 1, 0])
