import cmath
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from numpy.polynomial import polynomial as npp

from raylimit.errors import EnclosureAmbiguous, IrrationalIndifferent, NotInPetal, PoleOnContour, TooCoarse
from raylimit.invariants import (
    classify_point,
    contour_index,
    degeneracy_order,
    fatou_coordinate,
    fit_log_coefficient,
    index,
    laurent_index,
    multiplicity,
    multiplier,
    normal_form,
    pre_fatou,
    resit,
    splitting_sum,
    tangent_oscillation,
)
from raylimit.polynomial import MonicPoly, fixed_points, iterate, monic_conjugate

from conftest import poly


def cubic_b(b):
    """Monic conjugate of z + z^2 + b z^3 and the image of the fixed point 0."""
    if b == 0:
        return poly(0, 1), 0j
    p, _ = monic_conjugate([0, 1, 1, b])
    return p, 0j


@pytest.mark.parametrize("p,z0,radius,want", [
    (poly(0, 0), 1, 0.3, -1),
    (poly(0, 1), 0, 0.3, 0),
    (monic_conjugate([0, 1, 1, 2])[0], 0, 0.2, 2),
    (poly(0, 1, 0), 0, 0.4, 0),
])
def test_contour_index_examples(p, z0, radius, want):
    res = contour_index(p, 1, z0, radius)
    assert abs(res.value - want) < 1e-12
    assert res.error < 1e-12


def test_contour_index_rejects_bad_radius():
    with pytest.raises(EnclosureAmbiguous):
        contour_index(poly(0, 0), 1, 1, 1.5)  # encloses 0 as well
    with pytest.raises(PoleOnContour):
        contour_index(poly(0, 0), 1, 1, 1.0, check=False)


@pytest.mark.parametrize("b", [0, 1, -2 + 1j, 2])
def test_index_equals_cubic_coefficient(b):
    p, z0 = cubic_b(b)
    assert abs(index(p, 1, z0) - b) < 1e-10
    assert abs(laurent_index(p, 1, z0) - b) < 1e-10


def test_index_closed_form_and_degenerate():
    assert abs(index(poly(0, 0), 1, 1) + 1) < 1e-15
    assert abs(index(poly(0, 1, 0), 1, 0)) < 1e-12


@pytest.mark.parametrize("p,z0,want", [
    (poly(0, 0), 1, 1.5),
    (poly(0, 1), 0, 1.0),
    (poly(0, 1, 0), 0, 1.5),
])
def test_resit_examples(p, z0, want):
    assert abs(resit(p, 1, z0) - want) < 1e-10


def test_resit_maxwild_single():
    # z + 0.5 z (z - 1)^2 at its double fixed point 1
    p, g = monic_conjugate([0, 1.5, -1, 0.5])
    assert abs(resit(p, 1, 1 / g) + 1) < 1e-9


@pytest.mark.parametrize("p,z0,m,a,b", [
    (poly(0, 1), 0, 2, 1, 0),
    (poly(0, 1, 0), 0, 3, 1, 0),
    # z + 2 z^2 + z^3 is the monic conjugate of z + z^2 + z^3 / 4
    (poly(0, 1, 2), 0, 2, 2, 1),
])
def test_normal_form(p, z0, m, a, b):
    nf = normal_form(p, 1, z0)
    assert nf.m == m
    assert abs(nf.a - a) < 1e-12 and abs(nf.b - b) < 1e-10


@pytest.mark.parametrize("b", [0, 1, -2 + 1j])
def test_resit_routes_agree(b):
    p, z0 = cubic_b(b)
    nf = normal_form(p, 1, z0)
    assert abs(resit(p, 1, z0) - nf.resit) < 1e-8
    assert abs(resit(p, 1, z0) - (2 / 2 - b)) < 1e-8


@pytest.mark.parametrize("p,z0,nu", [
    (poly(0, 1, 0), 0, 2),
    (poly(0, -1, 0), 0, 1),
    (poly(0, 0), 1, 0),
    (poly(0, -1), 0, 1),
])
def test_degeneracy_order(p, z0, nu):
    assert degeneracy_order(p, z0, 1) == nu


def test_degeneracy_order_irrational():
    lam = cmath.exp(2j * math.pi * (math.sqrt(5) - 1) / 2)
    with pytest.raises(IrrationalIndifferent):
        degeneracy_order(poly(0, lam), 0, 1)


def test_classify_point_kinds():
    assert classify_point(poly(0, 0), 1, 1).kind == "repelling"
    assert classify_point(poly(0, 0), 0, 1).kind == "attracting"
    rec = classify_point(poly(0, 1), 0, 1)
    assert (rec.kind, rec.multiplicity, rec.degeneracy) == ("parabolic", 2, 1)
    assert abs(rec.resit - 1) < 1e-10
    rec = classify_point(poly(0, -1, 0), 0, 1)
    assert (rec.rotation_order, rec.multiplicity, rec.degeneracy) == (2, 3, 1)


def _random_simple_points(n, seed=7):
    rng = np.random.default_rng(seed)
    out = []
    while len(out) < n:
        d = int(rng.integers(2, 5))
        p = MonicPoly.from_coeffs(rng.normal(size=d) + 1j * rng.normal(size=d))
        fps = fixed_points(p)
        for z, m in fps:
            lam = multiplier(p, 1, z)
            gap = min([abs(w - z) for w, _ in fps if w != z] or [1.0])
            if m == 1 and abs(lam - 1) > 0.1 and gap > 1e-2:
                out.append((p, z, lam, min(0.5, gap / 2)))
    return out[:n]


@pytest.mark.parametrize("p,z,lam,radius", _random_simple_points(20))
def test_contour_matches_closed_form(p, z, lam, radius):
    assert abs(contour_index(p, 1, z, radius).value - 1 / (1 - lam)) < 1e-8


def _affine_conjugate(p, alpha, beta):
    # A P A^{-1} with A(z) = alpha z + beta, as full coefficients
    inv = np.array([-beta / alpha, 1 / alpha])
    acc = np.array([0j])
    for c in p.full[::-1]:
        acc = npp.polyadd(npp.polymul(acc, inv), [c])
    return npp.polyadd(alpha * acc, [beta])


@given(st.sampled_from([0, 1, -2 + 1j]),
       st.complex_numbers(min_magnitude=0.3, max_magnitude=3, allow_nan=False, allow_infinity=False),
       st.complex_numbers(max_magnitude=2, allow_nan=False, allow_infinity=False))
def test_resit_affine_invariance(b, alpha, beta):
    p, z0 = cubic_b(b)
    conj = _affine_conjugate(p, alpha, beta)
    q, g = monic_conjugate(conj)
    w0 = (alpha * z0 + beta) / g
    assert abs(resit(q, 1, w0) - resit(p, 1, z0)) < 1e-7


def test_splitting_quadratic_exact():
    sums = splitting_sum(lambda e: poly(e, 1), 0, 1, [1e-2, 1e-4, 0.0])
    for _, s in sums:
        assert abs(s - 1) < 1e-9


@pytest.mark.parametrize("base", [(0, 1, 0), (0, 1, 1)])
def test_splitting_converges(base):
    def member(e):
        return poly(base[0] + e, *base[1:])

    sched = [10.0 ** -k for k in range(2, 7)]
    target = resit(member(0.0), 1, 0)
    errs = [abs(s - target) for _, s in splitting_sum(member, 0, 1, sched)]
    for prev, cur in zip(errs, errs[1:]):
        assert cur <= max(prev, 1e-9)
    assert errs[-1] < 1e-3


def test_splitting_cubic_limit():
    sums = splitting_sum(lambda e: poly(e, 1, 0), 0, 1, [1e-5])
    assert abs(sums[0][1] - 1.5) < 0.05


@pytest.mark.parametrize("z,r,want", [(1, 1, -1), (1j, 2, 0.5), (0.1, 1, -10)])
def test_pre_fatou(z, r, want):
    assert abs(pre_fatou(z, 0, r) - want) < 1e-12


def test_fatou_abel_equation():
    p = poly(0, 1)
    pts = [-0.1 + 0.02j * k for k in range(-5, 5)]
    for z in pts:
        res = fatou_coordinate(p, 1, 0, z)
        assert res.residual < 1e-6
        assert res.resit == 1
    # independent evaluations with a shared anchor
    for z in pts:
        fz = complex(iterate(p, z, 1)[0])
        a = fatou_coordinate(p, 1, 0, z, z_ref=-0.1).value
        b = fatou_coordinate(p, 1, 0, fz, z_ref=-0.1).value
        assert abs(b - a - 1) < 2e-3


def test_fatou_log_coefficient():
    assert fatou_coordinate(poly(0, 1, 0), 1, 0, -0.1j).resit == 1.5
    # the orbit itself says the log term carries resit / r
    assert abs(fit_log_coefficient(poly(0, 1, 0), 1, 0, -0.1j) - 0.75) < 1e-3
    assert abs(fit_log_coefficient(poly(0, 1), 1, 0, -0.1) - 1.0) < 1e-3


def test_fatou_not_in_petal():
    with pytest.raises(NotInPetal):
        fatou_coordinate(poly(0, 1), 1, 0, 0.1, n_max=500)


def test_tangent_oscillation_examples():
    seg = np.linspace(0, 1 + 1j, 50)
    assert tangent_oscillation(seg) < 1e-12
    phi = 1.3
    arc = np.exp(1j * np.linspace(0, phi, 2001))
    assert abs(tangent_oscillation(arc) - phi) < 2e-3
    t = np.linspace(20, 200, 200001)
    s = -1 / t
    curve = 1 / (1 / s + 1j * np.sin(2 * np.pi / s))
    want = 2 * math.atan(2 * math.pi)
    assert abs(tangent_oscillation(curve) - want) < 0.05 * want


def test_tangent_oscillation_window():
    arc = np.exp(1j * np.linspace(0, 3, 3001))
    assert abs(tangent_oscillation(arc, window=1.0) - 1.0) < 5e-3


def test_tangent_oscillation_too_coarse():
    with pytest.raises(TooCoarse):
        tangent_oscillation([0, 1, 1 + 1j, 1j, 0])
