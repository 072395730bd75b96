import cmath
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from raylimit.family import horocycle, q_map
from raylimit.invariants import multiplier
from raylimit.maxwild import (
    attracting_pair_multiplier,
    build_maxwild,
    h_sums,
    hawaiian_family,
    perturb_and_verify,
    q_derivative_at,
    q_fixed_multiplier,
    spacing_points,
)
from raylimit.polynomial import evaluate, fixed_points


def exact_resit(res, j):
    """1 - g'/(C g^2) with g = z R^2 and Q = (z - x_j) R, in rationals."""
    x, H = res.x, res.H
    return 1 - (1 + 2 * x[j] * H[j]) / (res.C_exact * x[j] ** 2 * q_derivative_at(x, j) ** 2)


@pytest.mark.parametrize("N", [1, 2, 3, 4])
def test_inequalities_exact(N):
    x = spacing_points(N)
    assert all(isinstance(v, int) for v in x)
    H = h_sums(x)
    assert all(isinstance(h, Fraction) for h in H)
    for xj, hj in zip(x, H):
        assert 1 + 2 * xj * hj > 0


def test_spacing_recursion():
    assert spacing_points(4) == [1, 5, 13, 29]


def test_n1_values():
    res = build_maxwild(1)
    assert res.x == [1] and res.H == [0]
    assert res.C == 0.5
    assert abs(res.resit_values[0] - (-1)) < 1e-9
    assert res.gamma == pytest.approx(math.sqrt(2))


def test_n2_values():
    res = build_maxwild(2)
    assert res.x == [1, 5]
    assert res.H == [Fraction(-1, 4), Fraction(1, 4)]
    assert [1 + 2 * x * h for x, h in zip(res.x, res.H)] == [Fraction(1, 2), Fraction(7, 2)]


@pytest.mark.parametrize("N", [1, 2, 3, 4])
def test_resit_routes(N):
    res = build_maxwild(N)
    # build order follows x_j; w lists them in descending order
    roots = np.array(res.x, dtype=float) / res.gamma
    for j in range(N):
        want = float(exact_resit(res, j))
        got = res.resit_values[j]
        assert got.real < 0
        assert abs(got - res.resit_normal_form[j]) < 1e-8
        assert abs(got - want) < 1e-8 * max(1, abs(want))
    assert abs(roots.max() - res.w[0]) < 1e-12


@pytest.mark.parametrize("N", [1, 2, 3, 4])
def test_monic_conjugation(N):
    res = build_maxwild(N)
    P = res.P_monic
    assert P.degree == 2 * N + 1
    assert P.is_real
    # gamma^{-1} P_raw(gamma z): leading coefficient C gamma^{2N} must be 1
    lead = res.P_raw[-1] * res.gamma ** (2 * N)
    assert abs(lead - 1) < 1e-12
    assert abs(P(0)) < 1e-15
    assert evaluate(P, 0, 1).real > 1


@pytest.mark.parametrize("N", [1, 2, 3, 4])
def test_fixed_point_census(N):
    res = build_maxwild(N)
    fps = fixed_points(res.P_monic)
    assert sum(m for _, m in fps) == 2 * N + 1
    double = sorted(z.real for z, m in fps if m == 2)
    simple = [z for z, m in fps if m == 1]
    assert len(double) == N and len(simple) == 1
    assert abs(simple[0]) < 1e-12
    assert np.allclose(double, sorted(res.w[:-1]), atol=1e-7)
    for w in res.w[:-1]:
        assert abs(multiplier(res.P_monic, 1, w) - 1) < 1e-9


def test_rejects_bad_arguments():
    with pytest.raises(ValueError):
        build_maxwild(0)
    with pytest.raises(ValueError):
        build_maxwild(1, safety=1.5)
    with pytest.raises(ValueError):
        perturb_and_verify(build_maxwild(1), 0.0)


@pytest.mark.parametrize("N", [1, 2])
def test_perturbation_end_to_end(N):
    res = build_maxwild(N)
    rep = perturb_and_verify(res, 1e-3)
    assert len(rep.pairs) == N
    for top, bot, lam in rep.pairs:
        assert abs(lam) < 1 and top.imag > 0 and bot == top.conjugate()
    assert rep.w_N.real < 0 and abs(rep.w_N.imag) < 1e-12
    assert rep.w_N_multiplier.real > 1
    assert rep.max_imag < 1e-9
    assert rep.terminal_gap < 1e-3
    assert rep.segment_distance < 4e-3
    assert rep.ok
    obj = rep.to_json()
    assert obj["ok"] and len(obj["pairs"]) == N


# -- Hawaiian earring families ----------------------------------------------------

def test_quadratic_q_family_is_the_pert_family():
    fq, fp = hawaiian_family(2, 0.25, [4, 8, 16])
    for lam, m in zip(fq.params, fq.members):
        assert np.allclose(m.full, [0, lam, 1])
    assert np.allclose(fq.limit.full, [0, 1, 1])
    assert np.allclose(fp.limit.full, [0, 1, 1])


@pytest.mark.parametrize("d", [2, 3, 4])
def test_horocycle_circle(d):
    a = 0.5 / (d - 1) * 0.9
    lams = horocycle(a, [1, 5, 25, 125])
    for lam in lams:
        assert abs(abs(lam - (1 + a)) - a) < 1e-12
    dist = [abs(lam - 1) for lam in lams]
    assert all(b < c for b, c in zip(dist[1:], dist))


@pytest.mark.parametrize("d", [3, 4, 5])
def test_critical_point_maps_to_zero(d):
    fq, _ = hawaiian_family(d, 0.2 / (d - 1), [3, 7])
    for lam, Q in zip(fq.params, fq.members):
        assert abs(evaluate(Q, -lam)) < 1e-12
        assert abs(evaluate(Q, -lam, 1)) < 1e-12


@pytest.mark.parametrize("d", [2, 3, 4, 5])
def test_semi_conjugacy(rng, d):
    fq, fp = hawaiian_family(d, 0.2 / (d - 1), [2, 9])
    z = rng.normal(size=100) + 1j * rng.normal(size=100)
    for Q, P in zip(fq.members, fp.members):
        lhs = evaluate(P, z) ** (d - 1)
        rhs = evaluate(Q, z ** (d - 1))
        assert np.max(np.abs(lhs - rhs) / (1 + np.abs(lhs))) < 1e-12


def test_q_multiplier_example():
    assert abs(q_fixed_multiplier(1.1, 3) - 0.8) < 1e-12
    assert abs(q_fixed_multiplier(1.0, 3) - 1) < 1e-12


@given(st.complex_numbers(max_magnitude=0.6, allow_nan=False, allow_infinity=False),
       st.integers(2, 5))
def test_q_multiplier_formula(delta, d):
    lam = 1 + delta
    if abs(delta) < 1e-3:
        return
    got = attracting_pair_multiplier(q_map(lam, d), 1 - lam)
    assert abs(got - (d - (d - 1) * lam)) < 1e-9
    assert (abs(got) < 1) == (abs(lam - d / (d - 1)) < 1 / (d - 1))


def test_hawaiian_rejects_bad_radius():
    with pytest.raises(ValueError):
        hawaiian_family(3, 0.6, [1])
