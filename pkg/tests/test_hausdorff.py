import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from raylimit.hausdorff import (
    INF,
    SphereCloud,
    cauchy_tail,
    chordal,
    chordal_pairs,
    densify,
    directed_dist,
    hausdorff_brute,
    hausdorff_dist,
    stereographic,
)

finite = st.complex_numbers(max_magnitude=1e6, allow_nan=False, allow_infinity=False)
point = st.one_of(finite, finite, finite, st.just(INF))


@pytest.mark.parametrize("z,w,want", [
    (0, INF, 2.0),
    (1 + 1j, 1 + 1j, 0.0),
    (1, -1, 2.0),
    (INF, INF, 0.0),
    (1, INF, math.sqrt(2)),
])
def test_chordal_examples(z, w, want):
    assert abs(chordal(z, w) - want) < 1e-15


@given(point, point)
def test_chordal_matches_sphere_embedding(z, w):
    x, y = stereographic(np.array([z, w]))
    assert abs(np.linalg.norm(x - y) - chordal(z, w)) < 1e-12
    assert 0 <= chordal(z, w) <= 2


def cloud(pts, res=1e-3):
    return SphereCloud(np.array(pts, dtype=complex), res)


def test_hausdorff_examples():
    A = cloud([0, 1j, INF])
    assert hausdorff_dist(A, A) == 0
    assert abs(hausdorff_dist(cloud([0]), cloud([0, 1])) - math.sqrt(2)) < 1e-15
    assert hausdorff_dist(cloud([2]), cloud([3j])) == chordal(2, 3j)


def test_directed_is_one_sided():
    assert directed_dist(cloud([0]), cloud([0, 1])) == 0
    assert directed_dist(cloud([0, 1]), cloud([0])) == chordal(0, 1)


def test_cloud_validation():
    with pytest.raises(ValueError):
        SphereCloud(np.array([], dtype=complex), 1e-3)
    with pytest.raises(ValueError):
        SphereCloud(np.array([0j]), 0)


def test_cloud_json_roundtrip():
    A = cloud([0, 1 - 2j, INF])
    B = SphereCloud.from_json(A.to_json())
    assert hausdorff_dist(A, B) == 0 and B.has_infinity


def _random_cloud(rng, n):
    kind = rng.integers(3)
    if kind == 0:
        pts = rng.normal(size=n) + 1j * rng.normal(size=n)
    elif kind == 1:
        pts = np.exp(rng.normal(scale=4, size=n)) * np.exp(2j * np.pi * rng.random(n))
    else:
        pts = np.round(rng.normal(size=n) * 4) / 4 + 1j * np.round(rng.normal(size=n) * 4) / 4
    if rng.random() < 0.3:
        pts = np.concatenate([pts, [INF]])
    return SphereCloud(pts, 1e-3)


def test_kdtree_equals_brute_force_exactly():
    rng = np.random.default_rng(2024)
    for _ in range(100):
        A = _random_cloud(rng, int(rng.integers(1, 500)))
        B = _random_cloud(rng, int(rng.integers(1, 500)))
        assert hausdorff_dist(A, B) == hausdorff_brute(A, B)


@given(st.lists(point, min_size=1, max_size=30), st.lists(point, min_size=1, max_size=30),
       st.lists(point, min_size=1, max_size=30))
def test_metric_axioms(a, b, c):
    A, B, C = cloud(a), cloud(b), cloud(c)
    ab = hausdorff_dist(A, B)
    assert ab == hausdorff_dist(B, A)
    assert ab <= hausdorff_dist(A, C) + hausdorff_dist(C, B) + 1e-12
    same = set(np.round(A.points, 300).tolist()) == set(np.round(B.points, 300).tolist())
    assert (ab == 0) == same


def test_triangle_inequality_large_clouds():
    rng = np.random.default_rng(5)
    for _ in range(10):
        A, B, C = (_random_cloud(rng, 500) for _ in range(3))
        assert hausdorff_dist(A, B) <= hausdorff_dist(A, C) + hausdorff_dist(C, B) + 1e-12


def test_cauchy_tail_examples():
    const = [cloud([1j, 2])] * 4
    res = cauchy_tail(const, 0.1)
    assert res.converged and res.index == 0
    alt = [cloud([0]), cloud([1])] * 3
    res = cauchy_tail(alt, 0.1)
    assert not res.converged and abs(res.tail_diameter - math.sqrt(2)) < 1e-15
    seq = [cloud([1 / n]) for n in range(1, 30)]
    res = cauchy_tail(seq, 0.01)
    k = res.index
    assert res.converged
    assert all(chordal(1 / i, 1 / j) < 0.01 for i in range(k + 1, 30) for j in range(k + 1, 30))
    assert max(chordal(1 / k, 1 / j) for j in range(k + 1, 30)) >= 0.01


def test_cauchy_tail_needs_three():
    with pytest.raises(ValueError):
        cauchy_tail([cloud([0]), cloud([0])], 0.1)


def test_densify_spacing():
    path = [0, 1, 1 + 1j, 5]
    out = densify(path, 0.01)
    assert np.all(chordal_pairs(out[:-1], out[1:]) <= 0.01 + 1e-15)
    assert out[0] == 0 and out[-1] == 5
