"""Point clouds on the Riemann sphere, chordal metric and Hausdorff distance."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np
from scipy.spatial import cKDTree

INF = complex("inf")


def is_infinite(z) -> np.ndarray:
    z = np.asarray(z, dtype=complex)
    return ~np.isfinite(z.real) | ~np.isfinite(z.imag)


def chordal_pairs(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Elementwise chordal distance; infinite entries stand for the point at infinity."""
    a = np.asarray(a, dtype=complex)
    b = np.asarray(b, dtype=complex)
    a, b = np.broadcast_arrays(a, b)
    ia, ib = is_infinite(a), is_infinite(b)
    fa = np.where(ia, 0, a)
    fb = np.where(ib, 0, b)
    # hypot keeps sqrt(1 + |z|^2) finite for huge moduli
    ra = np.hypot(1.0, np.abs(fa))
    rb = np.hypot(1.0, np.abs(fb))
    with np.errstate(invalid="ignore"):
        both = 2 * np.abs(fa - fb) / ra / rb
    to_inf_a = 2 / rb  # a at infinity
    to_inf_b = 2 / ra
    out = np.where(ia & ib, 0.0, np.where(ia, to_inf_a, np.where(ib, to_inf_b, both)))
    return out


def chordal(z, w) -> float:
    """2|z - w| / sqrt((1 + |z|^2)(1 + |w|^2)) with the limits at infinity."""
    return float(chordal_pairs(np.array([z]), np.array([w]))[0])


def stereographic(z: np.ndarray) -> np.ndarray:
    """Points of the unit sphere; Euclidean distance there is the chordal distance."""
    z = np.asarray(z, dtype=complex)
    inf = is_infinite(z)
    fz = np.where(inf, 0, z)
    big = np.abs(fz) > 1
    # outside the unit disk work with u = 1/z to avoid overflow
    with np.errstate(divide="ignore", invalid="ignore"):
        u = np.where(big, 1 / np.where(big, fz, 1), fz)
    m = np.abs(u) ** 2
    n = 1 + m
    x = 2 * u.real / n
    y = np.where(big, -2 * u.imag / n, 2 * u.imag / n)
    h = np.where(big, (1 - m) / n, (m - 1) / n)
    out = np.stack([x, y, h], axis=-1)
    out[inf] = (0.0, 0.0, 1.0)
    return out


@dataclass
class SphereCloud:
    points: np.ndarray
    resolution: float

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=complex).ravel()
        if pts.size == 0:
            raise ValueError("a cloud needs at least one point")
        if not self.resolution > 0:
            raise ValueError("resolution must be positive")
        # one representative for infinity
        inf = is_infinite(pts)
        if inf.any():
            pts = np.concatenate([pts[~inf], [INF]])
        self.points = pts

    def __len__(self):
        return len(self.points)

    @property
    def finite(self) -> np.ndarray:
        return self.points[~is_infinite(self.points)]

    @property
    def has_infinity(self) -> bool:
        return bool(is_infinite(self.points).any())

    def to_json(self) -> dict:
        return {"resolution": self.resolution,
                "points": ["inf" if not np.isfinite(z) else [float(z.real), float(z.imag)]
                           for z in self.points]}

    @classmethod
    def from_json(cls, obj: dict) -> "SphereCloud":
        pts = [INF if p == "inf" else complex(p[0], p[1]) for p in obj["points"]]
        return cls(np.array(pts, dtype=complex), float(obj["resolution"]))


def directed_brute(a: np.ndarray, b: np.ndarray) -> float:
    """sup over a of the distance to b by the full double loop."""
    best = 0.0
    for z in a:
        best = max(best, float(np.min(chordal_pairs(np.full(len(b), z), b))))
    return best


def hausdorff_brute(A: SphereCloud, B: SphereCloud) -> float:
    return max(directed_brute(A.points, B.points), directed_brute(B.points, A.points))


def directed(a: np.ndarray, b: np.ndarray, tree: cKDTree | None = None) -> float:
    """sup_a inf_b chordal(a, b), exact.

    The tree on the sphere embedding proposes candidates; each candidate
    set is re-measured with the chordal formula itself, so the result is
    bit-identical to :func:`directed_brute`.
    """
    a = np.asarray(a, dtype=complex)
    b = np.asarray(b, dtype=complex)
    if tree is None:
        tree = cKDTree(stereographic(b))
    xa = stereographic(a)
    d0, _ = tree.query(xa, k=1)
    radii = d0 * (1 + 1e-7) + 1e-13
    best = 0.0
    for z, x, r in zip(a, xa, radii):
        idx = tree.query_ball_point(x, r)
        cand = b[idx] if idx else b
        best = max(best, float(np.min(chordal_pairs(np.full(len(cand), z), cand))))
    return best


def hausdorff_dist(A: SphereCloud, B: SphereCloud) -> float:
    return max(directed(A.points, B.points), directed(B.points, A.points))


def directed_dist(A: SphereCloud, B: SphereCloud) -> float:
    """sup_{a in A} inf_{b in B} chordal(a, b)."""
    return directed(A.points, B.points)


class CauchyResult(NamedTuple):
    converged: bool
    index: int | None
    tail_diameter: float
    consecutive: list


def cauchy_tail(seq: Sequence[SphereCloud], tol: float, min_tail: int = 2) -> CauchyResult:
    """Smallest k with d(seq_i, seq_j) < tol for all i, j >= k.

    The tail must keep at least ``min_tail`` clouds; otherwise the sequence
    is reported as not Cauchy with the diameter of its last half.
    """
    n = len(seq)
    if n < 3:
        raise ValueError("cauchy_tail needs at least three clouds")
    D = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            D[i, j] = D[j, i] = hausdorff_dist(seq[i], seq[j])
    consecutive = [float(D[i, i + 1]) for i in range(n - 1)]
    for k in range(n - min_tail + 1):
        if D[k:, k:].max() < tol:
            return CauchyResult(True, k, float(D[k:, k:].max()), consecutive)
    h = n // 2
    return CauchyResult(False, None, float(D[h:, h:].max()), consecutive)


def densify(path: Sequence[complex], spacing: float) -> np.ndarray:
    """Insert points along a polyline so consecutive chordal gaps stay below ``spacing``."""
    z = np.asarray(path, dtype=complex)
    if len(z) < 2:
        return z.copy()
    out = [z[:1]]
    for i in range(len(z) - 1):
        a, b = z[i], z[i + 1]
        # the chordal density 2/(1+|z|^2) peaks where the segment is nearest 0
        seg = b - a
        t0 = 0.0 if seg == 0 else min(1.0, max(0.0, -(a.conjugate() * seg).real / abs(seg) ** 2))
        near = abs(a + t0 * seg)
        bound = 2 * abs(seg) / (1 + near ** 2)
        n = max(1, int(math.ceil(bound / spacing)))
        t = np.arange(1, n + 1) / n
        out.append(z[i] + t * (z[i + 1] - z[i]))
    return np.concatenate(out)
