"""Local invariants at fixed and periodic points.

Multiplier, multiplicity, holomorphic index, résidu itératif, degeneracy
order, the splitting check, pre-Fatou and Fatou coordinates and a tangent
oscillation measure for sampled curves.
"""
from __future__ import annotations

import cmath
import math
from collections import deque
from dataclasses import dataclass
from typing import Callable, NamedTuple, Sequence

import numpy as np

from .errors import (
    ClusterMiscount,
    DegenerateLeading,
    EnclosureAmbiguous,
    IrrationalIndifferent,
    NotInPetal,
    PoleOnContour,
    RangeGuard,
    TooCoarse,
)
from .polynomial import (
    MonicPoly,
    check_range,
    compose_expanded,
    aberth,
    cluster_roots,
    fixed_points,
    iterate,
    taylor_of_iterate,
)

PARABOLIC_TOL = 1e-6  # |lambda^k - 1| for root-of-unity detection
MAX_ROOT_ORDER = 24
CLOSED_FORM_GAP = 1e-4  # |lambda - 1| above this uses 1/(1 - lambda)
TAYLOR_RTOL = 1e-7


@dataclass(frozen=True)
class NormalForm:
    m: int
    a: complex
    b: complex

    @property
    def resit(self) -> complex:
        return self.m / 2 - self.b / self.a ** 2


@dataclass(frozen=True)
class FixedPointRecord:
    location: complex
    period: int
    multiplier: complex
    multiplicity: int
    index: complex
    resit: complex
    degeneracy: int
    kind: str  # attracting, repelling, parabolic, irrationally-indifferent
    rotation_order: int = 0  # k for parabolic points, else 0

    def to_json(self) -> dict:
        out = {
            "z": [self.location.real, self.location.imag],
            "period": self.period,
            "multiplier": [self.multiplier.real, self.multiplier.imag],
            "multiplicity": self.multiplicity,
            "index": [self.index.real, self.index.imag],
            "resit": [self.resit.real, self.resit.imag],
            "nu": self.degeneracy,
            "class": self.kind,
        }
        if self.kind == "parabolic":
            out["rotation_order"] = self.rotation_order
        return out


class ContourResult(NamedTuple):
    value: complex
    error: float


# ---------------------------------------------------------------------------
# helpers


def multiplier(p: MonicPoly, q: int, z0: complex) -> complex:
    return complex(iterate(p, complex(z0), q)[1])


def root_of_unity_order(lam: complex, kmax: int = MAX_ROOT_ORDER, tol: float = PARABOLIC_TOL):
    """Least k <= kmax with |lam^k - 1| < tol, else None."""
    for k in range(1, kmax + 1):
        if abs(lam ** k - 1) < tol:
            return k
    return None


def displacement_series(p: MonicPoly, q: int, z0: complex, order: int) -> np.ndarray:
    """Taylor coefficients of h -> P^q(z0 + h) - (z0 + h)."""
    s = taylor_of_iterate(p, q, complex(z0), order)
    s[0] -= z0
    if order >= 1:
        s[1] -= 1
    return s


def _leading_order(c: np.ndarray, rtol: float = TAYLOR_RTOL) -> int:
    """Index of the first coefficient that is non-negligible.

    Coefficients are compared after rescaling h by the radius estimate
    1 / max_j |c_j|^{1/j}, so that the test does not depend on units.
    """
    mags = np.abs(c)
    roots = [mags[j] ** (1.0 / j) for j in range(1, len(c)) if mags[j] > 0]
    if not roots:
        raise DegenerateLeading("displacement vanishes to the computed order")
    rho = 1.0 / max(roots)
    normed = mags * rho ** np.arange(len(c))
    ref = normed[1:].max()
    for j in range(len(c)):
        if normed[j] > rtol * ref:
            return j
    raise DegenerateLeading("displacement vanishes to the computed order")


def multiplicity(p: MonicPoly, q: int, z0: complex, max_order: int | None = None) -> int:
    """Vanishing order of P^q(z) - z at z0 from its Taylor series."""
    check_range(p, q)
    if max_order is None:
        # multiplicity of a fixed point of P^q is at most d^q
        max_order = p.degree ** q if q * math.log(p.degree) < math.log(64) else 64
    c = displacement_series(p, q, z0, max_order + 1)
    m = _leading_order(c)
    return max(m, 1)


def _invert_series(g: np.ndarray, order: int) -> np.ndarray:
    """Coefficients of 1/g up to h^order (g[0] != 0)."""
    out = np.zeros(order + 1, dtype=complex)
    out[0] = 1 / g[0]
    for n in range(1, order + 1):
        acc = 0j
        for k in range(1, min(n, len(g) - 1) + 1):
            acc += g[k] * out[n - k]
        out[n] = -acc / g[0]
    return out


def laurent_index(p: MonicPoly, q: int, z0: complex, m: int | None = None) -> complex:
    """Residue of dz/(z - P^q(z)) at z0 from the Taylor expansion.

    With z - P^q(z) = -h^m g(h) the residue is -[h^{m-1}] (1/g).
    """
    if m is None:
        m = multiplicity(p, q, z0)
    c = displacement_series(p, q, z0, 2 * m)
    g = c[m:]
    if abs(g[0]) < 1e-10:
        raise DegenerateLeading(f"leading coefficient {abs(g[0]):.3g} is negligible")
    return complex(-_invert_series(g, m - 1)[m - 1])


# ---------------------------------------------------------------------------
# index and résidu itératif


def _trapezoid(p: MonicPoly, q: int, z0: complex, radius: float, nodes: int, weight=None):
    t = 2 * np.pi * np.arange(nodes) / nodes
    dz = radius * np.exp(1j * t)
    z = z0 + dz
    fz, dfz = iterate(p, z, q)
    denom = z - fz
    with np.errstate(divide="ignore", invalid="ignore"):
        integrand = (1 if weight is None else weight(dfz)) / denom
    if not np.all(np.isfinite(integrand)) or np.max(np.abs(integrand)) > 1e12:
        raise PoleOnContour(f"integrand exceeds 1e12 on |z - z0| = {radius:g}")
    # fixed order sum keeps the result deterministic
    return complex(math.fsum((integrand * dz).real) / nodes + 1j * math.fsum((integrand * dz).imag) / nodes)


def count_fixed_inside(p: MonicPoly, q: int, z0: complex, radius: float, nodes: int = 1024) -> int:
    """Argument-principle count of zeros of z - P^q(z) in |z - z0| < radius."""
    val = _trapezoid(p, q, z0, radius, nodes, weight=lambda d: 1 - d)
    return int(round(val.real))


def _check_enclosure(p: MonicPoly, q: int, z0: complex, radius: float) -> None:
    if q == 1:
        fps = fixed_points(p)
        dists = sorted((abs(z - z0), m) for z, m in fps)
        inside = [t for t in dists if t[0] < radius]
        if len(inside) != 1:
            raise EnclosureAmbiguous(
                f"{len(inside)} distinct fixed points inside radius {radius:g}")
        if any(abs(dist - radius) < 1e-6 * radius for dist, _ in dists):
            raise EnclosureAmbiguous("a fixed point lies on the contour")
        return
    m = multiplicity(p, q, z0)
    n = count_fixed_inside(p, q, z0, radius)
    if n != m:
        raise EnclosureAmbiguous(f"contour encloses {n} fixed points, expected {m}")


def contour_index(p: MonicPoly, q: int, z0: complex, radius: float, check: bool = True) -> ContourResult:
    """(1/2 pi i) times the contour integral of dz/(z - P^q(z)) around z0.

    Trapezoid sums at 256, 512 and 1024 nodes are combined by Richardson
    extrapolation; the error estimate is the last increment.
    """
    if radius <= 0:
        raise ValueError("radius must be positive")
    if check:
        _check_enclosure(p, q, complex(z0), radius)
    vals = [_trapezoid(p, q, complex(z0), radius, n) for n in (256, 512, 1024)]
    err = abs(vals[2] - vals[1])
    extrap = vals[2] + (vals[2] - vals[1]) / 3
    return ContourResult(extrap, err)


def isolating_radius(p: MonicPoly, q: int, z0: complex) -> float:
    """Half the distance to the nearest other fixed point, clamped to [1e-4, 0.5]."""
    z0 = complex(z0)
    if q == 1:
        others = [abs(z - z0) for z, _ in fixed_points(p) if abs(z - z0) > 1e-6 * p.scale]
        r = 0.5 * min(others) if others else 0.5
        return min(max(r, 1e-4), 0.5)
    m = multiplicity(p, q, z0)
    r = 0.5
    while r > 1e-4:
        try:
            if count_fixed_inside(p, q, z0, r) == m:
                return max(r / 2, 1e-4)
        except PoleOnContour:
            pass
        r /= 2
    return 1e-4


def index(p: MonicPoly, q: int, z0: complex) -> complex:
    """Holomorphic index of P^q at the fixed point z0."""
    lam = multiplier(p, q, z0)
    if abs(lam - 1) > CLOSED_FORM_GAP:
        return 1 / (1 - lam)
    return contour_index(p, q, z0, isolating_radius(p, q, z0)).value


def resit(p: MonicPoly, q: int, z0: complex) -> complex:
    """Résidu itératif m/2 - index of P^q at z0."""
    lam = multiplier(p, q, z0)
    if abs(lam - 1) > CLOSED_FORM_GAP:
        return 0.5 - 1 / (1 - lam)
    m = multiplicity(p, q, z0)
    return m / 2 - index(p, q, z0)


def normal_form(p: MonicPoly, q: int, z0: complex) -> NormalForm:
    """m, the raw leading coefficient a, and b = index * a^2.

    The index here comes from the Laurent expansion; :func:`resit` uses the
    contour route, so the two provide independent checks of each other.
    """
    lam = multiplier(p, q, z0)
    if abs(lam - 1) > PARABOLIC_TOL:
        raise DegenerateLeading(f"multiplier {lam} is not 1")
    m = multiplicity(p, q, z0)
    if m < 2:
        raise DegenerateLeading("multiplier 1 but simple fixed point")
    c = displacement_series(p, q, z0, 2 * m)
    a = complex(c[m])
    if abs(a) < 1e-10:
        raise DegenerateLeading(f"leading coefficient {abs(a):.3g} is negligible")
    iota = laurent_index(p, q, z0, m)
    return NormalForm(m, a, iota * a * a)


def degeneracy_order(p: MonicPoly, z0: complex, period: int) -> int:
    """nu = (m - 1)/k at a parabolic point; 0 off the unit circle."""
    lam = multiplier(p, period, z0)
    k = root_of_unity_order(lam)
    if k is None:
        if abs(abs(lam) - 1) < PARABOLIC_TOL:
            raise IrrationalIndifferent(f"multiplier {lam} has no root-of-unity order <= 24")
        return 0
    if period * k * math.log(p.degree) > 64 * math.log(2):
        raise RangeGuard(f"period {period} times order {k} exceeds the dynamic range budget")
    # multiplicity of z0 for P^{period k} is nu k + 1 with nu <= d - 1
    m = multiplicity(p, period * k, z0, max_order=(p.degree - 1) * k + 2)
    if (m - 1) % k:
        raise DegenerateLeading(f"multiplicity {m} is not 1 mod {k}")
    return (m - 1) // k


def classify_point(p: MonicPoly, z0: complex, period: int) -> FixedPointRecord:
    """Full record for a point of exact period ``period``."""
    z0 = complex(z0)
    lam = multiplier(p, period, z0)
    k = root_of_unity_order(lam)
    if k is not None:
        nu = degeneracy_order(p, z0, period)
        if k == 1:
            m = multiplicity(p, period, z0)
            iota = contour_index(p, period, z0, isolating_radius(p, period, z0)).value
        else:
            m = nu * k + 1
            iota = 1 / (1 - lam)
        res = (m / 2 - iota) if k == 1 else 0.5 - iota
        return FixedPointRecord(z0, period, lam, m, iota, res, nu, "parabolic", k)
    if abs(abs(lam) - 1) < PARABOLIC_TOL:
        iota = 1 / (1 - lam)
        return FixedPointRecord(z0, period, lam, 1, iota, 0.5 - iota, 0, "irrationally-indifferent")
    iota = 1 / (1 - lam)
    kind = "attracting" if abs(lam) < 1 else "repelling"
    return FixedPointRecord(z0, period, lam, 1, iota, 0.5 - iota, 0, kind)


# ---------------------------------------------------------------------------
# splitting


def periodic_points_near(p: MonicPoly, q: int, z0: complex, radius: float) -> list:
    """Roots of P^q(z) - z within ``radius`` of z0 with multiplicities.

    Uses the explicit composition, so it is limited to d^q <= 256.
    """
    if q == 1:
        roots = fixed_points(p)
    else:
        full = compose_expanded(p, q)
        full[1] -= 1
        roots = cluster_roots(full, aberth(full), 1 + float(np.max(np.abs(full[:-1]))))
    return [(z, m) for z, m in roots if abs(z - z0) < radius]


def splitting_sum(member: Callable[[float], MonicPoly], z0: complex, q: int,
                  eps_schedule: Sequence[float]) -> list:
    """Sum of résidus itératifs of the fixed points that split off z0.

    ``member(eps)`` returns the perturbed polynomial (eps = 0 is the limit).
    The disk is half the distance from z0 to the other fixed points of the
    limit; if it does not catch exactly m points it is doubled once.
    """
    p0 = member(0.0)
    z0 = complex(z0)
    m = multiplicity(p0, q, z0)
    radius = isolating_radius(p0, q, z0)
    out = []
    for eps in eps_schedule:
        p = member(eps)
        for r in (radius, 2 * radius):
            pts = periodic_points_near(p, q, z0, r)
            if sum(k for _, k in pts) == m:
                break
        else:
            raise ClusterMiscount(
                f"found {sum(k for _, k in pts)} fixed points near {z0} for eps={eps}, expected {m}")
        total = 0j
        for z, k in pts:
            total += resit(p, q, z) if k > 1 else 0.5 - 1 / (1 - multiplier(p, q, z))
        out.append((float(eps), total))
    return out


# ---------------------------------------------------------------------------
# Fatou coordinates


def pre_fatou(z: complex, z0: complex, r: int, a: complex = 1.0) -> complex:
    """w = -1/(r a (z - z0)^r); a = 1 gives the plain pre-Fatou map."""
    if r < 1:
        raise ValueError("r must be >= 1")
    h = complex(z) - complex(z0)
    if h == 0:
        raise ValueError("z must differ from z0")
    return -1 / (r * a * h ** r)


class FatouResult(NamedTuple):
    value: complex
    steps: int
    residual: float
    resit: complex  # the log-correction constant (r+1)/2 - b/a^2
    log_coefficient: complex  # resit / r, the coefficient actually used


def _fatou_raw(p, q, z0, z, nf, threshold, n_max):
    r = nf.m - 1
    coef = nf.resit / r
    w = pre_fatou(z, z0, r, nf.a)
    cur = complex(z)
    n = 0
    while abs(w) < threshold:
        if n >= n_max:
            raise NotInPetal(f"orbit of {z} did not reach the petal depth within {n_max} steps")
        cur = complex(iterate(p, cur, q)[0])
        n += 1
        if not math.isfinite(abs(cur)) or cur == z0:
            raise NotInPetal(f"orbit of {z} left the petal")
        w = pre_fatou(cur, z0, r, nf.a)
    nxt = complex(iterate(p, cur, q)[0])
    w1 = pre_fatou(nxt, z0, r, nf.a)
    if w.real <= 0 or w1.real <= 0:
        raise NotInPetal(f"orbit of {z} approaches z0 outside an attracting direction")
    phi = w - n - coef * cmath.log(w)
    # Abel residual at a common truncation index
    residual = abs((w1 - (n + 1) - coef * cmath.log(w1)) - phi)
    return phi, n, residual, coef


def fatou_coordinate(p: MonicPoly, q: int, z0: complex, z: complex, n_max: int = 200000,
                     z_ref: complex | None = None, tol: float = 1e-6) -> FatouResult:
    """Fatou coordinate of the return map P^q on an attracting petal of z0.

    Phi(z) = w_n - n - (resit / r) log w_n with w_n the pre-Fatou image of
    the n-th iterate; n grows until the Abel residual
    |Phi(P^q z) - Phi(z) - 1| at a common truncation falls below ``tol``.
    If ``z_ref`` is given the additive constant makes Phi(z_ref) = 0.
    """
    z0 = complex(z0)
    nf = normal_form(p, q, z0)
    threshold = 1e2
    while True:
        phi, n, residual, coef = _fatou_raw(p, q, z0, z, nf, threshold, n_max)
        if residual < tol or threshold >= 1e8:
            break
        threshold *= 10
    if z_ref is not None:
        phi_ref = _fatou_raw(p, q, z0, z_ref, nf, threshold, n_max)[0]
        phi -= phi_ref
    if residual >= tol:
        raise NotInPetal(f"Abel residual {residual:.3g} did not reach {tol:g}")
    return FatouResult(phi, n, residual, nf.resit, coef)


def fit_log_coefficient(p: MonicPoly, q: int, z0: complex, z: complex, depth: float = 1e4,
                        n_max: int = 200000) -> complex:
    """Numerical estimate of c in w_{n+1} - w_n - 1 ~ c / w_n along an orbit."""
    z0 = complex(z0)
    nf = normal_form(p, q, z0)
    r = nf.m - 1
    cur = complex(z)
    w = pre_fatou(cur, z0, r, nf.a)
    n = 0
    while abs(w) < depth:
        cur = complex(iterate(p, cur, q)[0])
        w = pre_fatou(cur, z0, r, nf.a)
        n += 1
        if n > n_max:
            raise NotInPetal("orbit did not reach the requested depth")
    w1 = pre_fatou(complex(iterate(p, cur, q)[0]), z0, r, nf.a)
    return (w1 - w - 1) * w


# ---------------------------------------------------------------------------
# tangent oscillation


def tangent_oscillation(arc: Sequence[complex], window: float = math.inf,
                        max_jump: float = 0.2) -> float:
    """Largest spread of the unit-tangent argument over arc-length windows.

    Tangents come from centered differences and are unwrapped; a jump above
    ``max_jump`` radians between neighbours means the sampling is too coarse.
    """
    z = np.asarray(arc, dtype=complex)
    if len(z) < 3:
        return 0.0
    tang = z[2:] - z[:-2]
    if np.any(tang == 0):
        raise TooCoarse("repeated samples give no tangent")
    ang = np.unwrap(np.angle(tang))
    jumps = np.abs(np.diff(ang))
    if len(jumps) and jumps.max() > max_jump:
        raise TooCoarse(f"tangent jumps by {jumps.max():.3f} rad between samples")
    s = np.concatenate([[0.0], np.cumsum(np.abs(np.diff(z)))])[1:-1]
    if not math.isfinite(window) or window >= s[-1] - s[0]:
        return float(ang.max() - ang.min())
    best = 0.0
    hi_q: deque = deque()
    lo_q: deque = deque()
    left = 0
    for right in range(len(ang)):
        while hi_q and ang[hi_q[-1]] <= ang[right]:
            hi_q.pop()
        hi_q.append(right)
        while lo_q and ang[lo_q[-1]] >= ang[right]:
            lo_q.pop()
        lo_q.append(right)
        while s[right] - s[left] > window:
            left += 1
            if hi_q[0] < left:
                hi_q.popleft()
            if lo_q[0] < left:
                lo_q.popleft()
        best = max(best, ang[hi_q[0]] - ang[lo_q[0]])
    return float(best)
