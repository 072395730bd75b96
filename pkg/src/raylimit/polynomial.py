"""Monic polynomials, orbits, root finding and rational-angle arithmetic.

A monic polynomial of degree d is stored by its d lower coefficients
``c_0 .. c_{d-1}``; the leading coefficient is implicitly 1.  All dynamics is
done by orbit evaluation, never by expanding compositions.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import NamedTuple, Sequence

import numpy as np

from .errors import DegenerateDerivative, NoConvergence, RangeGuard, RootFindingFailed

_EPS = np.finfo(float).eps
# dynamic range budget for P^q: q * log(d) <= 64 * log(2)
MAX_LOG_DEGREE = 64 * math.log(2)


@dataclass(frozen=True)
class MonicPoly:
    """P(z) = z^d + c_{d-1} z^{d-1} + ... + c_0."""

    degree: int
    coeffs: tuple

    def __post_init__(self):
        if int(self.degree) != self.degree or self.degree < 2:
            raise ValueError(f"degree must be an integer >= 2, got {self.degree}")
        cs = tuple(complex(c) for c in self.coeffs)
        if len(cs) != self.degree:
            raise ValueError(f"expected {self.degree} coefficients, got {len(cs)}")
        if not all(math.isfinite(c.real) and math.isfinite(c.imag) for c in cs):
            raise ValueError("coefficients must be finite")
        object.__setattr__(self, "degree", int(self.degree))
        object.__setattr__(self, "coeffs", cs)

    @classmethod
    def from_coeffs(cls, coeffs: Sequence[complex]) -> "MonicPoly":
        """Build from the lower coefficients c_0..c_{d-1}."""
        return cls(len(coeffs), tuple(coeffs))

    @classmethod
    def from_full(cls, full: Sequence[complex], rtol: float = 1e-12) -> "MonicPoly":
        """Build from all d+1 coefficients (low to high); the top one must be 1."""
        full = [complex(c) for c in full]
        while len(full) > 1 and full[-1] == 0:
            full.pop()
        if abs(full[-1] - 1) > rtol:
            raise ValueError(f"leading coefficient {full[-1]} is not 1")
        return cls.from_coeffs(full[:-1])

    @property
    def full(self) -> np.ndarray:
        """All d+1 coefficients, low to high, leading 1 included."""
        return np.array(self.coeffs + (1.0 + 0j,), dtype=complex)

    @property
    def scale(self) -> float:
        return 1.0 + max(abs(c) for c in self.coeffs)

    @property
    def is_real(self) -> bool:
        return all(c.imag == 0 for c in self.coeffs)

    def __call__(self, z):
        return evaluate(self, z)

    def to_json(self) -> dict:
        return {"degree": self.degree, "coeffs": [[c.real, c.imag] for c in self.coeffs]}

    @classmethod
    def from_json(cls, obj: dict) -> "MonicPoly":
        coeffs = [complex(c[0], c[1]) if isinstance(c, (list, tuple)) else complex(c)
                  for c in obj["coeffs"]]
        poly = cls.from_coeffs(coeffs)
        if "degree" in obj and int(obj["degree"]) != poly.degree:
            raise ValueError("degree does not match the number of coefficients")
        return poly


def monic_conjugate(full: Sequence[complex]):
    """Conjugate a non-monic polynomial by a dilation to monic form.

    Returns (P, g) with P(u) = f(g u) / g, so that z = g u maps the dynamics
    of P onto those of f.  Conformal invariants are unchanged.
    """
    full = [complex(c) for c in full]
    while full and full[-1] == 0:
        full.pop()
    d = len(full) - 1
    if d < 2:
        raise ValueError("degree must be >= 2")
    g = full[-1] ** (-1.0 / (d - 1))
    coeffs = [full[k] * g ** (k - 1) for k in range(d + 1)]
    return MonicPoly.from_full(coeffs, rtol=1e-10), g


class Orbit(NamedTuple):
    points: list
    derivative_product: complex
    truncated: bool = False


class PeriodicPoint(NamedTuple):
    point: complex
    multiplier: complex
    period: int


# ---------------------------------------------------------------------------
# evaluation


def derivative_coeffs(full, order: int) -> np.ndarray:
    """Coefficients (low to high) of the ``order``-th derivative."""
    a = np.asarray(full, dtype=complex)
    n = len(a) - 1
    if order > n:
        return np.zeros(1, dtype=complex)
    i = np.arange(order, n + 1)
    fall = np.ones(len(i))
    for k in range(order):
        fall = fall * (i - k)
    return a[order:] * fall


def taylor_shift_coeffs(full, order: int) -> np.ndarray:
    """Coefficients of p^{(order)}/order! (binomial weights, exact integers)."""
    a = np.asarray(full, dtype=complex)
    n = len(a) - 1
    if order > n:
        return np.zeros(1, dtype=complex)
    w = np.array([math.comb(i, order) for i in range(order, n + 1)], dtype=float)
    return a[order:] * w


def horner(coeffs, z):
    """Plain Horner; works for scalars and numpy arrays."""
    acc = coeffs[-1] * np.ones_like(z, dtype=complex) if isinstance(z, np.ndarray) else complex(coeffs[-1])
    for c in coeffs[-2::-1]:
        acc = acc * z + c
    return acc


def _two_sum(a, b):
    s = a + b
    bb = s - a
    return s, (a - (s - bb)) + (b - bb)


def _split(a):
    c = 134217729.0 * a
    hi = c - (c - a)
    return hi, a - hi


def _two_prod(a, b):
    p = a * b
    ah, al = _split(a)
    bh, bl = _split(b)
    return p, al * bl - (((p - ah * bh) - al * bh) - ah * bl)


def _two_prod_complex(x: complex, y: complex):
    p1, e1 = _two_prod(x.real, y.real)
    p2, e2 = _two_prod(x.imag, y.imag)
    p3, e3 = _two_prod(x.real, y.imag)
    p4, e4 = _two_prod(x.imag, y.real)
    s1, f1 = _two_sum(p1, -p2)
    s2, f2 = _two_sum(p3, p4)
    return complex(s1, s2), complex(e1 - e2 + f1, e3 + e4 + f2)


def horner_compensated(coeffs, z: complex) -> complex:
    """Compensated Horner scheme for a scalar complex argument."""
    r = complex(coeffs[-1])
    corr = 0j
    for a in coeffs[-2::-1]:
        p, pe = _two_prod_complex(r, z)
        sr, er = _two_sum(p.real, a.real)
        si, ei = _two_sum(p.imag, a.imag)
        r = complex(sr, si)
        corr = corr * z + (pe + complex(er, ei))
    return r + corr


def evaluate(p: MonicPoly, z, deriv_order: int = 0):
    """Value of the ``deriv_order``-th derivative of P at z (Horner).

    Orders above the degree give 0.  Scalar arguments with |z| > 1e8 use the
    compensated scheme.  Overflow propagates as an infinite result.
    """
    if deriv_order < 0:
        raise ValueError("deriv_order must be >= 0")
    if deriv_order > p.degree:
        return np.zeros_like(z, dtype=complex) if isinstance(z, np.ndarray) else 0j
    coeffs = derivative_coeffs(p.full, deriv_order)
    if isinstance(z, np.ndarray):
        return horner(coeffs, z.astype(complex))
    z = complex(z)
    with np.errstate(over="ignore", invalid="ignore"):
        if abs(z) > 1e8 and math.isfinite(abs(z)):
            out = horner_compensated([complex(c) for c in coeffs], z)
            if math.isfinite(abs(out)):
                return out
        return horner([complex(c) for c in coeffs], z)


def eval_with_derivative(coeffs: Sequence[complex], z: complex):
    """(p(z), p'(z)) for a coefficient list (low to high), scalar z."""
    val = coeffs[-1]
    der = 0j
    for c in coeffs[-2::-1]:
        der = der * z + val
        val = val * z + c
    return val, der


def orbit(p: MonicPoly, z: complex, n: int) -> Orbit:
    """z, P(z), ..., P^n(z) together with (P^n)'(z) by the chain rule."""
    if n < 0:
        raise ValueError("n must be >= 0")
    coeffs = [complex(c) for c in p.full]
    z = complex(z)
    pts = [z]
    dprod = 1 + 0j
    for _ in range(n):
        val, der = eval_with_derivative(coeffs, z)
        dprod *= der
        if not (math.isfinite(abs(val)) and math.isfinite(abs(dprod))):
            return Orbit(pts, dprod, True)
        z = val
        pts.append(z)
    return Orbit(pts, dprod, False)


def iterate(p: MonicPoly, z, n: int):
    """P^n(z) and (P^n)'(z); vectorised over numpy arrays."""
    coeffs = [complex(c) for c in p.full]
    dprod = np.ones_like(z, dtype=complex) if isinstance(z, np.ndarray) else 1 + 0j
    with np.errstate(over="ignore", invalid="ignore"):
        for _ in range(n):
            val, der = eval_with_derivative(coeffs, z)
            dprod = dprod * der
            z = val
    return z, dprod


# ---------------------------------------------------------------------------
# root finding


def _abs_horner(coeffs, r):
    acc = abs(coeffs[-1]) * np.ones_like(r)
    for c in coeffs[-2::-1]:
        acc = acc * r + abs(c)
    return acc


def aberth(coeffs, max_iter: int = 800) -> np.ndarray:
    """All roots of sum(coeffs[k] z^k) by Aberth-Ehrlich simultaneous iteration.

    Roots are frozen once their backward error is at rounding level, which
    keeps clustered (multiple) roots from oscillating.
    """
    a = np.array(coeffs, dtype=complex)
    nz = np.flatnonzero(a)
    if len(nz) == 0:
        raise ValueError("zero polynomial")
    a = a[: nz[-1] + 1]
    n = len(a) - 1
    if n == 0:
        return np.zeros(0, dtype=complex)
    if n == 1:
        return np.array([-a[0] / a[1]])
    da = derivative_coeffs(a, 1)
    lead = abs(a[-1])
    radius = max(abs(a[k] / a[-1]) ** (1.0 / (n - k)) for k in range(n))
    radius = max(radius, 1e-3)
    center = -a[-2] / (n * a[-1])
    z = center + radius * np.exp(1j * (2 * np.pi * np.arange(n) / n + 0.4))
    active = np.ones(n, dtype=bool)
    for _ in range(max_iter):
        pv = horner(a, z)
        bound = 16 * _EPS * _abs_horner(a, np.abs(z))
        active &= ~(np.abs(pv) <= bound)
        if not active.any():
            break
        dv = horner(da, z)
        diff = z[:, None] - z[None, :]
        np.fill_diagonal(diff, 1.0)
        inv = 1.0 / diff
        np.fill_diagonal(inv, 0.0)
        sums = inv.sum(axis=1)
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = pv / dv
            w = ratio / (1 - ratio * sums)
        bad = ~np.isfinite(w)
        w[bad] = 1e-3 * radius * (1 + 1j)
        step = np.where(active, w, 0)
        z = z - step
        if np.all(np.abs(step[active]) <= 4 * _EPS * np.abs(z[active])):
            break
    else:
        raise RootFindingFailed(f"Aberth iteration did not converge in {max_iter} steps")
    if not np.all(np.isfinite(z)):
        raise RootFindingFailed("Aberth iteration produced non-finite roots")
    return z


def _newton_polish(coeffs, z: complex, steps: int = 3) -> complex:
    cs = [complex(c) for c in coeffs]
    best, best_res = z, abs(eval_with_derivative(cs, z)[0])
    for _ in range(steps):
        v, d = eval_with_derivative(cs, best)
        if d == 0:
            break
        cand = best - v / d
        res = abs(eval_with_derivative(cs, cand)[0])
        if res < best_res:
            best, best_res = cand, res
        else:
            break
    return best


def _components(points: np.ndarray, radius: float) -> list:
    n = len(points)
    parent = list(range(n))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i in range(n):
        for j in range(i + 1, n):
            if abs(points[i] - points[j]) <= radius:
                parent[find(i)] = find(j)
    groups = {}
    for i in range(n):
        groups.setdefault(find(i), []).append(i)
    return list(groups.values())


def _vanishing_ok(full, c: complex, k: int, rtol: float) -> bool:
    for j in range(k):
        tj = taylor_shift_coeffs(full, j)
        val = abs(horner(tj, c))
        ref = float(_abs_horner(tj, abs(c)))
        if val > rtol * ref:
            return False
    return True


def _refine_multiple(full, c: complex, k: int) -> complex:
    """Newton on p^{(k-1)}, whose root at a k-fold root of p is simple."""
    dk = [complex(x) for x in derivative_coeffs(full, k - 1)]
    for _ in range(8):
        v, d = eval_with_derivative(dk, c)
        if d == 0:
            break
        step = v / d
        c -= step
        if abs(step) <= 4 * _EPS * max(abs(c), 1.0):
            break
    return c


def cluster_roots(full, roots, scale: float, rtol: float = 1e-8) -> list:
    """Group numerically split multiple roots into (center, multiplicity).

    Candidate clusters are formed loosely and accepted only if the derivatives
    below the cluster size vanish at the refined center (relative ``rtol``);
    otherwise they are re-split at ten times tighter radius, down to
    ``1e-8 * scale`` where clusters are accepted as they stand.
    """
    roots = np.asarray(roots, dtype=complex)
    out = []

    def resolve(idx, level):
        if len(idx) == 1:
            out.append((_newton_polish(full, complex(roots[idx[0]])), 1))
            return
        k = len(idx)
        c = _refine_multiple(full, complex(np.mean(roots[idx])), k)
        if level >= 8 or _vanishing_ok(full, c, k, rtol):
            out.append((c, k))
            return
        sub = roots[idx]
        for g in _components(sub, 10.0 ** (-(level + 1)) * scale):
            resolve([idx[i] for i in g], level + 1)

    for g in _components(roots, 1e-2 * scale):
        resolve(g, 2)
    out.sort(key=lambda t: (round(t[0].real, 12), round(t[0].imag, 12)))
    return out


def critical_points(p: MonicPoly) -> list:
    """The d-1 critical points, repeated according to multiplicity."""
    dfull = derivative_coeffs(p.full, 1)
    roots = aberth(dfull)
    out = []
    for c, k in cluster_roots(dfull, roots, p.scale):
        out.extend([c] * k)
    return out


def fixed_points(p: MonicPoly) -> list:
    """Roots of P(z) - z as (location, multiplicity); multiplicities sum to d."""
    full = p.full.copy()
    full[1] -= 1
    roots = aberth(full)
    return cluster_roots(full, roots, p.scale)


def check_range(p: MonicPoly, q: int) -> None:
    if q * math.log(p.degree) > MAX_LOG_DEGREE:
        raise RangeGuard(f"q={q} exceeds the dynamic-range budget for degree {p.degree}")


def exact_period(p: MonicPoly, z: complex, q: int, tol: float) -> int:
    for k in range(1, q + 1):
        if q % k == 0:
            w, _ = iterate(p, z, k)
            if abs(w - z) <= tol:
                return k
    return q


def refine_periodic(p: MonicPoly, q: int, seed: complex, max_iter: int = 200) -> PeriodicPoint:
    """Newton on P^q(z) - z from ``seed`` without expanding the composition.

    Raises DegenerateDerivative when (P^q)' - 1 drops below 1e-14, which is
    what happens when Newton creeps into a multiple root.
    """
    if q < 1:
        raise ValueError("q must be >= 1")
    check_range(p, q)
    tol = 1e-11 * p.scale
    z = complex(seed)
    for _ in range(max_iter):
        w, dw = iterate(p, z, q)
        f, df = w - z, dw - 1
        if not math.isfinite(abs(f)):
            raise NoConvergence(f"orbit of seed {seed} escaped")
        if abs(df) < 1e-14:
            raise DegenerateDerivative("derivative of P^q(z) - z vanished", point=z)
        step = f / df
        z = z - step
        if abs(step) <= 4 * _EPS * max(1.0, abs(z)):
            break
    else:
        raise NoConvergence(f"Newton from {seed} did not converge in {max_iter} steps")
    w, dw = iterate(p, z, q)
    if abs(dw - 1) < 1e-14:
        raise DegenerateDerivative("derivative of P^q(z) - z vanished", point=z)
    if abs(w - z) >= tol:
        raise NoConvergence(f"residual {abs(w - z):.3g} above {tol:.3g}")
    return PeriodicPoint(z, dw, exact_period(p, z, q, 1e-9 * p.scale))


# ---------------------------------------------------------------------------
# Taylor expansions of iterates


def series_mul(a: np.ndarray, b: np.ndarray, order: int) -> np.ndarray:
    return np.convolve(a, b)[: order + 1]


def taylor_of_iterate(p: MonicPoly, q: int, z0: complex, order: int) -> np.ndarray:
    """Taylor coefficients of h -> P^q(z0 + h) up to h^order."""
    s = np.zeros(order + 1, dtype=complex)
    s[0] = z0
    if order >= 1:
        s[1] = 1
    full = p.full
    for _ in range(q):
        acc = np.zeros(order + 1, dtype=complex)
        acc[0] = full[-1]
        for c in full[-2::-1]:
            acc = series_mul(acc, s, order)
            acc[0] += c
        s = acc
    return s


def compose_expanded(p: MonicPoly, n: int) -> np.ndarray:
    """Full coefficients of P^n.  Test oracle only; refuses d^n > 256."""
    if p.degree ** n > 256:
        raise RangeGuard("explicit composition limited to degree 256")
    res = np.array([0, 1], dtype=complex)
    full = p.full
    for _ in range(n):
        acc = np.array([full[-1]], dtype=complex)
        for c in full[-2::-1]:
            acc = np.convolve(acc, res)
            acc[0] += c
        res = acc
    return res


# ---------------------------------------------------------------------------
# rational angles


def make_angle(num: int, den: int = 1) -> Fraction:
    """Reduced angle num/den taken mod 1."""
    if den <= 0:
        raise ValueError("denominator must be positive")
    return Fraction(num, den) % 1


def parse_angle(text: str) -> Fraction:
    if "/" in text:
        num, den = text.split("/", 1)
        return make_angle(int(num), int(den))
    return make_angle(int(text), 1)


def format_angle(theta: Fraction) -> str:
    return f"{theta.numerator}/{theta.denominator}"


def angle_times_d(theta: Fraction, d: int) -> Fraction:
    return (Fraction(theta) * d) % 1


def angle_period(theta: Fraction, d: int):
    """Least q >= 1 with d^q theta = theta (mod 1); None if preperiodic."""
    theta = Fraction(theta) % 1
    den = theta.denominator
    if math.gcd(den, d) != 1:
        return None
    if den == 1:
        return 1
    q, x = 1, d % den
    while x != 1:
        x = (x * d) % den
        q += 1
    return q


def angle_cycle(theta: Fraction, d: int) -> list:
    q = angle_period(theta, d)
    if q is None:
        raise ValueError(f"angle {theta} is not periodic under multiplication by {d}")
    out = [Fraction(theta) % 1]
    for _ in range(q - 1):
        out.append(angle_times_d(out[-1], d))
    return out
