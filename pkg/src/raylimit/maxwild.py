"""Maximally wild real polynomials and the Hawaiian-earring families.

The construction places N double parabolic fixed points on the positive
real axis with negative résidu itératif and a repelling fixed point at 0.
After adding a small eps > 0, every double point splits into a pair of
complex conjugate attracting points and the zero ray runs along the real
axis down to the repelling point.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .errors import InequalityViolated, PairNotAttracting, ResitNonNegative
from .family import PerturbationFamily, horocycle, power_map, q_map
from .hausdorff import INF, SphereCloud, densify, hausdorff_dist
from .invariants import multiplier, normal_form, resit
from .polynomial import MonicPoly, fixed_points, refine_periodic
from .potential import DEFAULT_PARAMS, PotentialParams, RayTrace, closed_ray_cloud, trace_ray


@dataclass
class MaxwildResult:
    N: int
    x: list  # exact integers x_1 < ... < x_N
    H: list  # exact rationals H_j
    C: float
    C_exact: Fraction
    P_raw: np.ndarray  # full coefficients of z + C z Q(z)^2, low to high
    gamma: float
    P_monic: MonicPoly
    w: list  # w_0 > ... > w_N = 0
    resit_values: list
    resit_normal_form: list = field(default_factory=list)

    @property
    def degree(self) -> int:
        return 2 * self.N + 1

    def to_json(self) -> dict:
        return {
            "N": self.N,
            "x": [int(v) for v in self.x],
            "H": [str(h) for h in self.H],
            "C": self.C,
            "P_raw": [[float(c.real), float(c.imag)] for c in self.P_raw],
            "gamma": self.gamma,
            "P_monic": self.P_monic.to_json(),
            "w": self.w,
            "resit_values": [[r.real, r.imag] for r in self.resit_values],
        }


def spacing_points(N: int) -> list:
    """x_1 = 1, x_j = x_{j-1} + 2^j."""
    x = [1]
    for j in range(2, N + 1):
        x.append(x[-1] + 2 ** j)
    return x


def h_sums(x: Sequence[int]) -> list:
    """H_j = sum over i != j of 1/(x_j - x_i), exactly."""
    return [sum((Fraction(1, xj - xi) for i, xi in enumerate(x) if i != j), Fraction(0))
            for j, xj in enumerate(x)]


def q_derivative_at(x: Sequence[int], j: int) -> Fraction:
    """Q'(x_j) = prod over i != j of (x_j - x_i)."""
    out = Fraction(1)
    for i, xi in enumerate(x):
        if i != j:
            out *= x[j] - xi
    return out


def build_maxwild(N: int, safety: float = 0.5) -> MaxwildResult:
    if N < 1:
        raise ValueError("N must be >= 1")
    if not 0 < safety < 1:
        raise ValueError("safety must lie in (0, 1)")
    x = spacing_points(N)
    H = h_sums(x)
    bounds = []
    for j, xj in enumerate(x):
        lhs = 1 + 2 * xj * H[j]
        if lhs <= 0:
            raise InequalityViolated(f"1 + 2 x_j H_j = {lhs} at j = {j + 1}")
        bounds.append(lhs / (xj ** 2 * q_derivative_at(x, j) ** 2))
    C_exact = Fraction(safety).limit_denominator(10 ** 6) * min(bounds)
    C = float(C_exact)
    Q = np.poly(np.array(x, dtype=float))[::-1]  # low to high
    raw = C * np.convolve([0, 1], np.convolve(Q, Q))
    raw[1] += 1
    gamma = C ** (-1.0 / (2 * N))
    roots = np.array(x, dtype=float) / gamma
    Qs = np.poly(roots)[::-1]
    full = np.convolve([0, 1], np.convolve(Qs, Qs)).astype(complex)
    full[1] += 1
    P = MonicPoly.from_full(full)
    w = [float(v) for v in sorted(roots, reverse=True)] + [0.0]
    res_vals, nf_vals = [], []
    for xj in roots:
        r1 = resit(P, 1, complex(xj))
        r2 = normal_form(P, 1, complex(xj)).resit
        if not r1.real < 0:
            raise ResitNonNegative(f"resit {r1} at {xj}")
        res_vals.append(complex(r1))
        nf_vals.append(complex(r2))
    return MaxwildResult(N, x, H, C, C_exact, raw, gamma, P, w, res_vals, nf_vals)


@dataclass
class VerificationReport:
    epsilon: float
    w_N: complex
    w_N_multiplier: complex
    pairs: list  # (point, conjugate, multiplier) per parabolic point
    separation: float
    cluster_diameter: float
    separated: bool
    ray: RayTrace
    max_imag: float
    terminal_gap: float
    segment_distance: float
    resolution: float
    x_cut: float
    ok: bool

    def to_json(self) -> dict:
        c = lambda z: [float(complex(z).real), float(complex(z).imag)]
        return {
            "epsilon": self.epsilon,
            "w_N": c(self.w_N),
            "w_N_multiplier": c(self.w_N_multiplier),
            "pairs": [{"z": c(a), "conjugate": c(b), "multiplier": c(m), "modulus": abs(m)}
                      for a, b, m in self.pairs],
            "separation": self.separation,
            "cluster_diameter": self.cluster_diameter,
            "separation_heuristic_ok": self.separated,
            "ray_status": self.ray.status,
            "ray_terminal": c(self.ray.terminal),
            "ray_levels": len(self.ray.z),
            "max_abs_imag": self.max_imag,
            "terminal_gap": self.terminal_gap,
            "segment_hausdorff": self.segment_distance,
            "resolution": self.resolution,
            "x_cut": self.x_cut,
            "ok": self.ok,
        }


def segment_cloud(a: float, b: float, resolution: float) -> SphereCloud:
    return SphereCloud(np.concatenate([densify([a, b], resolution), [INF]]), resolution)


def perturb_and_verify(res: MaxwildResult, eps: float, params: PotentialParams = DEFAULT_PARAMS,
                       resolution: float = 1e-3, land_tol: float = 1e-3, s_max: float = 4.0,
                       deep_levels: int = 3000) -> VerificationReport:
    """Check the eps-perturbation: attracting pairs, real zero ray, landing."""
    if not eps > 0:
        raise ValueError("eps must be positive: at eps = 0 the fixed-point clusters coincide")
    P = res.P_monic
    cs = list(P.coeffs)
    cs[0] += eps
    Pe = MonicPoly.from_coeffs(cs)
    fps = [z for z, m in fixed_points(Pe) for _ in range(m)]
    centers = [complex(w) for w in res.w]
    groups = {i: [] for i in range(len(centers))}
    for z in fps:
        groups[min(range(len(centers)), key=lambda i: abs(z - centers[i]))].append(z)
    diam = max(max((abs(a - b) for a in g for b in g), default=0.0) for g in groups.values())
    sep = min(abs(a - b) for i, a in enumerate(centers) for b in centers[i + 1:])
    # the separation heuristic is only reported; the cluster counts below are enforced
    separated = sep >= 10 * diam
    zero = groups[len(centers) - 1]
    if len(zero) != 1:
        raise ValueError("the repelling fixed point did not stay simple")
    wN = complex(refine_periodic(Pe, 1, zero[0]).point)
    lamN = multiplier(Pe, 1, wN)
    pairs = []
    for i in range(len(centers) - 1):
        g = sorted(groups[i], key=lambda z: z.imag)
        if len(g) != 2:
            raise ValueError(f"cluster {i} has {len(g)} points instead of 2")
        top = complex(refine_periodic(Pe, 1, g[1]).point)
        lam = multiplier(Pe, 1, top)
        pairs.append((top, top.conjugate(), lam))
        if abs(lam) >= 1:
            raise PairNotAttracting(f"pair near {centers[i]:.6g} has multiplier modulus {abs(lam):.6g}")
    tr = trace_ray(Pe, Fraction(0), s_max, None, params,
                   log_s_min=math.log(1e-9) - deep_levels * math.log(Pe.degree))
    max_imag = float(np.max(np.abs(tr.z.imag)))
    gap = abs(tr.terminal - wN)
    x_cut = float(tr.z[0].real)
    # both clouds stop at R(s_max) and then jump to infinity
    cloud = closed_ray_cloud(tr, resolution, landing=wN, to_infinity=False)
    seg = segment_cloud(wN.real, x_cut, resolution)
    dist = hausdorff_dist(cloud, seg)
    ok = max_imag < 1e-9 and gap < land_tol and wN.real < 0 and lamN.real > 1 and dist < 4 * resolution
    return VerificationReport(eps, wN, lamN, pairs, sep, diam, separated, tr, max_imag, gap, dist,
                              resolution, x_cut, ok)


def hawaiian_family(d: int, a: float, n_schedule: Sequence[float]):
    """Q_n(w) = w (lam_n + w)^{d-1} and its lift P_n(z) = lam_n z + z^d.

    lam_n = 1 + 1/(1/(2a) + i n) runs along |lam - (1 + a)| = a into 1.
    """
    if d < 2:
        raise ValueError("d must be >= 2")
    if not 0 < a < 1 / (d - 1):
        raise ValueError("a must lie in (0, 1/(d-1))")
    lams = horocycle(a, n_schedule)
    fam_q = PerturbationFamily.multiplier_path("hawaiian_q", lams, degree=d)
    fam_p = PerturbationFamily.multiplier_path("power", lams, degree=d)
    spec = {"horocycle": {"a": a, "t": list(map(float, n_schedule))}}
    fam_q.spec = dict(fam_q.spec, **spec)
    fam_p.spec = dict(fam_p.spec, **spec)
    return fam_q, fam_p


def attracting_pair_multiplier(member: MonicPoly, seed: complex) -> complex:
    """Multiplier at the fixed point refined from ``seed`` (e.g. w = 1 - lam for Q_n)."""
    z = refine_periodic(member, 1, seed).point
    return multiplier(member, 1, z)


def q_fixed_multiplier(lam: complex, d: int) -> complex:
    """Multiplier of Q(w) = w (lam + w)^{d-1} at w = 1 - lam, by direct differentiation."""
    Q = q_map(lam, d)
    return attracting_pair_multiplier(Q, 1 - lam) if lam != 1 else multiplier(Q, 1, 0)
