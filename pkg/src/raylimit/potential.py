"""Green's function, Böttcher coordinate and external rays by potential.

Rays are sampled on the geometric potential grid s_k = s_top d^{-k/S}.  Since
d s_k = s_{k-S}, the point of R_theta at s_k is a preimage under P of the
point of R_{d theta} at s_{k-S}; the whole angle cycle is therefore traced
jointly, index by index.  Potentials are carried as logarithms so the trace
can continue far below double-precision potentials, which is what parabolic
landing points and near-parabolic gates require.
"""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import NamedTuple

import numpy as np

from .errors import (
    BranchAmbiguous,
    Crashed,
    DegenerateDerivative,
    NoConvergence,
    NoNearbyPeriodic,
    TooShallow,
)
from .hausdorff import INF, SphereCloud, densify, stereographic
from .polynomial import (
    MonicPoly,
    aberth,
    angle_cycle,
    critical_points,
    eval_with_derivative,
    format_angle,
    exact_period,
    refine_periodic,
)

LANDING_TOL = 1e-7
LANDING_WINDOW = 16
CRASH_TOL = 1e-10
ALPHA_MAX = 0.1
KAPPA = 8


@dataclass(frozen=True)
class PotentialParams:
    escape_radius: float | None = None  # default 2 + sum |c_j|
    iter_cap: int = 2048
    tol: float = 1e-12

    def radius(self, p: MonicPoly) -> float:
        r = self.escape_radius if self.escape_radius is not None else 2 + sum(abs(c) for c in p.coeffs)
        if r < 2:
            raise ValueError("escape radius must be >= 2")
        return float(r)


DEFAULT_PARAMS = PotentialParams()


class GreenResult(NamedTuple):
    value: float
    status: str  # escaped, confirmed (bounded orbit settles on a cycle), undecided
    steps: int


# ---------------------------------------------------------------------------
# Green's function


def _tail_log(coeffs, d: int, w: complex, tol: float) -> float:
    """log|beta(w)| - log|w| for |w| beyond the escape radius."""
    acc = 0.0
    scale = 1.0
    for _ in range(200):
        scale /= d
        # u = sum_j c_j w^{j-d} by Horner in 1/w
        inv = 1 / w
        u = 0j
        for c in coeffs:
            u = (u + c) * inv
        term = scale * math.log(abs(1 + u))
        acc += term
        if abs(term) < tol * 1e-3 or abs(w) > 1e30:
            break
        w = w ** d * (1 + u)
    return acc


def green_status(p: MonicPoly, z: complex, params: PotentialParams = DEFAULT_PARAMS) -> GreenResult:
    """G(z) with an escape/cycle status.

    After the first escape beyond R the remaining tail is summed as
    sum_k d^{-(k+1)} log|1 + sum_j c_j w_k^{j-d}| until the terms drop
    below ``tol``.
    """
    d = p.degree
    R = params.radius(p)
    coeffs = list(p.coeffs)
    full = coeffs + [1 + 0j]
    z = complex(z)
    history = []
    for n in range(params.iter_cap + 1):
        if abs(z) > R:
            g = (math.log(abs(z)) + _tail_log(coeffs, d, z, params.tol)) * math.exp(-n * math.log(d))
            return GreenResult(g, "escaped", n)
        if n == params.iter_cap:
            break
        history.append(z)
        z = eval_with_derivative(full, z)[0]
    # bounded so far: look for a settled cycle
    if len(history) > 64:
        last = history[-1]
        for k in range(1, 33):
            if abs(history[-1 - k] - last) < 1e-11 * (1 + abs(last)):
                return GreenResult(0.0, "confirmed", params.iter_cap)
    return GreenResult(0.0, "undecided", params.iter_cap)


def green(p: MonicPoly, z: complex, params: PotentialParams = DEFAULT_PARAMS) -> float:
    return green_status(p, z, params).value


def green_array(p: MonicPoly, z: np.ndarray, params: PotentialParams = DEFAULT_PARAMS,
                iter_cap: int | None = None):
    """Vectorised G over an array; returns (G, escape_count) with -1 for no escape."""
    d = p.degree
    R = params.radius(p)
    cap = params.iter_cap if iter_cap is None else iter_cap
    z = np.asarray(z, dtype=complex).copy()
    shape = z.shape
    z = z.ravel()
    out = np.zeros(z.shape, dtype=float)
    count = np.full(z.shape, -1, dtype=np.int64)
    active = np.arange(z.size)
    w = z.copy()
    full = p.full
    with np.errstate(over="ignore", invalid="ignore"):
        for n in range(cap + 1):
            esc = np.abs(w) > R
            if esc.any():
                idx = active[esc]
                we = w[esc]
                tail = np.array([_tail_log(list(p.coeffs), d, complex(v), params.tol) for v in we]) \
                    if we.size < 64 else _tail_log_array(p, we, params.tol)
                out[idx] = (np.log(np.abs(we)) + tail) * math.exp(-n * math.log(d))
                count[idx] = n
                active = active[~esc]
                w = w[~esc]
            if n == cap or active.size == 0:
                break
            acc = np.full(w.shape, full[-1], dtype=complex)
            for c in full[-2::-1]:
                acc = acc * w + c
            w = acc
    return out.reshape(shape), count.reshape(shape)


def _tail_log_array(p: MonicPoly, w: np.ndarray, tol: float) -> np.ndarray:
    d = p.degree
    acc = np.zeros(w.shape)
    scale = 1.0
    w = w.copy()
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        for _ in range(200):
            scale /= d
            inv = 1 / w
            u = np.zeros_like(w)
            for c in p.coeffs:
                u = (u + c) * inv
            term = scale * np.log(np.abs(1 + u))
            term[~np.isfinite(term)] = 0.0
            acc += term
            if np.max(np.abs(term)) < tol * 1e-3:
                break
            w = np.where(np.abs(w) < 1e100, w ** d * (1 + u), w)
    return acc


# ---------------------------------------------------------------------------
# Böttcher coordinate


def _log_bottcher_far(p: MonicPoly, z: complex, tol: float = 1e-16):
    """(log beta(z), beta'(z)/beta(z)) for |z| beyond the escape radius.

    log beta = log z + sum_k d^{-(k+1)} Log(1 + u(z_k)), u(w) = sum c_j w^{j-d};
    every |u(z_k)| < 1 there, so the principal logarithm is continuous.
    The logarithmic derivative is the limit of d^{-n} (P^n)'(z)/P^n(z).
    """
    d = p.degree
    full = list(p.full)
    coeffs = list(p.coeffs)
    logb = cmath.log(z)
    dlog = 1 / z
    w = z
    scale = 1.0
    for _ in range(400):
        inv = 1 / w
        u = 0j
        for c in coeffs:
            u = (u + c) * inv
        scale /= d
        term = scale * cmath.log(1 + u)
        logb += term
        if abs(w) > 1e30:
            break
        val, der = eval_with_derivative(full, w)
        factor = w * der / (d * val)
        dlog *= factor
        if abs(term) < tol and abs(factor - 1) < tol:
            break
        w = val
        if not math.isfinite(abs(w)):
            break
    return logb, dlog


def bottcher(p: MonicPoly, z: complex, params: PotentialParams = DEFAULT_PARAMS) -> complex:
    """beta(z), tangent to the identity at infinity.

    Requires G(z) > log R.  Points with |z| > R use the product formula
    directly; otherwise z is pushed forward until it passes R and the
    d-th roots are taken back along the orbit, each time on the branch
    nearest to the orbit point shifted by c_{d-1}/d.
    """
    z = complex(z)
    R = params.radius(p)
    if abs(z) > R:
        return cmath.exp(_log_bottcher_far(p, z)[0])
    g = green(p, z, params)
    if not g > math.log(R):
        raise TooShallow(f"G(z) = {g:.6g} does not exceed log R = {math.log(R):.6g}")
    d = p.degree
    full = list(p.full)
    orbit = [z]
    while abs(orbit[-1]) <= R:
        orbit.append(eval_with_derivative(full, orbit[-1])[0])
    b = cmath.exp(_log_bottcher_far(p, orbit[-1])[0])
    shift = p.coeffs[-1] / d
    for w in reversed(orbit[:-1]):
        root = b ** (1.0 / d)
        cands = [root * cmath.exp(2j * math.pi * k / d) for k in range(d)]
        b = min(cands, key=lambda c: abs(c - (w + shift)))
    return b


def invert_bottcher(p: MonicPoly, log_target: complex, seed: complex | None = None,
                    max_iter: int = 60) -> complex:
    """z with log beta(z) = log_target (mod 2 pi i) by Newton in the log form."""
    z = cmath.exp(log_target) - p.coeffs[-1] / p.degree if seed is None else complex(seed)
    for _ in range(max_iter):
        logb, dlog = _log_bottcher_far(p, z)
        diff = logb - log_target
        diff = complex(diff.real, (diff.imag + math.pi) % (2 * math.pi) - math.pi)
        step = diff / dlog
        z = z - step
        if abs(step) <= 2e-16 * abs(z):
            return z
    if abs(step) <= 1e-12 * abs(z):
        return z
    raise NoConvergence("Böttcher inversion did not converge")


# ---------------------------------------------------------------------------
# ray tracing


@dataclass
class RayTrace:
    poly: MonicPoly
    angle: Fraction
    log_s: np.ndarray
    z: np.ndarray
    status: str  # landed, truncated, crashed
    landing: complex | None = None
    s_crash: float | None = None
    near_critical: complex | None = None
    steps_per_level: int = KAPPA
    period: int = 1
    info: dict = field(default_factory=dict)

    @property
    def s(self) -> np.ndarray:
        return np.exp(self.log_s)

    @property
    def samples(self) -> list:
        return list(zip(self.s.tolist(), self.z.tolist()))

    @property
    def terminal(self) -> complex:
        return complex(self.z[-1])

    def at(self, s: float) -> complex:
        """Point at potential s by cubic interpolation in log s (clamped to the trace)."""
        ls = math.log(s)
        n = len(self.z)
        i = int(np.searchsorted(-self.log_s, -ls))
        if i <= 0:
            return complex(self.z[0])
        if i >= n:
            return complex(self.z[-1])
        lo = min(max(i - 2, 0), max(n - 4, 0))
        idx = range(lo, min(lo + 4, n))
        out = 0j
        for a in idx:
            w = 1.0
            for b in idx:
                if b != a:
                    w *= (ls - self.log_s[b]) / (self.log_s[a] - self.log_s[b])
            out += w * self.z[a]
        return complex(out)

    def to_json(self) -> dict:
        status = {"kind": self.status}
        if self.status == "landed":
            status["zeta"] = [self.landing.real, self.landing.imag]
        elif self.status == "truncated":
            status["s_min"] = float(math.exp(self.log_s[-1]))
            status["log_s_min"] = float(self.log_s[-1])
            if self.landing is not None:
                status["zeta_estimate"] = [self.landing.real, self.landing.imag]
        else:
            status["s_crash"] = self.s_crash
            if self.near_critical is not None:
                status["near_critical"] = [self.near_critical.real, self.near_critical.imag]
        return {
            "angle": format_angle(self.angle),
            "status": status,
            "samples": [[float(math.exp(ls)), float(z.real), float(z.imag)]
                        for ls, z in zip(self.log_s, self.z)],
        }


def grid_steps(d: int, kappa: int = KAPPA) -> int:
    """Grid points per factor d of potential (kappa per halving, rounded)."""
    return max(1, int(round(kappa * math.log2(d))))


def _taylor_at(full, z: complex) -> list:
    """Taylor coefficients of p at z (synthetic division)."""
    a = [complex(c) for c in full]
    n = len(a) - 1
    out = []
    for k in range(n + 1):
        acc = a[n]
        for i in range(n - 1, k - 1, -1):
            acc = acc * z + a[i]
            a[i] = acc
        out.append(acc)
    return out


def smale_alpha(full, target: complex, z: complex) -> float:
    """alpha = beta gamma for f = p - target at z."""
    t = _taylor_at(full, z)
    t[0] -= target
    if t[1] == 0:
        return math.inf
    beta = abs(t[0] / t[1])
    gamma = max((abs(t[k] / t[1]) ** (1.0 / (k - 1)) for k in range(2, len(t))), default=0.0)
    return beta * gamma


def _newton_preimage(full, target: complex, z: complex, max_iter: int = 50) -> complex:
    for _ in range(max_iter):
        val, der = eval_with_derivative(full, z)
        if der == 0:
            break
        step = (val - target) / der
        z = z - step
        if abs(step) <= 4e-16 * max(1.0, abs(z)):
            break
    return z


class _Crash(Exception):
    def __init__(self, z):
        self.z = z


def _pullback(full, target: complex, prev_target: complex, prev: complex, pred: complex) -> complex:
    """Preimage of ``target`` continuing the branch through ``prev``."""
    d_prev = eval_with_derivative(full, prev)[1]
    if abs(d_prev) < CRASH_TOL:
        raise _Crash(prev)
    if smale_alpha(full, target, pred) < ALPHA_MAX:
        z = _newton_preimage(full, target, pred)
    else:
        z = None
        for parts in (2, 4):
            cur = prev
            ok = True
            for i in range(1, parts + 1):
                t = prev_target + (target - prev_target) * i / parts
                der = eval_with_derivative(full, cur)[1]
                if abs(der) < CRASH_TOL:
                    raise _Crash(cur)
                guess = cur + (t - eval_with_derivative(full, cur)[0]) / der
                if smale_alpha(full, t, guess) >= ALPHA_MAX:
                    ok = False
                    break
                cur = _newton_preimage(full, t, guess)
            if ok:
                z = cur
                break
        if z is None:
            f = list(full)
            f[0] -= target
            roots = sorted(aberth(f), key=lambda r: abs(r - pred))
            if len(roots) > 1 and abs(roots[1] - pred) < 2 * abs(roots[0] - pred):
                raise BranchAmbiguous(
                    f"preimages {roots[0]:.6g} and {roots[1]:.6g} are both near the prediction")
            z = _newton_preimage(full, target, complex(roots[0]))
    if abs(eval_with_derivative(full, z)[1]) < CRASH_TOL:
        raise _Crash(z)
    return z


def _crosses_critical_value(crit, target: complex, prev_target: complex, prev: complex,
                            back: complex):
    """Critical point the branch runs into when the image step passes a critical value.

    The grid never samples the exact potential where |P'| vanishes, so a
    crash is recognised when the image-ray step passes within a thousandth
    of its length of a critical value whose critical point is as close to
    the branch as the last step.
    """
    seg = target - prev_target
    if seg == 0:
        return None
    for w, v in crit:
        t = ((v - prev_target) * seg.conjugate()).real / abs(seg) ** 2
        if not 0 <= t <= 1:
            continue
        if abs(prev_target + t * seg - v) > 1e-3 * abs(seg):
            continue
        if abs(prev - w) <= 3 * abs(prev - back) + 1e-12:
            return w
    return None


def chordal_scalar(z: complex, w: complex) -> float:
    return 2 * abs(z - w) / math.sqrt((1 + abs(z) ** 2) * (1 + abs(w) ** 2))


def _window_diameter(zs) -> float:
    best = 0.0
    for i in range(len(zs)):
        for j in range(i + 1, len(zs)):
            best = max(best, chordal_scalar(zs[i], zs[j]))
    return best


def aitken(z0: complex, z1: complex, z2: complex) -> complex:
    den = (z2 - z1) - (z1 - z0)
    if den == 0 or not math.isfinite(abs(den)):
        return z2
    est = z2 - (z2 - z1) ** 2 / den
    # only trust it when the sequence contracts
    if abs(z2 - z1) < abs(z1 - z0):
        return est
    return z2


def algebraic_limit(z0: complex, z1: complex, z2: complex) -> complex:
    """Limit of a sequence with 1/(z_n - zeta) affine in n (parabolic landing).

    Solves 1/(z0-c) - 2/(z1-c) + 1/(z2-c) = 0 for c.
    """
    # clearing denominators the c^2 terms cancel, leaving b c + k = 0
    b = z0 + z2 - 2 * z1
    k = z1 * z2 - 2 * z0 * z2 + z0 * z1
    if abs(b) < 1e-300:
        return z2
    return -k / b


def landing_estimate(zs: np.ndarray, stride: int) -> complex:
    """Extrapolated landing point from samples spaced ``stride`` grid steps apart."""
    if len(zs) <= 2 * stride:
        return complex(zs[-1])
    z0, z1, z2 = complex(zs[-1 - 2 * stride]), complex(zs[-1 - stride]), complex(zs[-1])
    ratio = abs(z2 - z1) / abs(z1 - z0) if z1 != z0 else 0.0
    if ratio < 0.8:
        return aitken(z0, z1, z2)
    return algebraic_limit(z0, z1, z2)


def trace_cycle(p: MonicPoly, theta: Fraction, s_max: float, s_min: float | None = None,
                params: PotentialParams = DEFAULT_PARAMS, log_s_min: float | None = None,
                kappa: int = KAPPA, landing_tol: float = LANDING_TOL,
                stop_on_landing: bool = True, max_levels: int = 200000) -> dict:
    """Trace every ray of the cycle of ``theta`` from s_max down to s_min.

    Returns {angle: RayTrace}.  ``log_s_min`` overrides ``s_min`` and may be
    far below the smallest double.
    """
    d = p.degree
    angles = angle_cycle(Fraction(theta), d)
    q = len(angles)
    R = params.radius(p)
    if log_s_min is None:
        if s_min is None or not 0 < s_min < s_max:
            raise ValueError("need 0 < s_min < s_max")
        log_s_min = math.log(s_min)
    if not s_max > 0:
        raise ValueError("s_max must be positive")
    S = grid_steps(d, kappa)
    step = math.log(d) / S
    s_need = d * (math.log(R) + 1)
    J = max(0, math.ceil(S * math.log(s_need / s_max) / math.log(d))) if s_max < s_need else 0
    log_top = math.log(s_max) + J * step
    full = list(p.full)
    crit = [(w, eval_with_derivative(full, w)[0]) for w in critical_points(p)]

    zs = [[] for _ in range(q)]
    for j, a in enumerate(angles):
        seed = None
        for k in range(S):
            ls = log_top - k * step
            target = complex(math.exp(ls), 2 * math.pi * float(a))
            z = invert_bottcher(p, target, seed)
            zs[j].append(z)
            seed = z * cmath.exp(complex(math.exp(ls - step) - math.exp(ls), 0))

    status, crash_at, crash_pt = "truncated", None, None
    k = S
    while True:
        ls = log_top - k * step
        if ls < log_s_min - 1e-12 or k - J > max_levels:
            break
        try:
            new = []
            for j in range(q):
                img = zs[(j + 1) % q]
                target, prev_target = img[k - S], img[k - S - 1]
                prev = zs[j][k - 1]
                pred = 2 * prev - zs[j][k - 2]
                hit = _crosses_critical_value(crit, target, prev_target, prev, zs[j][k - 2])
                if hit is not None:
                    raise _Crash(hit)
                new.append(_pullback(full, target, prev_target, prev, pred))
        except _Crash as c:
            status, crash_at, crash_pt = "crashed", math.exp(ls), c.z
            break
        for j in range(q):
            zs[j].append(new[j])
        k += 1
        if stop_on_landing and k - J > LANDING_WINDOW:
            if all(_window_diameter(zs[j][-LANDING_WINDOW:]) < landing_tol for j in range(q)):
                status = "landed"
                break

    out = {}
    stride = q * S
    cps = [w for w, _ in crit]
    for j, a in enumerate(angles):
        arr = np.array(zs[j][J:], dtype=complex)
        logs = log_top - step * np.arange(J, J + len(arr))
        tr = RayTrace(p, a, logs, arr, status, steps_per_level=S, period=q)
        if status == "crashed":
            tr.s_crash = crash_at
            tr.near_critical = min(cps, key=lambda c: abs(c - crash_pt)) if cps else None
        else:
            tr.landing = landing_estimate(arr, stride)
        out[a] = tr
    return out


def trace_ray(p: MonicPoly, theta: Fraction, s_max: float, s_min: float | None = None,
              params: PotentialParams = DEFAULT_PARAMS, **kw) -> RayTrace:
    """R_theta sampled by potential; see :func:`trace_cycle`.

    Raises Crashed when the continuation meets a critical point of G.
    """
    theta = Fraction(theta) % 1
    tr = trace_cycle(p, theta, s_max, s_min, params, **kw)[theta]
    if tr.status == "crashed":
        raise Crashed(f"ray {format_angle(theta)} crashed at s = {tr.s_crash:.6g}",
                      s_crash=tr.s_crash, near_critical=tr.near_critical)
    return tr


def closed_ray_cloud(tr: RayTrace, resolution: float, landing: complex | None = None,
                     to_infinity: bool = True) -> SphereCloud:
    """Closed ray R u {zeta, infinity} with chordal spacing <= resolution.

    With ``to_infinity`` the ray is continued above its top sample by
    inverting the Böttcher coordinate until the chordal gap to infinity
    drops below the resolution; otherwise infinity is simply appended.
    """
    pts = list(tr.z)
    if to_infinity:
        head = []
        ls = float(tr.log_s[0])
        step = float(tr.log_s[0] - tr.log_s[1]) if len(tr.log_s) > 1 else 0.05
        z = complex(tr.z[0])
        while 2 / math.hypot(1, abs(z)) > resolution / 2:
            ls += step
            z = invert_bottcher(tr.poly, complex(math.exp(ls), 2 * math.pi * float(tr.angle)), z * cmath.exp(
                math.exp(ls) - math.exp(ls - step)))
            head.append(z)
        pts = head[::-1] + pts
    end = tr.landing if landing is None else landing
    if end is not None:
        pts.append(end)
    path = densify(pts, 0.75 * resolution)  # thinning below may widen gaps by resolution / 4
    return SphereCloud(np.concatenate([thin_path(path, resolution / 4), [INF]]), resolution)


def thin_path(path: np.ndarray, spacing: float) -> np.ndarray:
    """Drop samples closer than ``spacing`` to the last kept one; the end points stay.

    Slowly landing rays pile up many samples near the landing point, which
    would otherwise dominate the cost of every proximity query.
    """
    if len(path) < 3:
        return path
    x = stereographic(path)
    keep = [0]
    last = x[0]
    for i in range(1, len(path) - 1):
        if np.linalg.norm(x[i] - last) >= spacing:
            keep.append(i)
            last = x[i]
    keep.append(len(path) - 1)
    return path[keep]


def candidate_cycle_points(p: MonicPoly, q: int) -> list:
    """Points of period dividing q (with multiplicity), d^q <= 256."""
    from .invariants import periodic_points_near  # local import avoids a cycle
    return periodic_points_near(p, q, 0j, math.inf)


def land(p: MonicPoly, theta: Fraction, params: PotentialParams = DEFAULT_PARAMS,
         s_min: float = 1e-9, deep_levels: int = 4096, s_max: float | None = None):
    """Landing point of a periodic ray and its classified record.

    The ray is traced to s_min; if it has not landed by then (parabolic
    landing is only algebraic in the level) the trace continues on log
    potentials for up to ``deep_levels`` more factors of d.
    """
    from .invariants import classify_point

    d = p.degree
    theta = Fraction(theta) % 1
    s_top = s_max if s_max is not None else d * (math.log(params.radius(p)) + 1)
    tr = trace_ray(p, theta, s_top, s_min, params)
    if tr.status != "landed":
        tr = trace_ray(p, theta, s_top, None, params,
                       log_s_min=math.log(s_min) - deep_levels * math.log(d))
    zeta = tr.landing
    q = tr.period
    try:
        pt = refine_periodic(p, q, zeta)
        z = pt.point
    except (DegenerateDerivative, NoConvergence):
        if p.degree ** q <= 256:
            cands = candidate_cycle_points(p, q)
            z = min((c for c, _ in cands), key=lambda c: abs(c - zeta))
        else:
            raise NoNearbyPeriodic(f"no periodic point resolved near {zeta}")
    if abs(z - zeta) > 1e-2:
        raise NoNearbyPeriodic(f"refined point {z} is {abs(z - zeta):.3g} from the extrapolate {zeta}")
    period = exact_period(p, z, q, 1e-9 * p.scale)
    return complex(z), classify_point(p, z, period), tr
