"""Hausdorff limits of closed periodic rays along a perturbation family.

The analyzer traces R_n = R_{P_n, theta} for the tail of a family, checks
that the closed rays form a Cauchy sequence of sphere clouds, and then
reads the structure of the final cloud against the limit map P: the Julia
points it meets (fixed points of P^q), the invariant arcs inside parabolic
basins, the heteroclinic/homoclinic split and the tame, semi-wild or wild
verdict with the counting bounds 2N + M# <= d - 1 and its refinement.
"""
from __future__ import annotations

import cmath
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components, dijkstra
from scipy.spatial import cKDTree

from .errors import (
    DegenerateDerivative,
    Inconclusive,
    NoConvergence,
    NotCauchy,
    RangeGuard,
    RayLimitError,
)
from .family import PerturbationFamily
from .hausdorff import INF, CauchyResult, SphereCloud, cauchy_tail, chordal, chordal_pairs, directed_dist, stereographic
from .invariants import FixedPointRecord, classify_point, periodic_points_near
from .polynomial import MonicPoly, angle_period, compose_expanded, evaluate, exact_period, iterate, refine_periodic, taylor_of_iterate
from .potential import DEFAULT_PARAMS, PotentialParams, RayTrace, closed_ray_cloud, green_array, land, trace_ray

G_TOL = 1e-6
LINK_FACTOR = 3.0  # proximity-graph edges below 3 resolutions
EXCLUSION_FACTOR = 10.0  # arcs are cut this many resolutions away from Julia points
DEEP_LEVELS = 20000
FORWARD_CAP = 20000


def merge_tolerance(resolution: float) -> float:
    return max(1e-4, 10 * resolution)


def default_threads() -> int:
    env = os.environ.get("RAYLIMIT_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def _cjson(z) -> list | str:
    z = complex(z)
    if not (math.isfinite(z.real) and math.isfinite(z.imag)):
        return "inf"
    return [z.real, z.imag]


# ---------------------------------------------------------------------------
# data


@dataclass
class LimitArc:
    kind: str  # external_ray, heteroclinic, homoclinic
    samples: np.ndarray
    w_minus: complex
    w_plus: complex
    basin_tag: tuple | None = None  # (julia index of w_plus, attracting direction)

    def to_json(self) -> dict:
        return {
            "kind": self.kind,
            "w_minus": _cjson(self.w_minus),
            "w_plus": _cjson(self.w_plus),
            "basin_tag": list(self.basin_tag) if self.basin_tag is not None else None,
            "samples": [_cjson(z) for z in self.samples],
        }


@dataclass
class BoundReport:
    bb1: tuple  # (lhs, rhs, ok)
    bb2: tuple

    @property
    def ok(self) -> bool:
        return self.bb1[2] and self.bb2[2]

    def to_json(self) -> dict:
        return {name: {"lhs": v[0], "rhs": v[1], "ok": v[2]}
                for name, v in (("bb1", self.bb1), ("bb2", self.bb2))}


@dataclass
class LimitSequence:
    """Traced tail of a family: closed-ray clouds, landing points and the Cauchy test."""
    indices: list
    traces: list
    landings: list
    clouds: list
    cauchy: CauchyResult

    @property
    def cloud(self) -> SphereCloud:
        return self.clouds[-1]


@dataclass
class LimitAnalysis:
    cloud: SphereCloud
    julia_points: list
    arcs: list
    classification: str
    counts: tuple  # (N, M, M_sharp)
    bounds: BoundReport | None
    flags: list = field(default_factory=list)
    zeta: complex = 0j
    zeta_infinity: complex = 0j
    homoclinic_arcs: int = 0
    extra_distance: float = 0.0  # directed distance from the cloud to the limit closed ray
    containment: float = 0.0  # directed distance from the limit closed ray to the cloud
    cauchy: CauchyResult | None = None
    config: dict = field(default_factory=dict)
    sequence: LimitSequence | None = field(default=None, repr=False)  # not serialised

    def to_json(self) -> dict:
        N, M, Ms = self.counts
        out = {
            "classification": self.classification,
            "N": N,
            "M": M,
            "Msharp": Ms,
            "homoclinic_arcs": self.homoclinic_arcs,
            "zeta": _cjson(self.zeta),
            "zeta_infinity": _cjson(self.zeta_infinity),
            "julia_points": [r.to_json() for r in self.julia_points],
            "arcs": [a.to_json() for a in self.arcs],
            "bounds": self.bounds.to_json() if self.bounds is not None else None,
            "flags": list(self.flags),
            "extra_distance": self.extra_distance,
            "containment_distance": self.containment,
        }
        if self.cauchy is not None:
            out["cauchy"] = {"converged": self.cauchy.converged, "index": self.cauchy.index,
                             "tail_diameter": self.cauchy.tail_diameter,
                             "consecutive": self.cauchy.consecutive}
        if self.config:
            out["config"] = self.config
        return out


# ---------------------------------------------------------------------------
# tracing the family


def _trace_member(args):
    p, theta, params, deep_levels, resolution = args
    d = p.degree
    s_top = d * (math.log(params.radius(p)) + 1)
    tr = trace_ray(p, theta, s_top, None, params,
                   log_s_min=math.log(1e-9) - deep_levels * math.log(d))
    zeta = tr.landing
    try:
        zeta = refine_periodic(p, tr.period, zeta).point
        if abs(zeta - tr.landing) > 1e-2:
            zeta = tr.landing
    except (DegenerateDerivative, NoConvergence):
        pass
    return tr, complex(zeta), closed_ray_cloud(tr, resolution, zeta)


def _map(fn, jobs, threads: int):
    if threads <= 1 or len(jobs) <= 1:
        return [fn(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=min(threads, len(jobs))) as pool:
        return list(pool.map(fn, jobs))


def limit_sequence(family: PerturbationFamily, theta: Fraction, schedule_len: int | None = None,
                   resolution: float = 1e-3, tol: float = 0.05,
                   params: PotentialParams = DEFAULT_PARAMS, threads: int | None = None,
                   deep_levels: int = DEEP_LEVELS) -> LimitSequence:
    """Trace the closed rays of the family tail and test them for a Cauchy tail."""
    theta = Fraction(theta) % 1
    if angle_period(theta, family.degree) is None:
        raise ValueError(f"angle {theta} is not periodic under multiplication by {family.degree}")
    n = len(family)
    k = n if schedule_len is None else min(n, schedule_len)
    if k < 3:
        raise ValueError("the schedule needs at least three members")
    idx = list(range(n - k, n))
    jobs = [(family[i], theta, params, deep_levels, resolution) for i in idx]
    threads = default_threads() if threads is None else threads
    try:
        results = _map(_trace_member, jobs, threads)
    except RayLimitError as exc:
        raise type(exc)(f"while tracing the family: {exc}") from exc
    traces = [r[0] for r in results]
    landings = [r[1] for r in results]
    clouds = [r[2] for r in results]
    return LimitSequence(idx, traces, landings, clouds, cauchy_tail(clouds, tol))


def estimate_limit(family: PerturbationFamily, theta: Fraction, schedule_len: int | None = None,
                   resolution: float = 1e-3, tol: float = 0.05,
                   params: PotentialParams = DEFAULT_PARAMS, threads: int | None = None) -> SphereCloud:
    """Final closed-ray cloud of a Cauchy family tail; raises NotCauchy otherwise."""
    seq = limit_sequence(family, theta, schedule_len, resolution, tol, params, threads)
    if not seq.cauchy.converged:
        raise NotCauchy(f"closed rays are not Cauchy at tol {tol:g}; tail diameter "
                        f"{seq.cauchy.tail_diameter:.3g}", seq.cauchy.tail_diameter,
                        seq.cauchy.consecutive)
    return seq.cloud


# ---------------------------------------------------------------------------
# Julia points and arcs


def _periodic_candidates(p: MonicPoly, q: int) -> list:
    """Points of period dividing q (d^q <= 256)."""
    if p.degree ** q > 256:
        raise RangeGuard("Julia point search needs d^q <= 256")
    pts = []
    for z, _ in periodic_points_near(p, q, 0j, math.inf):
        try:
            z = refine_periodic(p, q, z).point
        except (DegenerateDerivative, NoConvergence):
            pass
        pts.append(complex(z))
    return pts


def julia_points(cloud: SphereCloud, p: MonicPoly, q: int, resolution: float | None = None,
                 order_by: RayTrace | None = None) -> list:
    """Non-attracting points of period dividing q met by the cloud, classified.

    Points of the cloud near the Julia set have tiny potential; those that
    lie within merge_tol of a periodic point of P are attributed to it.  With
    ``order_by`` (a ray of the family tail) the records come out in spine
    order, by decreasing potential at the ray's closest approach.
    """
    res = cloud.resolution if resolution is None else resolution
    tol = merge_tolerance(res)
    fin = cloud.finite
    g, _ = green_array(p, fin)
    near = fin[g < G_TOL]
    if len(near) == 0:
        return []
    tree = cKDTree(stereographic(near))
    out = []
    for z in _periodic_candidates(p, q):
        dist, _ = tree.query(stereographic(np.array([z]))[0])
        if dist > tol:
            continue
        if any(abs(z - r.location) < 1e-8 * (1 + abs(z)) for r in out):
            continue
        period = exact_period(p, z, q, 1e-9 * p.scale)
        rec = classify_point(p, z, period)
        if rec.kind == "attracting":
            continue
        out.append(rec)
    if order_by is not None:
        out.sort(key=lambda r: -_closest_log_potential(order_by, r.location))
    return out


def _closest_log_potential(tr: RayTrace, u: complex) -> float:
    d = chordal_pairs(tr.z, np.full(len(tr.z), complex(u)))
    return float(tr.log_s[int(np.argmin(d))])


def attracting_directions(p: MonicPoly, rec: FixedPointRecord) -> np.ndarray:
    """Unit attracting directions of P^{period k} at a parabolic point."""
    if rec.kind != "parabolic":
        return np.zeros(0, dtype=complex)
    n = rec.period * rec.rotation_order
    m = rec.multiplicity
    a = taylor_of_iterate(p, n, rec.location, m)[m]
    base = (math.pi - cmath.phase(a)) / (m - 1)
    return np.exp(1j * (base + 2 * math.pi * np.arange(m - 1) / (m - 1)))


def _forward_limit(p: MonicPoly, q: int, z: complex, targets: Sequence[complex], radius: float):
    """Iterate P^q from z until it enters the ``radius`` ball of a target; (index, point)."""
    full = p.full
    for _ in range(FORWARD_CAP):
        for i, t in enumerate(targets):
            if chordal(z, t) < radius:
                return i, z
        for _ in range(q):
            z = complex(np.polyval(full[::-1], z))
        if not math.isfinite(abs(z)) or abs(z) > 1e8:
            return None, z
    return None, z


def _order_component(pts: np.ndarray, edges_i, edges_j, weights) -> np.ndarray:
    n = len(pts)
    if n <= 2:
        return np.arange(n)
    g = coo_matrix((weights, (edges_i, edges_j)), shape=(n, n)).tocsr()
    d0 = dijkstra(g, directed=False, indices=0)
    a = int(np.argmax(np.where(np.isfinite(d0), d0, -1)))
    da = dijkstra(g, directed=False, indices=a)
    return np.argsort(np.where(np.isfinite(da), da, np.inf), kind="stable")


def _components(pts: np.ndarray, link: float) -> list:
    """Connected components of the chordal proximity graph, each ordered along its arc."""
    if len(pts) == 0:
        return []
    x = stereographic(pts)
    tree = cKDTree(x)
    pairs = tree.query_pairs(link, output_type="ndarray")
    n = len(pts)
    if len(pairs):
        w = np.linalg.norm(x[pairs[:, 0]] - x[pairs[:, 1]], axis=1) + 1e-15
        adj = coo_matrix((w, (pairs[:, 0], pairs[:, 1])), shape=(n, n))
    else:
        adj = coo_matrix((n, n))
    ncomp, labels = connected_components(adj, directed=False)
    comps = []
    for c in range(ncomp):
        idx = np.flatnonzero(labels == c)
        local = {g: i for i, g in enumerate(idx)}
        mask = np.isin(pairs[:, 0], idx) if len(pairs) else np.zeros(0, bool)
        sub = pairs[mask] if len(pairs) else pairs
        ei = np.array([local[a] for a in sub[:, 0]], dtype=int) if len(sub) else np.zeros(0, int)
        ej = np.array([local[b] for b in sub[:, 1]], dtype=int) if len(sub) else np.zeros(0, int)
        ww = np.linalg.norm(x[sub[:, 0]] - x[sub[:, 1]], axis=1) + 1e-15 if len(sub) else np.zeros(0)
        order = _order_component(pts[idx], ei, ej, ww)
        comps.append(pts[idx][order])
    # deterministic order: by the first sample
    comps.sort(key=lambda c: (round(c[0].real, 12), round(c[0].imag, 12), len(c)))
    return comps


def _escaped(p: MonicPoly, pts: np.ndarray, params: PotentialParams) -> np.ndarray:
    _, count = green_array(p, pts, params)
    return count >= 0


def segment_arcs(cloud: SphereCloud, julia: list, p: MonicPoly, q: int,
                 params: PotentialParams = DEFAULT_PARAMS, flags: list | None = None,
                 member: MonicPoly | None = None) -> list:
    """Split the cloud into the external ray and the invariant arcs in parabolic basins.

    A point counts as interior when its orbit never escapes: near a parabolic
    landing point the potential on the ray itself falls below G_TOL, so the
    escape status, not the potential, separates the ray from the basins.
    Backward orbits run under ``member``, the map whose ray produced the
    cloud, since only that map leaves the cloud invariant.
    """
    if not julia:
        raise ValueError("segment_arcs needs at least one Julia point")
    flags = [] if flags is None else flags
    res = cloud.resolution
    tol = merge_tolerance(res)
    excl = EXCLUSION_FACTOR * res
    link = LINK_FACTOR * res
    fin = cloud.finite
    locs = np.array([r.location for r in julia], dtype=complex)
    dmin = np.min(np.stack([chordal_pairs(fin, np.full(len(fin), u)) for u in locs]), axis=0)
    keep = fin[dmin > excl]
    esc = _escaped(p, keep, params)
    arcs = []
    ray_pts = keep[esc]
    if len(ray_pts):
        g, _ = green_array(p, ray_pts, params)
        arcs.append(LimitArc("external_ray", ray_pts[np.argsort(-g, kind="stable")], INF, julia[0].location))
    member = p if member is None else member
    full_q = compose_expanded(member, q) if q > 1 else member.full.copy()
    back = (full_q, cKDTree(stereographic(fin)), 2 * LINK_FACTOR * res)
    for comp in _components(keep[~esc], link):
        if len(comp) < 3:
            flags.append("isolated_interior_points")
            continue
        arcs.append(_describe_arc(comp, julia, locs, p, q, excl, tol, flags, back))
    return arcs


def _match(z: complex, locs: np.ndarray, radius: float):
    d = chordal_pairs(locs, np.full(len(locs), z))
    i = int(np.argmin(d))
    return i if d[i] <= radius else None


def _backward_limit(comp_full: np.ndarray, tree: cKDTree, z: complex, targets: np.ndarray,
                    radius: float, tube: float, max_steps: int = FORWARD_CAP):
    """Follow P^q backwards from z along the cloud; (index of the target reached, point).

    Each step takes the preimage under P^q nearest to the cloud; the walk
    stops at a target ball or when no preimage stays within ``tube``.
    """
    f = comp_full.copy()
    for _ in range(max_steps):
        i = _match(z, targets, radius)
        if i is not None:
            return i, z
        f[0] = comp_full[0] - z
        roots = np.roots(f[::-1])
        dist, _ = tree.query(stereographic(roots))
        j = int(np.argmin(dist))
        if dist[j] > tube:
            return None, z
        z = complex(roots[j])
    return None, z


def _describe_arc(comp: np.ndarray, julia: list, locs: np.ndarray, p: MonicPoly, q: int,
                  excl: float, tol: float, flags: list, back) -> LimitArc:
    mid = comp[len(comp) // 2]
    hit, z_last = _forward_limit(p, q, mid, locs, excl)
    low, _ = _backward_limit(*back[:2], mid, locs, excl, back[2])
    reach = excl + 2 * LINK_FACTOR * (excl / EXCLUSION_FACTOR)
    ends = [_match(comp[0], locs, reach), _match(comp[-1], locs, reach)]
    if hit is None:
        flags.append("arc_not_attracted")
        parabolic = [e for e in ends if e is not None and julia[e].kind == "parabolic"]
        hit = parabolic[0] if parabolic else ends[1]
    if low is None:
        flags.append("orphan_arc")
        others = [e for e in ends if e is not None and e != hit]
        low = others[0] if others else None
    # orient the samples from w_minus towards w_plus
    if hit is not None and ends[0] == hit and ends[1] != hit:
        comp = comp[::-1]
    w_plus = julia[hit].location if hit is not None else comp[-1]
    w_minus = julia[low].location if low is not None else comp[0]
    tag = None
    if hit is not None and julia[hit].kind == "parabolic":
        dirs = attracting_directions(p, julia[hit])
        v = z_last - julia[hit].location
        if len(dirs) and v != 0:
            tag = (int(hit), int(np.argmin(np.abs(np.angle(v / abs(v) / dirs)))))
    if chordal(w_minus, w_plus) > tol:
        kind = "heteroclinic"
    else:
        kind = "homoclinic"
        if hit is None or julia[hit].kind != "parabolic":
            flags.append("homoclinic_off_parabolic")
    return LimitArc(kind, comp, complex(w_minus), complex(w_plus), tag)


# ---------------------------------------------------------------------------
# counting and classification


def _tag_orbit(p: MonicPoly, julia: list, tag: tuple, q: int) -> set:
    """Images of a basin tag (point, direction) under P until the cycle closes."""
    rec = julia[tag[0]]
    u = rec.location
    dirs = attracting_directions(p, rec)
    v = dirs[tag[1]]
    out = {(_key(u), tag[1])}
    n = rec.period * max(rec.rotation_order, 1)
    for _ in range(n * len(dirs) + 1):
        d1 = complex(evaluate(p, u, 1))
        u2 = complex(evaluate(p, u))
        rec2 = classify_point(p, u2, rec.period)
        dirs2 = attracting_directions(p, rec2)
        w = d1 * v
        j = int(np.argmin(np.abs(np.angle(w / abs(w) / dirs2))))
        key = (_key(u2), j)
        if key in out:
            break
        out.add(key)
        u, v, rec = u2, dirs2[j], rec2
    return out


def _key(u: complex) -> tuple:
    return (round(u.real, 6), round(u.imag, 6))


def earring_counts(p: MonicPoly, julia: list, arcs: list, q: int) -> tuple:
    """(M, M_sharp): earrings by basin tag, equivalence classes by direction orbits."""
    tags = sorted({a.basin_tag for a in arcs if a.kind == "homoclinic" and a.basin_tag is not None})
    M = len(tags)
    classes = []
    for t in tags:
        key = (_key(julia[t[0]].location), t[1])
        for cls in classes:
            if key in cls:
                break
        else:
            classes.append(_tag_orbit(p, julia, t, q))
    return M, len(classes)


def check_bounds(counts: tuple, d: int, p_period: int, q: int, nu: int) -> BoundReport:
    """2N + M# <= d - 1 and 2N + M <= d - 1 + (q/p - 1) nu."""
    N, M, Ms = counts
    lhs1, rhs1 = 2 * N + Ms, d - 1
    lhs2 = 2 * N + M
    rhs2 = d - 1 + (Fraction(q, p_period) - 1) * nu
    rhs2 = int(rhs2) if rhs2.denominator == 1 else float(rhs2)
    return BoundReport((lhs1, rhs1, lhs1 <= rhs1), (lhs2, rhs2, lhs2 <= rhs2))


def classify(analysis: LimitAnalysis, p: MonicPoly, q: int, limit_cloud: SphereCloud) -> LimitAnalysis:
    """Fill counts, verdict, bounds and sanity flags of a segmented analysis."""
    res = analysis.cloud.resolution
    tol = merge_tolerance(res)
    arcs, julia = analysis.arcs, analysis.julia_points
    flags = analysis.flags
    # fragments of one connection share their end points
    N = len({(_key(a.w_minus), _key(a.w_plus)) for a in arcs if a.kind == "heteroclinic"})
    homs = [a for a in arcs if a.kind == "homoclinic"]
    M, Ms = earring_counts(p, julia, arcs, q)
    analysis.counts = (N, M, Ms)
    analysis.homoclinic_arcs = len(homs)
    gap = chordal(analysis.zeta, analysis.zeta_infinity)
    analysis.extra_distance = directed_dist(analysis.cloud, limit_cloud)
    analysis.containment = directed_dist(limit_cloud, analysis.cloud)
    tame_cloud = analysis.extra_distance < 2 * res
    if tol / 2 < gap < 2 * tol:
        flags.append("zeta_gap_borderline")
        verdict = "indeterminate"
    elif N >= 1 and gap > tol:
        verdict = "wild"
    elif N == 0 and gap <= tol and M >= 1:
        verdict = "semi_wild"
    elif N == 0 and gap <= tol and M == 0 and tame_cloud:
        verdict = "tame"
    else:
        flags.append("trichotomy_mismatch")
        verdict = "indeterminate"
    analysis.classification = verdict
    if analysis.containment > 2 * res:
        flags.append("limit_ray_not_contained")
    het_tags = {a.basin_tag for a in arcs if a.kind == "heteroclinic" and a.basin_tag is not None}
    if any(a.basin_tag in het_tags for a in homs):
        flags.append("earring_shares_heteroclinic_basin")
    zi = analysis.zeta_infinity
    for tag in {a.basin_tag for a in homs}:
        group = [a for a in homs if a.basin_tag == tag]
        if len(group) > 1 and chordal(group[0].w_plus, zi) > tol:
            flags.append("multi_homoclinic_earring_off_zeta_infinity")
    # bounds use the period and degeneracy of zeta_infinity
    rec = min(julia, key=lambda r: abs(r.location - zi)) if julia else None
    if rec is not None and chordal(rec.location, zi) <= tol:
        analysis.bounds = check_bounds(analysis.counts, p.degree, rec.period, q, rec.degeneracy)
    else:
        flags.append("zeta_infinity_not_resolved")
        analysis.bounds = check_bounds(analysis.counts, p.degree, q, q, 0)
    if not analysis.bounds.bb1[2]:
        flags.append("bb1_violated")
    if not analysis.bounds.bb2[2]:
        flags.append("bb2_violated")
    return analysis


def _spine_order(julia: list, arcs: list, zeta: complex) -> list:
    """zeta first, then back along the heteroclinics to zeta_infinity."""
    if not julia:
        return julia
    locs = np.array([r.location for r in julia])
    cur = int(np.argmin(np.abs(locs - zeta)))
    order = [cur]
    het = [a for a in arcs if a.kind == "heteroclinic"]
    while True:
        nxt = None
        for a in het:
            if abs(a.w_plus - julia[cur].location) < 1e-9 * (1 + abs(a.w_plus)):
                j = int(np.argmin(np.abs(locs - a.w_minus)))
                if j not in order:
                    nxt = j
                    break
        if nxt is None:
            break
        order.append(nxt)
        cur = nxt
    order += [i for i in range(len(julia)) if i not in order]
    return [julia[i] for i in order]


def analyze(family: PerturbationFamily, theta: Fraction, schedule_len: int | None = None,
            resolution: float = 1e-3, tol: float = 0.05, params: PotentialParams = DEFAULT_PARAMS,
            threads: int | None = None, subsequence: Sequence[int] | None = None,
            require_cauchy: bool = True, deep_levels: int = DEEP_LEVELS) -> LimitAnalysis:
    """Full analysis of lim closed R_{P_n, theta} for the family tail."""
    theta = Fraction(theta) % 1
    fam = family.subsequence(subsequence) if subsequence is not None else family
    seq = limit_sequence(fam, theta, schedule_len, resolution, tol, params, threads, deep_levels)
    flags = []
    if not seq.cauchy.converged:
        if require_cauchy:
            raise NotCauchy(f"closed rays are not Cauchy at tol {tol:g}; tail diameter "
                            f"{seq.cauchy.tail_diameter:.3g}", seq.cauchy.tail_diameter,
                            seq.cauchy.consecutive)
        flags.append("not_cauchy")
    P = fam.limit
    d = P.degree
    q = angle_period(theta, d)
    zeta, zrec, ltrace = land(P, theta, params)
    limit_cloud = closed_ray_cloud(ltrace, resolution, zeta)
    cloud = seq.cloud
    julia = julia_points(cloud, P, q, resolution, order_by=seq.traces[-1])
    if not any(abs(r.location - zeta) < 1e-6 * (1 + abs(zeta)) for r in julia):
        julia.insert(0, zrec)
        flags.append("zeta_added")
    zi_n = seq.landings[-1]
    locs = [r.location for r in julia]
    zi = min(locs, key=lambda u: chordal(u, zi_n))
    if chordal(zi, zi_n) > merge_tolerance(resolution):
        flags.append("zeta_infinity_far_from_julia_points")
        zi = zi_n
    # the ray lands at zeta, so it opens the list
    julia.sort(key=lambda r: 0 if abs(r.location - zeta) < 1e-6 * (1 + abs(zeta)) else 1)
    arcs = segment_arcs(cloud, julia, P, q, params, flags, member=fam[seq.indices[-1]])
    julia = _spine_order(julia, arcs, zeta)
    arcs = _retag(arcs, julia)
    config = {"angle": f"{theta.numerator}/{theta.denominator}", "resolution": resolution,
              "tol": tol, "schedule_len": schedule_len, "members": seq.indices,
              "deep_levels": deep_levels}
    out = LimitAnalysis(cloud, julia, arcs, "indeterminate", (0, 0, 0), None, flags,
                        complex(zeta), complex(zi), cauchy=seq.cauchy, config=config, sequence=seq)
    return classify(out, P, q, limit_cloud)


def _retag(arcs: list, julia: list) -> list:
    """Recompute julia indices in basin tags after reordering the records."""
    locs = np.array([r.location for r in julia])
    for a in arcs:
        if a.basin_tag is not None:
            a.basin_tag = (int(np.argmin(np.abs(locs - a.w_plus))), a.basin_tag[1])
    return arcs


# ---------------------------------------------------------------------------
# intrinsic potential order


def potential_order(traces: Sequence[RayTrace], u: complex, u2: complex, tail: int = 3,
                    resolution: float = 1e-3):
    """Compare two limit points by the potentials at which the rays R_n pass them.

    Returns ("less",), ("greater",) or ("same_arc", c) where c is the limit
    of s_n(u)/s_n(u2).  Raises Inconclusive when the tail does not settle.
    """
    if len(traces) < tail:
        raise ValueError("need at least `tail` traces")
    logs = []
    for tr in traces[-tail:]:
        du = chordal_pairs(tr.z, np.full(len(tr.z), complex(u)))
        dv = chordal_pairs(tr.z, np.full(len(tr.z), complex(u2)))
        i, j = int(np.argmin(du)), int(np.argmin(dv))
        if du[i] > 20 * resolution or dv[j] > 20 * resolution:
            raise Inconclusive("a point is not approached by the traced rays")
        logs.append(_refined_log_s(tr, i, u) - _refined_log_s(tr, j, u2))
    L = np.array(logs)
    steps = np.diff(L)
    if np.all(np.abs(steps) < 0.05) and abs(L[-1]) < 700:
        return ("same_arc", float(math.exp(L[-1])))
    if np.all(L < math.log(0.5)) and np.all(steps < 0):
        return ("less",)
    if np.all(L > math.log(2)) and np.all(steps > 0):
        return ("greater",)
    raise Inconclusive(f"potential ratio tail {np.round(np.exp(L), 4).tolist()} does not settle")


def _refined_log_s(tr: RayTrace, i: int, u: complex) -> float:
    """log s of the closest approach, interpolated between neighbouring samples."""
    z, ls = tr.z, tr.log_s
    if 0 < i < len(z) - 1:
        a, b = (i - 1, i) if abs(z[i - 1] - u) < abs(z[i + 1] - u) else (i, i + 1)
        seg = z[b] - z[a]
        if seg != 0:
            t = min(1.0, max(0.0, ((u - z[a]) * np.conj(seg)).real / abs(seg) ** 2))
            return float(ls[a] + t * (ls[b] - ls[a]))
    return float(ls[i])
