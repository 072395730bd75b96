"""Sequences of monic polynomials P_n converging to a limit map P."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .polynomial import MonicPoly, evaluate


def _add_constant(p: MonicPoly, eps: complex) -> MonicPoly:
    cs = list(p.coeffs)
    cs[0] += eps
    return MonicPoly.from_coeffs(cs)


def power_map(lam: complex, d: int) -> MonicPoly:
    """lam z + z^d."""
    cs = [0j] * d
    cs[1] = lam
    return MonicPoly.from_coeffs(cs)


def q_map(lam: complex, d: int) -> MonicPoly:
    """w (lam + w)^{d-1} expanded."""
    full = np.zeros(d + 1, dtype=complex)
    for k in range(d):
        # w * C(d-1, k) lam^{d-1-k} w^k
        full[k + 1] = math.comb(d - 1, k) * lam ** (d - 1 - k)
    return MonicPoly.from_full(full)


def linear_shift(base: MonicPoly, z0: complex, lam: complex) -> MonicPoly:
    """base(z) + (lam - base'(z0))(z - z0): same z0 image, multiplier lam at z0."""
    delta = complex(lam) - complex(evaluate(base, z0, 1))
    cs = list(base.coeffs)
    cs[1] += delta
    cs[0] -= delta * z0
    return MonicPoly.from_coeffs(cs)


def horocycle(a: float, ts: Sequence[float]) -> list:
    """Multipliers 1 + 1/(1/(2a) + i t) on the circle |lam - (1 + a)| = a.

    They tend to the tangency point 1 as |t| grows, with
    Re 1/(1 - lam) = -1/(2a) constant along the circle.
    """
    return [1 + 1 / (1 / (2 * a) + 1j * t) for t in ts]


@dataclass
class PerturbationFamily:
    kind: str  # additive, multiplier_path, explicit
    members: list
    limit: MonicPoly
    params: list = field(default_factory=list)
    spec: dict = field(default_factory=dict)
    builder: Callable | None = None

    def __len__(self):
        return len(self.members)

    def __getitem__(self, i):
        return self.members[i]

    @property
    def degree(self) -> int:
        return self.limit.degree

    def at(self, param) -> MonicPoly:
        """Member for an arbitrary parameter value (not for explicit families)."""
        if self.builder is None:
            raise ValueError("explicit families have no parameter")
        return self.builder(param)

    def subsequence(self, indices: Sequence[int]) -> "PerturbationFamily":
        return PerturbationFamily(self.kind, [self.members[i] for i in indices], self.limit,
                                  [self.params[i] for i in indices] if self.params else [],
                                  dict(self.spec, indices=list(indices)), self.builder)

    def coefficient_distances(self) -> list:
        lim = self.limit.full
        return [float(np.max(np.abs(m.full - lim))) for m in self.members]

    def converges(self, tail: int = 3) -> bool:
        """Coefficient distance to the limit is non-increasing along the tail."""
        dist = self.coefficient_distances()[-tail:]
        return all(b <= a * (1 + 1e-12) for a, b in zip(dist, dist[1:]))

    def to_json(self) -> dict:
        return dict(self.spec) if self.spec else {
            "kind": "explicit",
            "members": [m.to_json() for m in self.members],
            "limit": self.limit.to_json(),
        }

    # -- constructors -------------------------------------------------------

    @classmethod
    def additive(cls, base: MonicPoly, eps_schedule: Sequence[complex]) -> "PerturbationFamily":
        spec = {"kind": "additive", "poly": base.to_json(),
                "schedule": [_cjson(e) for e in eps_schedule]}
        return cls("additive", [_add_constant(base, e) for e in eps_schedule], base,
                   list(eps_schedule), spec, lambda e: _add_constant(base, e))

    @classmethod
    def multiplier_path(cls, builder: str, lambdas: Sequence[complex], degree: int | None = None,
                        base: MonicPoly | None = None, z0: complex = 0j) -> "PerturbationFamily":
        if builder == "power":
            fn = lambda lam: power_map(lam, degree)
        elif builder == "hawaiian_q":
            fn = lambda lam: q_map(lam, degree)
        elif builder == "linear":
            if base is None:
                raise ValueError("the linear builder needs a base polynomial")
            lam0 = complex(evaluate(base, z0, 1))
            fn = lambda lam: linear_shift(base, z0, lam)
        else:
            raise ValueError(f"unknown multiplier builder {builder!r}")
        spec = {"kind": "multiplier_path", "builder": builder,
                "lambdas": [_cjson(x) for x in lambdas]}
        if degree is not None:
            spec["degree"] = degree
        if base is not None:
            spec["poly"] = base.to_json()
            spec["z0"] = _cjson(z0)
            limit = linear_shift(base, z0, lam0)
        else:
            limit = fn(1.0)
        return cls("multiplier_path", [fn(x) for x in lambdas], limit, list(lambdas), spec, fn)

    @classmethod
    def explicit(cls, members: Sequence[MonicPoly], limit: MonicPoly | None = None) -> "PerturbationFamily":
        members = list(members)
        limit = members[-1] if limit is None else limit
        spec = {"kind": "explicit", "members": [m.to_json() for m in members], "limit": limit.to_json()}
        return cls("explicit", members, limit, [], spec)

    @classmethod
    def from_json(cls, obj: dict) -> "PerturbationFamily":
        kind = obj.get("kind")
        if kind == "additive":
            fam = cls.additive(MonicPoly.from_json(obj["poly"]), [_cparse(e) for e in obj["schedule"]])
        elif kind == "multiplier_path":
            if "lambdas" in obj:
                lams = [_cparse(x) for x in obj["lambdas"]]
            elif "horocycle" in obj:
                h = obj["horocycle"]
                lams = horocycle(float(h["a"]), [float(t) for t in h["t"]])
            elif "radial" in obj:
                lams = [1 + 1 / float(n) for n in obj["radial"]]
            else:
                raise ValueError("multiplier_path needs lambdas, horocycle or radial")
            base = MonicPoly.from_json(obj["poly"]) if "poly" in obj else None
            fam = cls.multiplier_path(obj["builder"], lams, obj.get("degree"), base,
                                      _cparse(obj.get("z0", 0)))
            fam.spec = dict(obj)
        elif kind == "explicit":
            members = [MonicPoly.from_json(m) for m in obj["members"]]
            limit = MonicPoly.from_json(obj["limit"]) if "limit" in obj else None
            fam = cls.explicit(members, limit)
        else:
            raise ValueError(f"unknown family kind {kind!r}")
        if "indices" in obj:
            fam = fam.subsequence(obj["indices"])
        return fam


def _cjson(z) -> list:
    z = complex(z)
    return [z.real, z.imag]


def _cparse(v) -> complex:
    if isinstance(v, (list, tuple)):
        return complex(float(v[0]), float(v[1]))
    return complex(v)
