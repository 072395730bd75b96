"""Escape-time pictures of filled Julia sets with ray and limit overlays.

Pixels whose potential stays below G_RENDER_TOL, or whose orbit does not
escape within the iteration budget, are black.  The rest are coloured by a
smooth escape value derived from the potential, so the picture is a
function of G alone and does not depend on the escape radius.
"""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .polynomial import MonicPoly
from .potential import PotentialParams, green_array

G_RENDER_TOL = 1e-3

# fixed palette, cycled along the smooth escape value
PALETTE = np.array([
    (255, 255, 255),
    (255, 204, 102),
    (230, 120, 40),
    (150, 40, 60),
    (60, 30, 110),
    (40, 90, 170),
    (110, 180, 220),
    (210, 235, 245),
], dtype=float)
PALETTE_PERIOD = 4.0  # escape-value units per palette cycle


@dataclass(frozen=True)
class Viewport:
    center: complex
    width: float
    pixels_x: int
    pixels_y: int

    def __post_init__(self):
        if self.pixels_x < 1 or self.pixels_y < 1:
            raise ValueError("pixel counts must be positive")
        if not self.width > 0:
            raise ValueError("width must be positive")

    @property
    def pixel_size(self) -> float:
        return self.width / self.pixels_x

    @property
    def height(self) -> float:
        return self.pixel_size * self.pixels_y

    def row(self, j: int) -> np.ndarray:
        """Pixel centres of row j; row 0 is the top of the picture."""
        h = self.pixel_size
        x = self.center.real - self.width / 2 + h * (np.arange(self.pixels_x) + 0.5)
        y = self.center.imag + self.height / 2 - h * (j + 0.5)
        return x + 1j * y

    def grid(self) -> np.ndarray:
        return np.stack([self.row(j) for j in range(self.pixels_y)])

    def to_pixel(self, z: complex) -> tuple:
        """Continuous pixel coordinates (column, row) of z; pixel centres sit at half-integers."""
        h = self.pixel_size
        u = (z.real - (self.center.real - self.width / 2)) / h
        v = ((self.center.imag + self.height / 2) - z.imag) / h
        return u, v


def smooth_value(g: np.ndarray, d: int) -> np.ndarray:
    """log_d(1/G): the continuous escape count, up to an additive constant."""
    return -np.log(g) / math.log(d)


def colorize(g: np.ndarray, d: int) -> np.ndarray:
    out = np.zeros(g.shape + (3,), dtype=np.uint8)
    lit = g >= G_RENDER_TOL
    if not lit.any():
        return out
    nu = smooth_value(g[lit], d) / PALETTE_PERIOD * len(PALETTE)
    nu = np.mod(nu, len(PALETTE))
    i = np.floor(nu).astype(int)
    f = (nu - i)[:, None]
    rgb = PALETTE[i] * (1 - f) + PALETTE[(i + 1) % len(PALETTE)] * f
    out[lit] = np.clip(np.rint(rgb), 0, 255).astype(np.uint8)
    return out


def _render_rows(args):
    p, vp, rows, max_iter, params = args
    z = np.stack([vp.row(j) for j in rows])
    g, count = green_array(p, z, params, iter_cap=max_iter)
    g = np.where(count < 0, 0.0, g)
    return colorize(g, p.degree)


def render_julia(p: MonicPoly, vp: Viewport, max_iter: int = 256, threads: int = 1,
                 params: PotentialParams = PotentialParams()) -> np.ndarray:
    """RGB image (rows, columns, 3) of uint8; the filled Julia set is black.

    With max_iter = 0 no iteration is performed and every pixel is black.
    """
    img = np.zeros((vp.pixels_y, vp.pixels_x, 3), dtype=np.uint8)
    if max_iter <= 0:
        return img
    block = max(1, math.ceil(vp.pixels_y / max(1, 4 * threads)))
    jobs = [(p, vp, list(range(a, min(a + block, vp.pixels_y))), max_iter, params)
            for a in range(0, vp.pixels_y, block)]
    if threads <= 1 or len(jobs) == 1:
        parts = [_render_rows(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(_render_rows, jobs))
    # blocks come back in submission order
    return np.concatenate(parts, axis=0)


def _splat(acc: np.ndarray, u: float, v: float) -> None:
    """Bilinear coverage of a point at continuous pixel coordinates (u, v)."""
    x, y = u - 0.5, v - 0.5
    i0, j0 = math.floor(x), math.floor(y)
    fx, fy = x - i0, y - j0
    h, w = acc.shape
    for dj, wy in ((0, 1 - fy), (1, fy)):
        for di, wx in ((0, 1 - fx), (1, fx)):
            i, j = i0 + di, j0 + dj
            if 0 <= i < w and 0 <= j < h:
                acc[j, i] = max(acc[j, i], wx * wy)


def overlay_path(img: np.ndarray, vp: Viewport, path: Sequence[complex],
                 color: tuple = (255, 0, 0), step: float = 0.25) -> np.ndarray:
    """Draw an anti-aliased polyline; infinite points break it, off-screen parts are clipped."""
    out = img.copy()
    pts = [complex(z) for z in path]
    if not pts:
        return out
    acc = np.zeros(img.shape[:2], dtype=float)
    # generous bound so huge coordinates never reach the rasteriser
    lim = 4 * max(vp.pixels_x, vp.pixels_y)
    prev = None
    for z in pts:
        if not (math.isfinite(z.real) and math.isfinite(z.imag)):
            prev = None
            continue
        u, v = vp.to_pixel(z)
        if prev is None:
            if abs(u) < lim and abs(v) < lim:
                _splat(acc, u, v)
        else:
            pu, pv = prev
            if max(abs(u), abs(v), abs(pu), abs(pv)) < lim:
                n = max(1, int(math.ceil(math.hypot(u - pu, v - pv) / step)))
                for k in range(1, n + 1):
                    t = k / n
                    _splat(acc, pu + t * (u - pu), pv + t * (v - pv))
        prev = (u, v)
    a = acc[..., None]
    col = np.array(color, dtype=float)
    out[:] = np.clip(np.rint(out * (1 - a) + col * a), 0, 255).astype(np.uint8)
    return out


def ppm_bytes(img: np.ndarray) -> bytes:
    img = np.ascontiguousarray(img, dtype=np.uint8)
    if img.ndim != 3 or img.shape[2] != 3:
        raise ValueError("expected an RGB image of shape (rows, columns, 3)")
    h, w = img.shape[:2]
    return f"P6\n{w} {h}\n255\n".encode("ascii") + img.tobytes()


def write_ppm(img: np.ndarray, path) -> None:
    with open(path, "wb") as fh:
        fh.write(ppm_bytes(img))


def read_ppm(data: bytes) -> np.ndarray:
    """Inverse of ppm_bytes for the exact header it writes."""
    parts = data.split(b"\n", 3)
    if parts[0] != b"P6" or parts[2] != b"255":
        raise ValueError("not a P6 image with maxval 255")
    w, h = map(int, parts[1].split())
    return np.frombuffer(parts[3], dtype=np.uint8).reshape(h, w, 3)
