"""Deterministic weighted sampling of analytic faces and edges."""

from __future__ import annotations

import math
from collections import OrderedDict

import numpy as np

from ..brep import EDGE_SAMPLES, FACE_SAMPLES

_POOL = 1600
_LLOYD_ITERS = 8
_CACHE: OrderedDict = OrderedDict()
_CACHE_SIZE = 4096


def canonical_sign(d: np.ndarray) -> np.ndarray:
    nz = np.flatnonzero(np.abs(d) > 1e-12)
    return -d if nz.size and d[nz[0]] < 0 else d


def perpendicular_basis(n: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Right-handed (u, v) with u x v = n; u built from the world axis least aligned with n."""
    helper = np.zeros(3)
    helper[int(np.argmin(np.abs(n)))] = 1.0
    u = helper - n * float(n @ helper)
    u /= np.linalg.norm(u)
    v = np.cross(n, u)
    return u, v


# -- planar regions ----------------------------------------------------------
# A region is (outer, inners); each boundary is ("poly", (k,2) array) or
# ("circle", (cx, cy, r)) in plane-local 2D coordinates.


def _inside_poly(pts: np.ndarray, poly: np.ndarray) -> np.ndarray:
    x, y = pts[:, 0], pts[:, 1]
    inside = np.zeros(len(pts), dtype=bool)
    n = len(poly)
    for k in range(n):
        x0, y0 = poly[k]
        x1, y1 = poly[(k + 1) % n]
        crosses = (y0 > y) != (y1 > y)
        with np.errstate(divide="ignore", invalid="ignore"):
            xint = x0 + (y - y0) * (x1 - x0) / (y1 - y0)
        inside ^= crosses & (x < xint)
    return inside


def _inside(pts: np.ndarray, boundary) -> np.ndarray:
    kind, data = boundary
    if kind == "poly":
        return _inside_poly(pts, np.asarray(data))
    cx, cy, r = data
    return (pts[:, 0] - cx) ** 2 + (pts[:, 1] - cy) ** 2 < r * r


def boundary_area(boundary) -> float:
    kind, data = boundary
    if kind == "poly":
        p = np.asarray(data)
        x, y = p[:, 0], p[:, 1]
        return 0.5 * abs(float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1))))
    return math.pi * data[2] ** 2


def region_area(outer, inners) -> float:
    return boundary_area(outer) - sum(boundary_area(b) for b in inners)


def boundary_moment(boundary) -> np.ndarray:
    """First area moment (area times centroid) of a simple polygon or disc."""
    kind, data = boundary
    if kind == "circle":
        return math.pi * data[2] ** 2 * np.array(data[:2], dtype=np.float64)
    p = np.asarray(data, dtype=np.float64)
    x, y = p[:, 0], p[:, 1]
    xn, yn = np.roll(x, -1), np.roll(y, -1)
    cross = x * yn - xn * y
    m = np.array([((x + xn) * cross).sum(), ((y + yn) * cross).sum()]) / 6.0
    return m if cross.sum() >= 0 else -m


def region_moment(outer, inners) -> np.ndarray:
    return boundary_moment(outer) - sum((boundary_moment(b) for b in inners), np.zeros(2))


def _match_moments(pts: np.ndarray, w: np.ndarray, area: float, moment: np.ndarray) -> np.ndarray:
    """Smallest relative change to ``w`` giving exact total area and centroid."""
    X = np.vstack([np.ones(len(pts)), pts.T])
    r = np.concatenate([[area], moment]) - X @ w
    WX = X * w
    try:
        dw = WX.T @ np.linalg.solve(WX @ X.T, r)
    except np.linalg.LinAlgError:
        return w
    out = w + dw
    return out if np.all(out > 0.5 * w) else w


def _bounds(boundary):
    kind, data = boundary
    if kind == "poly":
        p = np.asarray(data)
        return p.min(axis=0), p.max(axis=0)
    cx, cy, r = data
    return np.array([cx - r, cy - r]), np.array([cx + r, cy + r])


def _region_key(outer, inners) -> bytes:
    parts = []
    for kind, data in [outer, *inners]:
        parts.append(kind.encode())
        parts.append(np.asarray(data, dtype=np.float64).tobytes())
    return b"|".join(parts)


def sample_region(outer, inners, n: int = FACE_SAMPLES) -> tuple[np.ndarray, np.ndarray, float]:
    """(samples (n,2), weights (n,), exact area) for a planar region.

    A regular pool of points covering the region is clustered into ``n``
    cells (farthest-point initialisation, then Lloyd iterations); samples are
    the cell centroids and weights the cell shares of the exact area, nudged
    so the weighted sample centroid is the exact region centroid (skipped on
    thin strips, where that would need more than halving a weight).
    """
    key = _region_key(outer, inners)
    hit = _CACHE.get(key)
    if hit is not None:
        _CACHE.move_to_end(key)
        return hit
    area = region_area(outer, inners)
    lo, hi = _bounds(outer)
    step = math.sqrt(area / _POOL)
    while True:
        xs = np.arange(lo[0] + 0.5 * step, hi[0], step)
        ys = np.arange(lo[1] + 0.5 * step, hi[1], step)
        gx, gy = np.meshgrid(xs, ys, indexing="ij")
        pool = np.stack([gx.ravel(), gy.ravel()], axis=1)
        mask = _inside(pool, outer)
        for b in inners:
            mask &= ~_inside(pool, b)
        pool = pool[mask]
        if len(pool) >= 4 * n:
            break
        step *= 0.5
    centers, counts = _cluster(pool, n)
    # Cell centroids of non-convex cells can fall outside; snap those to the pool.
    ok = _inside(centers, outer)
    for b in inners:
        ok &= ~_inside(centers, b)
    for c in np.flatnonzero(~ok):
        centers[c] = pool[np.argmin(((pool - centers[c]) ** 2).sum(axis=1))]
    weights = _match_moments(centers, counts / counts.sum() * area, area, region_moment(outer, inners))
    out = (centers, weights, area)
    _CACHE[key] = out
    if len(_CACHE) > _CACHE_SIZE:
        _CACHE.popitem(last=False)
    return out


def _cluster(pool: np.ndarray, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Centres and Voronoi-cell pool counts (every cell non-empty)."""
    chosen = [0]
    d2 = ((pool - pool[0]) ** 2).sum(axis=1)
    for _ in range(n - 1):
        k = int(np.argmax(d2))
        chosen.append(k)
        d2 = np.minimum(d2, ((pool - pool[k]) ** 2).sum(axis=1))
    centers = pool[chosen].copy()
    assign = _assign(pool, centers)
    counts = np.bincount(assign, minlength=n).astype(np.float64)
    for _ in range(_LLOYD_ITERS):
        moved = np.zeros_like(centers)
        np.add.at(moved, assign, pool)
        moved /= counts[:, None]
        moved_assign = _assign(pool, moved)
        moved_counts = np.bincount(moved_assign, minlength=n).astype(np.float64)
        if np.any(moved_counts == 0):
            break
        centers, assign, counts = moved, moved_assign, moved_counts
    return centers, counts


def _assign(pool: np.ndarray, centers: np.ndarray) -> np.ndarray:
    d2 = (pool * pool).sum(axis=1)[:, None] - 2.0 * pool @ centers.T + (centers * centers).sum(axis=1)[None, :]
    return np.argmin(d2, axis=1)


# -- curves and cylinders ----------------------------------------------------


def sample_line(p0: np.ndarray, p1: np.ndarray, n: int = EDGE_SAMPLES):
    t = (np.arange(n) + 0.5) / n
    pts = p0[None, :] + t[:, None] * (p1 - p0)[None, :]
    length = float(np.linalg.norm(p1 - p0))
    return pts, np.full(n, length / n)


def sample_circle(center: np.ndarray, normal: np.ndarray, radius: float, n: int = EDGE_SAMPLES):
    u, v = perpendicular_basis(normal)
    th = (np.arange(n) + 0.5) * (2.0 * math.pi / n)
    pts = center[None, :] + radius * (np.cos(th)[:, None] * u + np.sin(th)[:, None] * v)
    return pts, np.full(n, 2.0 * math.pi * radius / n)


def sample_cylinder(point: np.ndarray, axis: np.ndarray, radius: float, z0: float, z1: float, n: int = FACE_SAMPLES):
    side = int(round(math.sqrt(n)))
    u, v = perpendicular_basis(axis)
    th = (np.arange(side) + 0.5) * (2.0 * math.pi / side)
    zs = z0 + (np.arange(side) + 0.5) / side * (z1 - z0)
    T, Z = np.meshgrid(th, zs, indexing="ij")
    T, Z = T.ravel(), Z.ravel()
    pts = point[None, :] + radius * (np.cos(T)[:, None] * u + np.sin(T)[:, None] * v) + Z[:, None] * axis
    area = 2.0 * math.pi * radius * abs(z1 - z0)
    return pts, np.full(n, area / n), area
