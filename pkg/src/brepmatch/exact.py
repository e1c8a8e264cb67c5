"""Bootstrap matching of geometrically unchanged (coincident) entities."""

from __future__ import annotations

import numpy as np

from .brep import DIRECTION_SLOTS, KINDS, SIGN_SYMMETRIC, BRepGraph, EntityRef, GeometrySignature, Kind
from .errors import FrameMismatch
from .grid import ShiftedGridIndex
from .matching import Matching, Provenance

DEFAULT_RELATIVE_DELTA = 1e-6


def default_delta(bo: BRepGraph) -> float:
    return DEFAULT_RELATIVE_DELTA * max(bo.diagonal, 1e-300)


def canonical_params(sig: GeometrySignature) -> np.ndarray:
    """Params with sign-ambiguous directions flipped so their first nonzero component is positive."""
    p = np.array(sig.params)
    if sig.kind_tag in SIGN_SYMMETRIC:
        sl = DIRECTION_SLOTS[sig.kind_tag][0]
        d = p[sl]
        nz = np.flatnonzero(np.abs(d) > 1e-12)
        if nz.size and d[nz[0]] < 0:
            p[sl] = -d
    return p


def params_close(a: GeometrySignature, b: GeometrySignature, delta: float) -> bool:
    """Same class and parameter vectors within ``delta`` (max-norm), up to direction sign."""
    if a.kind_tag != b.kind_tag:
        return False
    return float(np.max(np.abs(canonical_params(a) - canonical_params(b)))) <= delta


def one_sided_distance(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """For each row of ``a``, distance to the nearest row of ``b``."""
    d2 = ((a[:, None, :] - b[None, :, :]) ** 2).sum(axis=-1)
    return np.sqrt(d2.min(axis=1))


def geometry_coincident(a: GeometrySignature, b: GeometrySignature, delta: float) -> bool:
    if a.kind_tag != b.kind_tag:
        return False
    if abs(a.measure - b.measure) > delta * max(1.0, a.measure, b.measure):
        return False
    if not params_close(a, b, delta):
        return False
    tol = 2.0 * delta * max(1.0, a.spacing, b.spacing)
    if one_sided_distance(a.samples, b.samples).max() > tol:
        return False
    return bool(one_sided_distance(b.samples, a.samples).max() <= tol)


def check_frames(bo: BRepGraph, bu: BRepGraph) -> None:
    do, du = bo.diagonal, bu.diagonal
    if min(do, du) <= 0 or max(do, du) > 10.0 * min(do, du):
        raise FrameMismatch(f"bbox diagonals {do:g} and {du:g} differ by more than 10x")


def coincidence_match(bo: BRepGraph, bu: BRepGraph, delta: float | None = None) -> Matching:
    """Match entities whose geometry is unchanged; ambiguous candidates are all dropped."""
    check_frames(bo, bu)
    if delta is None:
        delta = default_delta(bo)
    pairs: list[tuple[EntityRef, EntityRef]] = []
    for kind in KINDS:
        pairs.extend(_coincident_pairs(bo, bu, kind, delta))
    m = Matching()
    for o, u in sorted(pairs):
        m.add(o, u, Provenance.EXACT)
    return m


def _coincident_pairs(bo: BRepGraph, bu: BRepGraph, kind: Kind, delta: float):
    so, su = bo.signatures[kind], bu.signatures[kind]
    if not so or not su:
        return []
    index = ShiftedGridIndex.build(enumerate(bu.centroids(kind)), delta)
    hits: dict[int, list[int]] = {}
    for i, s in enumerate(so):
        hits[i] = [j for j in index.query(s.centroid) if geometry_coincident(s, su[j], delta)]
    claims: dict[int, int] = {}
    for js in hits.values():
        for j in js:
            claims[j] = claims.get(j, 0) + 1
    return [
        (EntityRef(kind, i), EntityRef(kind, js[0]))
        for i, js in hits.items()
        if len(js) == 1 and claims[js[0]] == 1
    ]
