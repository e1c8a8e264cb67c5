"""Overlap baseline: pair faces/edges on identical carriers whose trimmed regions mostly overlap."""

from __future__ import annotations

import math

import numpy as np

from .brep import FACE_SAMPLES, N_PARAMS, BRepGraph, EntityRef, GeometrySignature, Kind
from .exact import canonical_params, default_delta, one_sided_distance, params_close
from .grid import ShiftedGridIndex
from .matching import Matching, Provenance

DEFAULT_FRACTION = 0.8


def intrinsic_spacing(sig: GeometrySignature) -> float:
    """Typical distance between neighbouring samples: sqrt(area/n) on faces, length/n on edges."""
    n = len(sig.samples)
    if sig.measure <= 0:
        return 0.0
    if n == FACE_SAMPLES:
        return math.sqrt(sig.measure / n)
    return sig.measure / n


def estimate_overlap(a: GeometrySignature, b: GeometrySignature, tau: float | None = None) -> float:
    """Estimated overlap area (or length) as a fraction of the larger entity.

    Samples of the smaller entity count as overlapping when they lie within
    ``tau`` (default: one sample spacing of the larger entity) of the larger
    entity's samples; the matching sample weights are summed and divided by
    the larger measure.
    """
    if a.measure <= 0 or b.measure <= 0:
        return 0.0
    small, large = (a, b) if (a.measure, 0) <= (b.measure, 1) else (b, a)
    if tau is None:
        tau = intrinsic_spacing(large)
    near = one_sided_distance(small.samples, large.samples) <= tau
    covered = float(small.weights[near].sum())
    return min(1.0, covered / large.measure)


def overlap_match(
    bo: BRepGraph,
    bu: BRepGraph,
    base: Matching,
    frac_threshold: float = DEFAULT_FRACTION,
    delta: float | None = None,
) -> Matching:
    """``base`` plus Overlap pairs among still-unmatched faces and edges."""
    if not 0.0 < frac_threshold <= 1.0:
        raise ValueError(f"frac_threshold must lie in (0, 1], got {frac_threshold}")
    if delta is None:
        delta = default_delta(bo)
    out = base.copy()
    new: list[tuple[EntityRef, EntityRef, float]] = []
    for kind in (Kind.FACE, Kind.EDGE):
        new.extend(_overlap_pairs(bo, bu, base, kind, frac_threshold, delta))
    for o, u, _ in sorted(new):
        out.add(o, u, Provenance.OVERLAP)
    return out


def _overlap_pairs(bo, bu, base, kind, frac_threshold, delta):
    so, su = bo.signatures[kind], bu.signatures[kind]
    free_o = [i for i in range(len(so)) if not base.orig_matched(EntityRef(kind, i))]
    free_u = [j for j in range(len(su)) if not base.upd_matched(EntityRef(kind, j))]
    if not free_o or not free_u:
        return []
    index = ShiftedGridIndex.build(((j, canonical_params(su[j])) for j in free_u), delta, dim=N_PARAMS)
    scores: dict[tuple[int, int], float] = {}
    for i in free_o:
        for j in index.candidates(canonical_params(so[i])):
            if not params_close(so[i], su[j], delta):
                continue
            f = estimate_overlap(so[i], su[j])
            if f >= frac_threshold:
                scores[(i, j)] = f
    best_o: dict[int, list[tuple[float, int]]] = {}
    best_u: dict[int, list[tuple[float, int]]] = {}
    for (i, j), f in scores.items():
        best_o.setdefault(i, []).append((f, j))
        best_u.setdefault(j, []).append((f, i))

    def unique_best(options):
        top = max(f for f, _ in options)
        winners = [x for f, x in options if f == top]
        return winners[0] if len(winners) == 1 else None

    out = []
    for i, options in best_o.items():
        j = unique_best(options)
        if j is not None and unique_best(best_u[j]) == i:
            out.append((EntityRef(kind, i), EntityRef(kind, j), scores[(i, j)]))
    return out
