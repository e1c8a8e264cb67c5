"""Adjacency-signature propagation baseline.

Starting from a coincidence/overlap matching, unmatched entities of the
updated model are visited in order of how much of their neighbourhood is
already matched; an entity is matched when exactly one unmatched original
entity of the same kind has an identical adjacency signature (optionally
after the surface-type and coaxiality tie-breakers).
"""

from __future__ import annotations

import heapq

import numpy as np

from .brep import AXIAL, BRepGraph, EntityRef, GeometrySignature, Kind, KINDS
from .exact import canonical_params, default_delta
from .matching import Matching, Provenance


def _min_rotation(seq: tuple[int, ...]) -> tuple[int, ...]:
    if not seq:
        return seq
    return min(seq[k:] + seq[:k] for k in range(len(seq)))


class _Side:
    """Signature computation for one model of the pair."""

    def __init__(self, b: BRepGraph, m: Matching, is_orig: bool):
        self.b = b
        self.m = m
        self.is_orig = is_orig
        self.cache: dict[EntityRef, tuple] = {}

    def token(self, ref: EntityRef) -> int:
        if self.is_orig:
            return ref.index if self.m.orig_matched(ref) else -1
        partner = self.m.partner_of_upd(ref)
        return partner.index if partner is not None else -1

    def signature(self, ref: EntityRef) -> tuple:
        """(canonical token structure, matched_ratio)."""
        hit = self.cache.get(ref)
        if hit is not None:
            return hit
        b = self.b
        if ref.kind == Kind.FACE:
            loops = []
            for li in b.faces[ref.index].loops:
                lp = b.loops[li]
                toks = tuple(self.token(EntityRef(Kind.EDGE, ei)) for ei, _ in lp.edges)
                loops.append((0 if lp.outer else 1, _min_rotation(toks)))
            body = tuple(sorted(loops))
            flat = [t for _, toks in body for t in toks]
        elif ref.kind == Kind.EDGE:
            ftoks = tuple(sorted(self.token(EntityRef(Kind.FACE, f)) for f in b.edge_faces[ref.index]))
            vtoks = tuple(sorted(self.token(EntityRef(Kind.VERTEX, v)) for v in b.edges[ref.index].vertices))
            body = (ftoks, vtoks)
            flat = list(ftoks) + list(vtoks)
        else:
            body = tuple(sorted(self.token(EntityRef(Kind.EDGE, e)) for e in b.vertex_edges[ref.index]))
            flat = list(body)
        ratio = (sum(t >= 0 for t in flat) / len(flat)) if flat else 0.0
        out = (body, ratio)
        self.cache[ref] = out
        return out

    def invalidate_around(self, ref: EntityRef) -> list[EntityRef]:
        nbrs = self.b.neighbors(ref)
        for n in nbrs:
            self.cache.pop(n, None)
        self.cache.pop(ref, None)
        return nbrs


def coaxial(a: GeometrySignature, b: GeometrySignature, delta: float) -> bool:
    """Same axis line (anchor foot point and direction within ``delta``)."""
    if a.kind_tag not in AXIAL or b.kind_tag not in AXIAL:
        return False
    pa, pb = canonical_params(a), canonical_params(b)

    def foot(p):
        c, n = p[:3], p[3:6]
        return c - n * float(n @ c)

    return bool(np.max(np.abs(pa[3:6] - pb[3:6])) <= delta and np.max(np.abs(foot(pa) - foot(pb))) <= delta)


def propagate(bo: BRepGraph, bu: BRepGraph, init: Matching, delta: float | None = None) -> Matching:
    if delta is None:
        delta = default_delta(bo)
    m = init.copy()
    so, su = _Side(bo, m, True), _Side(bu, m, False)
    version: dict[EntityRef, int] = {}
    heap: list = []

    def push(ref: EntityRef):
        if m.upd_matched(ref):
            return
        version[ref] = version.get(ref, 0) + 1
        _, ratio = su.signature(ref)
        if ratio > 0:
            heapq.heappush(heap, (-ratio, ref.kind, ref.index, version[ref]))

    for kind in KINDS:
        for i in range(bu.count(kind)):
            push(EntityRef(kind, i))

    while heap:
        _, kind, index, ver = heapq.heappop(heap)
        u = EntityRef(Kind(kind), index)
        if version.get(u) != ver or m.upd_matched(u):
            continue
        sig_u, _ = su.signature(u)
        cands = [
            o for o in (EntityRef(u.kind, i) for i in range(bo.count(u.kind)))
            if not m.orig_matched(o) and so.signature(o)[0] == sig_u
        ]
        choice = _disambiguate(bo, bu, u, cands, delta)
        if choice is None:
            continue
        m.add(choice, u, Provenance.PROPAGATED)
        so.invalidate_around(choice)
        for n in su.invalidate_around(u):
            push(n)
    return m


def _disambiguate(bo, bu, u: EntityRef, cands: list[EntityRef], delta: float) -> EntityRef | None:
    if len(cands) == 1:
        return cands[0]
    if not cands:
        return None
    su = bu.signature(u)
    same_type = [o for o in cands if bo.signature(o).kind_tag == su.kind_tag]
    if len(same_type) == 1:
        return same_type[0]
    pool = same_type or cands
    axial = [o for o in pool if coaxial(bo.signature(o), su, delta)]
    if len(axial) == 1:
        return axial[0]
    return None
