"""Iterative greedy matching: bootstrap exactly, then add the best-scoring pair until below threshold."""

from __future__ import annotations

import numpy as np

from .brep import BRepGraph, EntityRef, Kind
from .exact import coincidence_match
from .features import Frame, extract_features
from .matching import Matching, Provenance
from .overlap import overlap_match
from .scorer import ModelParams, encode_many, open_candidates, score_all

DEFAULT_THRESHOLD = 0.7


def bootstrap(bo: BRepGraph, bu: BRepGraph, delta: float | None = None, overlap_prior: bool = False) -> Matching:
    m = coincidence_match(bo, bu, delta)
    if overlap_prior:
        m = overlap_match(bo, bu, m, delta=delta)
    return m


def match(
    bo: BRepGraph,
    bu: BRepGraph,
    params: ModelParams | None,
    threshold: float = DEFAULT_THRESHOLD,
    delta: float | None = None,
    batch_k: int = 1,
    overlap_prior: bool = False,
) -> tuple[Matching, list[dict]]:
    """Return the final matching and the per-iteration trace of learned additions.

    ``batch_k`` > 1 adds up to that many non-conflicting pairs per rescore.
    """
    if not 0.0 < threshold <= 1.0:
        raise ValueError(f"threshold must lie in (0, 1], got {threshold}")
    m = bootstrap(bo, bu, delta, overlap_prior)
    trace: list[dict] = []
    if params is None:
        return m, trace
    frame = Frame.of(bo)
    emb_o, emb_u = encode_many([bo, bu], [extract_features(bo, frame), extract_features(bu, frame)], params)
    while True:
        cands = open_candidates(bo, bu, m)
        if not cands:
            break
        p = score_all(bo, bu, emb_o, emb_u, m, cands, params)
        picks = _top_pairs(cands, p, threshold, batch_k)
        if not picks:
            break
        for k in picks:
            o, u = cands[k]
            score = float(p[k])
            m.add(o, u, Provenance.LEARNED, score)
            trace.append({"iter": len(trace), "kind": o.kind.label, "orig": o.index, "upd": u.index, "score": score})
    return m, trace


def _top_pairs(cands, p: np.ndarray, threshold: float, k: int) -> list[int]:
    # candidates arrive sorted by (kind, orig, upd); a stable sort keeps that as the tie-break
    order = np.argsort(-p, kind="stable")
    picks, used_o, used_u = [], set(), set()
    for idx in order:
        if p[idx] < threshold or len(picks) == k:
            break
        o, u = cands[idx]
        if o in used_o or u in used_u:
            continue
        picks.append(int(idx))
        used_o.add(o)
        used_u.add(u)
    return picks


def truncate(boot: Matching, trace: list[dict], threshold: float) -> Matching:
    """The matching the greedy loop would return at ``threshold`` given a trace from a lower one."""
    m = boot.copy()
    for row in trace:
        if row["score"] < threshold:
            break
        kind = Kind.parse(row["kind"])
        m.add(EntityRef(kind, row["orig"]), EntityRef(kind, row["upd"]), Provenance.LEARNED, row["score"])
    return m


def is_prefix(short: list[dict], long: list[dict]) -> bool:
    return len(short) <= len(long) and long[: len(short)] == short


def threshold_prefix(bo: BRepGraph, bu: BRepGraph, params: ModelParams | None, t_low: float, t_high: float) -> bool:
    """Whether the trace at ``t_high`` is a prefix of the trace at ``t_low``."""
    if t_low > t_high:
        raise ValueError("t_low must not exceed t_high")
    _, low = match(bo, bu, params, t_low)
    _, high = match(bo, bu, params, t_high)
    return is_prefix(high, low)
