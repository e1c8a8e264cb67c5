"""Per-entity numeric input features for the learned scorer."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .brep import DIRECTION_SLOTS, GEOM_CLASSES, LENGTH_SLOTS, BRepGraph, GeometrySignature, Kind
from .errors import DegenerateFrame

FEATURE_WIDTH = 41
LOOP_FEATURE_WIDTH = 3

_CLASS_SLOT = {name: i for i, name in enumerate(GEOM_CLASSES)}
# Classes whose anchor is a free point on an infinite carrier; re-anchored to
# the frame centre so features stay translation invariant.
_PLANAR_ANCHOR = frozenset({"plane"})
_AXIAL_ANCHOR = frozenset({"cylinder", "line"})


@dataclass(frozen=True)
class Frame:
    center: np.ndarray
    diagonal: float

    @classmethod
    def of(cls, b: BRepGraph) -> "Frame":
        return cls(0.5 * (b.bbox[0] + b.bbox[1]), b.diagonal)


@dataclass(frozen=True, eq=False)
class FeatureTable:
    faces: np.ndarray
    edges: np.ndarray
    vertices: np.ndarray
    loops: np.ndarray

    def __getitem__(self, kind: Kind) -> np.ndarray:
        return (self.faces, self.edges, self.vertices)[kind]


def normalized_params(sig: GeometrySignature, frame: Frame) -> np.ndarray:
    c, d = frame.center, frame.diagonal
    p = sig.params
    out = np.zeros(16)
    kind = sig.kind_tag
    if kind == "freeform":
        return out
    out[:] = p
    anchor = p[:3]
    if kind in _PLANAR_ANCHOR:
        n = p[3:6]
        out[:3] = n * float(n @ (anchor - c)) / d
    elif kind in _AXIAL_ANCHOR:
        a = p[3:6]
        foot = anchor + a * float(a @ (c - anchor))
        out[:3] = (foot - c) / d
    else:
        out[:3] = (anchor - c) / d
    for sl in DIRECTION_SLOTS.get(kind, ()):
        out[sl] = p[sl]
    for i in LENGTH_SLOTS.get(kind, ()):
        out[i] = p[i] / d
    return out


def _entity_row(kind: Kind, sig: GeometrySignature, frame: Frame, ctx) -> np.ndarray:
    c, d = frame.center, frame.diagonal
    row = np.zeros(FEATURE_WIDTH)
    row[kind] = 1.0
    slot = _CLASS_SLOT.get(sig.kind_tag)
    if slot is not None:
        row[3 + slot] = 1.0
    row[13:29] = normalized_params(sig, frame)
    row[29:32] = (sig.centroid - c) / d
    row[32:35] = (sig.local_bbox[0] - c) / d
    row[35:38] = (sig.local_bbox[1] - c) / d
    scale = {Kind.FACE: d * d, Kind.EDGE: d, Kind.VERTEX: 1.0}[kind]
    row[38] = np.log1p(sig.measure / scale)
    row[39:41] = ctx
    return row


def extract_features(b: BRepGraph, frame: Frame) -> FeatureTable:
    """Feature rows for every vertex, edge, face (41 wide) and loop (3 wide).

    ``frame`` must come from the original model and is shared by both sides
    of a matching problem.
    """
    if not frame.diagonal > 0:
        raise DegenerateFrame(f"frame diagonal must be positive, got {frame.diagonal}")
    sigs = b.signatures
    zero_ctx = np.zeros(2)

    def table(kind, ctx_rows):
        rows = [_entity_row(kind, s, frame, ctx_rows[i] if ctx_rows is not None else zero_ctx) for i, s in enumerate(sigs[kind])]
        return np.stack(rows) if rows else np.zeros((0, FEATURE_WIDTH))

    loops = np.zeros((len(b.loops), LOOP_FEATURE_WIDTH))
    for li, lp in enumerate(b.loops):
        loops[li, 0 if lp.outer else 1] = 1.0
        loops[li, 2] = np.log(len(lp.edges))
    return FeatureTable(
        faces=table(Kind.FACE, None),
        edges=table(Kind.EDGE, b.edge_loop_context),
        vertices=table(Kind.VERTEX, b.vertex_loop_context),
        loops=loops,
    )
