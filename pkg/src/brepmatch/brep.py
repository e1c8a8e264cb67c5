"""B-rep graph data model, JSON exchange format and validation.

A :class:`BRepGraph` is an immutable topological graph of vertices, edges,
loops and faces. Faces and edges carry an analytic geometry record (class tag
plus a 16-slot parameter vector) together with precomputed, weighted surface
or curve samples; vertices carry a position only.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from enum import IntEnum
from functools import cached_property
from pathlib import Path
from typing import IO, NamedTuple, Sequence

import numpy as np

from .errors import ParseError, SchemaError, ValidationError

N_PARAMS = 16
FACE_SAMPLES = 64
EDGE_SAMPLES = 16

# Shared one-hot slot table for geometry classes (freeform gets no slot).
GEOM_CLASSES = (
    "plane", "cylinder", "cone", "sphere", "torus",
    "line", "circle", "arc", "ellipse",
    "point",
)
FACE_CLASSES = frozenset(GEOM_CLASSES[:5]) | {"freeform"}
EDGE_CLASSES = frozenset(GEOM_CLASSES[5:9]) | {"freeform"}

# Parameter slot layout per class:
#   plane    anchor(3) normal(3)
#   cylinder anchor(3) axis(3) radius
#   cone     apex(3) axis(3) half_angle
#   sphere   center(3) radius
#   torus    center(3) axis(3) major minor
#   line     anchor(3) direction(3)
#   circle   center(3) normal(3) radius      (arc: same underlying circle)
#   ellipse  center(3) normal(3) major_dir(3) major minor
#   point    position(3)
DIRECTION_SLOTS = {
    "plane": (slice(3, 6),),
    "cylinder": (slice(3, 6),),
    "cone": (slice(3, 6),),
    "torus": (slice(3, 6),),
    "line": (slice(3, 6),),
    "circle": (slice(3, 6),),
    "arc": (slice(3, 6),),
    "ellipse": (slice(3, 6), slice(6, 9)),
}
LENGTH_SLOTS = {
    "cylinder": (6,),
    "sphere": (3,),
    "torus": (6, 7),
    "circle": (6,),
    "arc": (6,),
    "ellipse": (9, 10),
}
# Classes whose first direction is only defined up to sign.
SIGN_SYMMETRIC = frozenset({"plane", "cylinder", "cone", "line", "circle", "arc", "ellipse"})
# Classes with an axis that can be tested for coaxiality.
AXIAL = frozenset({"cylinder", "cone", "circle", "arc"})


class Kind(IntEnum):
    """Primary entity kinds; the integer order is the global tie-break order."""

    FACE = 0
    EDGE = 1
    VERTEX = 2

    @property
    def label(self) -> str:
        return self.name.lower()

    @classmethod
    def parse(cls, text: str) -> "Kind":
        try:
            return cls[text.upper()]
        except KeyError:
            raise SchemaError(f"unknown entity kind {text!r}") from None


KINDS = (Kind.FACE, Kind.EDGE, Kind.VERTEX)


class EntityRef(NamedTuple):
    kind: Kind
    index: int

    def __repr__(self) -> str:
        return f"{self.kind.label}[{self.index}]"


@dataclass(frozen=True, eq=False)
class Geometry:
    kind: str
    params: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.params, dtype=np.float64)
        p.setflags(write=False)
        object.__setattr__(self, "params", p)


@dataclass(frozen=True, eq=False)
class Vertex:
    pos: np.ndarray


@dataclass(frozen=True, eq=False)
class Edge:
    geom: Geometry
    samples: np.ndarray
    weights: np.ndarray
    vertices: tuple[int, ...]

    @property
    def closed(self) -> bool:
        return len(self.vertices) == 0


@dataclass(frozen=True, eq=False)
class Loop:
    outer: bool
    edges: tuple[tuple[int, bool], ...]


@dataclass(frozen=True, eq=False)
class Face:
    geom: Geometry
    samples: np.ndarray
    weights: np.ndarray
    loops: tuple[int, ...]


@dataclass(frozen=True, eq=False)
class GeometrySignature:
    kind_tag: str
    params: np.ndarray
    samples: np.ndarray
    weights: np.ndarray
    centroid: np.ndarray
    measure: float
    local_bbox: np.ndarray

    @property
    def spacing(self) -> float:
        """Sample spacing factor: local bbox diagonal over sqrt(sample count)."""
        diag = float(np.linalg.norm(self.local_bbox[1] - self.local_bbox[0]))
        return diag / math.sqrt(len(self.samples))

    @classmethod
    def from_samples(cls, kind_tag, params, samples, weights) -> "GeometrySignature":
        samples = np.asarray(samples, dtype=np.float64)
        weights = np.asarray(weights, dtype=np.float64)
        measure = float(weights.sum())
        if measure > 0:
            centroid = (weights[:, None] * samples).sum(axis=0) / measure
        else:
            centroid = samples.mean(axis=0)
        bbox = np.stack([samples.min(axis=0), samples.max(axis=0)])
        return cls(kind_tag, np.asarray(params, dtype=np.float64), samples, weights, centroid, measure, bbox)


def _readonly(a, dtype=np.float64):
    a = np.array(a, dtype=dtype)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class BRepGraph:
    model_id: str
    bbox: np.ndarray
    vertices: tuple[Vertex, ...]
    edges: tuple[Edge, ...]
    loops: tuple[Loop, ...]
    faces: tuple[Face, ...]

    def count(self, kind: Kind) -> int:
        return len(self.entities(kind))

    def entities(self, kind: Kind):
        if kind == Kind.FACE:
            return self.faces
        if kind == Kind.EDGE:
            return self.edges
        return self.vertices

    @property
    def counts(self) -> tuple[int, int, int, int]:
        """(faces, edges, vertices, loops)."""
        return len(self.faces), len(self.edges), len(self.vertices), len(self.loops)

    @property
    def diagonal(self) -> float:
        return float(np.linalg.norm(self.bbox[1] - self.bbox[0]))

    def refs(self, kind: Kind | None = None) -> list[EntityRef]:
        kinds = KINDS if kind is None else (kind,)
        return [EntityRef(k, i) for k in kinds for i in range(self.count(k))]

    # -- geometry signatures -------------------------------------------------

    @cached_property
    def signatures(self) -> dict[Kind, list[GeometrySignature]]:
        out = {
            Kind.FACE: [GeometrySignature.from_samples(f.geom.kind, f.geom.params, f.samples, f.weights) for f in self.faces],
            Kind.EDGE: [GeometrySignature.from_samples(e.geom.kind, e.geom.params, e.samples, e.weights) for e in self.edges],
            Kind.VERTEX: [],
        }
        for v in self.vertices:
            params = np.zeros(N_PARAMS)
            params[:3] = v.pos
            out[Kind.VERTEX].append(
                GeometrySignature("point", params, v.pos[None, :], np.zeros(1), v.pos, 0.0, np.stack([v.pos, v.pos]))
            )
        return out

    def signature(self, ref: EntityRef) -> GeometrySignature:
        return self.signatures[ref.kind][ref.index]

    def centroids(self, kind: Kind) -> np.ndarray:
        sigs = self.signatures[kind]
        if not sigs:
            return np.zeros((0, 3))
        return np.stack([s.centroid for s in sigs])

    # -- topology ------------------------------------------------------------

    @cached_property
    def loop_face(self) -> list[int]:
        owner = [-1] * len(self.loops)
        for fi, f in enumerate(self.faces):
            for li in f.loops:
                owner[li] = fi
        return owner

    @cached_property
    def edge_loops(self) -> list[list[int]]:
        out: list[list[int]] = [[] for _ in self.edges]
        for li, loop in enumerate(self.loops):
            for ei, _ in loop.edges:
                if li not in out[ei]:
                    out[ei].append(li)
        return out

    @cached_property
    def edge_faces(self) -> list[list[int]]:
        return [sorted({self.loop_face[li] for li in loops}) for loops in self.edge_loops]

    @cached_property
    def vertex_edges(self) -> list[list[int]]:
        out: list[list[int]] = [[] for _ in self.vertices]
        for ei, e in enumerate(self.edges):
            for vi in set(e.vertices):
                out[vi].append(ei)
        return out

    @cached_property
    def face_neighbors(self) -> list[list[int]]:
        out: list[set[int]] = [set() for _ in self.faces]
        for faces in self.edge_faces:
            for a in faces:
                out[a].update(f for f in faces if f != a)
        return [sorted(s) for s in out]

    @cached_property
    def edge_loop_context(self) -> np.ndarray:
        """(n_edges, 2) bits: lies on an inner loop, lies on an outer loop."""
        bits = np.zeros((len(self.edges), 2))
        for ei, loops in enumerate(self.edge_loops):
            for li in loops:
                bits[ei, 1 if self.loops[li].outer else 0] = 1.0
        return bits

    @cached_property
    def vertex_loop_context(self) -> np.ndarray:
        bits = np.zeros((len(self.vertices), 2))
        ctx = self.edge_loop_context
        for vi, edges in enumerate(self.vertex_edges):
            if edges:
                bits[vi] = ctx[edges].max(axis=0)
        return bits

    def neighbors(self, ref: EntityRef) -> list[EntityRef]:
        """Primary entities adjacent to ``ref`` (faces: edges; edges: faces and vertices; vertices: edges)."""
        if ref.kind == Kind.FACE:
            eids = sorted({ei for li in self.faces[ref.index].loops for ei, _ in self.loops[li].edges})
            return [EntityRef(Kind.EDGE, e) for e in eids]
        if ref.kind == Kind.EDGE:
            return [EntityRef(Kind.FACE, f) for f in self.edge_faces[ref.index]] + [
                EntityRef(Kind.VERTEX, v) for v in sorted(set(self.edges[ref.index].vertices))
            ]
        return [EntityRef(Kind.EDGE, e) for e in self.vertex_edges[ref.index]]


# -- structural equality -----------------------------------------------------


def structurally_equal(a: BRepGraph, b: BRepGraph) -> bool:
    """Exact equality of topology, geometry and samples."""
    if a.model_id != b.model_id or not np.array_equal(a.bbox, b.bbox) or a.counts != b.counts:
        return False
    for va, vb in zip(a.vertices, b.vertices):
        if not np.array_equal(va.pos, vb.pos):
            return False
    for ea, eb in zip(a.edges, b.edges):
        if ea.vertices != eb.vertices or not _same_sampled(ea, eb):
            return False
    for la, lb in zip(a.loops, b.loops):
        if la.outer != lb.outer or la.edges != lb.edges:
            return False
    for fa, fb in zip(a.faces, b.faces):
        if fa.loops != fb.loops or not _same_sampled(fa, fb):
            return False
    return True


def _same_sampled(x, y) -> bool:
    return (
        x.geom.kind == y.geom.kind
        and np.array_equal(x.geom.params, y.geom.params)
        and np.array_equal(x.samples, y.samples)
        and np.array_equal(x.weights, y.weights)
    )


# -- validation --------------------------------------------------------------


def validate(b: BRepGraph) -> list[str]:
    """Return a list of invariant violations; empty iff ``b`` is valid."""
    out: list[str] = []
    nv, ne, nl, nf = len(b.vertices), len(b.edges), len(b.loops), len(b.faces)

    for vi, v in enumerate(b.vertices):
        if v.pos.shape != (3,) or not np.all(np.isfinite(v.pos)):
            out.append(f"vertices[{vi}]: position must be 3 finite reals")

    for ei, e in enumerate(b.edges):
        path = f"edges[{ei}]"
        if len(e.vertices) not in (0, 2):
            out.append(f"{path}: expected 0 or 2 vertex indices, got {len(e.vertices)}")
        for vi in e.vertices:
            if not 0 <= vi < nv:
                out.append(f"{path}: vertex index {vi} out of range")
        if e.geom.kind not in EDGE_CLASSES:
            out.append(f"{path}: {e.geom.kind!r} is not a curve class")
        out.extend(_geometry_violations(path, e, EDGE_SAMPLES))

    for li, loop in enumerate(b.loops):
        path = f"loops[{li}]"
        if not loop.edges:
            out.append(f"{path}: empty loop")
            continue
        dangling = [ei for ei, _ in loop.edges if not 0 <= ei < ne]
        if dangling:
            out.extend(f"{path}: edge index {ei} out of range" for ei in dangling)
            continue
        out.extend(_loop_closure_violations(b, li))

    owners = [0] * nl
    for fi, f in enumerate(b.faces):
        path = f"faces[{fi}]"
        if not f.loops:
            out.append(f"{path}: face has no loop")
        good = [li for li in f.loops if 0 <= li < nl]
        for li in f.loops:
            if not 0 <= li < nl:
                out.append(f"{path}: loop index {li} out of range")
        for li in good:
            owners[li] += 1
        n_outer = sum(b.loops[li].outer for li in good)
        if f.loops and n_outer == 0:
            out.append(f"{path}: no outer loop")
        elif n_outer > 1:
            out.append(f"{path}: {n_outer} loops flagged outer")
        if f.geom.kind not in FACE_CLASSES:
            out.append(f"{path}: {f.geom.kind!r} is not a surface class")
        out.extend(_geometry_violations(path, f, FACE_SAMPLES))
    for li, n in enumerate(owners):
        if n != 1:
            out.append(f"loops[{li}]: referenced by {n} faces (expected 1)")

    out.extend(_bbox_violations(b))
    return out


def _loop_closure_violations(b: BRepGraph, li: int) -> list[str]:
    loop = b.loops[li]
    path = f"loops[{li}]"
    edges = [b.edges[ei] for ei, _ in loop.edges]
    if any(e.closed for e in edges):
        if len(edges) != 1:
            return [f"{path}: closed edge mixed into a multi-edge loop (non-closed loop)"]
        return []
    if any(len(e.vertices) != 2 for e in edges):
        return []  # already reported on the edge
    ends = []
    for (ei, rev), e in zip(loop.edges, edges):
        v0, v1 = e.vertices
        ends.append((v1, v0) if rev else (v0, v1))
    bad = []
    for k in range(len(ends)):
        if ends[k][1] != ends[(k + 1) % len(ends)][0]:
            bad.append(k)
    if bad:
        return [f"{path}: non-closed loop (break after position {bad[0]})"]
    return []


def _geometry_violations(path: str, ent, n_samples: int) -> list[str]:
    out = []
    p = ent.geom.params
    if p.shape != (N_PARAMS,) or not np.all(np.isfinite(p)):
        out.append(f"{path}: params must be {N_PARAMS} finite reals")
        return out
    for sl in DIRECTION_SLOTS.get(ent.geom.kind, ()):
        if abs(float(np.linalg.norm(p[sl])) - 1.0) > 1e-9:
            out.append(f"{path}: direction params not unit length")
    if ent.samples.shape != (n_samples, 3) or not np.all(np.isfinite(ent.samples)):
        out.append(f"{path}: expected {n_samples} finite 3D samples")
    if ent.weights.shape != (n_samples,) or not np.all(ent.weights > 0):
        out.append(f"{path}: sample weights must be {n_samples} positive reals")
    return out


def _bbox_violations(b: BRepGraph) -> list[str]:
    lo, hi = b.bbox
    if b.bbox.shape != (2, 3) or not np.all(np.isfinite(b.bbox)) or np.any(lo > hi):
        return ["bbox: malformed"]
    tol = 1e-9 * max(1.0, b.diagonal)
    pts = [v.pos[None, :] for v in b.vertices]
    pts += [e.samples for e in b.edges if e.samples.ndim == 2]
    pts += [f.samples for f in b.faces if f.samples.ndim == 2]
    if not pts:
        return []
    allp = np.concatenate(pts)
    if np.any(allp < lo - tol) or np.any(allp > hi + tol):
        return ["bbox: does not contain all vertices and samples"]
    return []


# -- JSON exchange format ----------------------------------------------------

_TOP_KEYS = {"model_id", "bbox", "vertices", "edges", "loops", "faces"}
_GEOM_KEYS = {"kind", "params"}


def _expect_keys(obj, keys: set[str], path: str):
    if not isinstance(obj, dict):
        raise SchemaError(f"{path}: expected an object")
    missing = keys - obj.keys()
    extra = obj.keys() - keys
    if missing:
        raise SchemaError(f"{path}: missing field(s) {sorted(missing)}")
    if extra:
        raise SchemaError(f"{path}: unknown field(s) {sorted(extra)}")


def _expect_list(obj, path: str) -> list:
    if not isinstance(obj, list):
        raise SchemaError(f"{path}: expected an array")
    return obj


def _reals(obj, shape: tuple[int, ...], path: str) -> np.ndarray:
    try:
        arr = np.array(obj, dtype=np.float64)
    except (TypeError, ValueError):
        raise SchemaError(f"{path}: expected numeric array of shape {shape}") from None
    if arr.shape != shape:
        raise SchemaError(f"{path}: expected shape {shape}, got {arr.shape}")
    if _has_bool(obj):
        raise SchemaError(f"{path}: booleans are not reals")
    arr.setflags(write=False)
    return arr


def _has_bool(obj) -> bool:
    if isinstance(obj, bool):
        return True
    if isinstance(obj, list):
        return any(_has_bool(x) for x in obj)
    return False


def _int(obj, path: str) -> int:
    if not isinstance(obj, int) or isinstance(obj, bool):
        raise SchemaError(f"{path}: expected an integer")
    return obj


def _geom(obj, path: str) -> Geometry:
    _expect_keys(obj, _GEOM_KEYS, path)
    if not isinstance(obj["kind"], str):
        raise SchemaError(f"{path}.kind: expected a string")
    return Geometry(obj["kind"], _reals(obj["params"], (N_PARAMS,), f"{path}.params"))


def from_dict(doc) -> BRepGraph:
    """Build a graph from a decoded JSON document (schema-checked, not validated)."""
    _expect_keys(doc, _TOP_KEYS, "$")
    if not isinstance(doc["model_id"], str):
        raise SchemaError("$.model_id: expected a string")
    _expect_keys(doc["bbox"], {"min", "max"}, "$.bbox")
    bbox = _readonly([_reals(doc["bbox"]["min"], (3,), "$.bbox.min"), _reals(doc["bbox"]["max"], (3,), "$.bbox.max")])

    vertices = []
    for i, v in enumerate(_expect_list(doc["vertices"], "$.vertices")):
        _expect_keys(v, {"pos"}, f"$.vertices[{i}]")
        vertices.append(Vertex(_reals(v["pos"], (3,), f"$.vertices[{i}].pos")))

    edges = []
    for i, e in enumerate(_expect_list(doc["edges"], "$.edges")):
        p = f"$.edges[{i}]"
        _expect_keys(e, {"geom", "samples", "weights", "vertices"}, p)
        vs = tuple(_int(x, f"{p}.vertices") for x in _expect_list(e["vertices"], f"{p}.vertices"))
        edges.append(Edge(
            _geom(e["geom"], f"{p}.geom"),
            _reals(e["samples"], (EDGE_SAMPLES, 3), f"{p}.samples"),
            _reals(e["weights"], (EDGE_SAMPLES,), f"{p}.weights"),
            vs,
        ))

    loops = []
    for i, lp in enumerate(_expect_list(doc["loops"], "$.loops")):
        p = f"$.loops[{i}]"
        _expect_keys(lp, {"outer", "edges"}, p)
        if not isinstance(lp["outer"], bool):
            raise SchemaError(f"{p}.outer: expected a boolean")
        entries = []
        for k, ent in enumerate(_expect_list(lp["edges"], f"{p}.edges")):
            _expect_keys(ent, {"edge", "reversed"}, f"{p}.edges[{k}]")
            if not isinstance(ent["reversed"], bool):
                raise SchemaError(f"{p}.edges[{k}].reversed: expected a boolean")
            entries.append((_int(ent["edge"], f"{p}.edges[{k}].edge"), ent["reversed"]))
        loops.append(Loop(lp["outer"], tuple(entries)))

    faces = []
    for i, f in enumerate(_expect_list(doc["faces"], "$.faces")):
        p = f"$.faces[{i}]"
        _expect_keys(f, {"geom", "samples", "weights", "loops"}, p)
        faces.append(Face(
            _geom(f["geom"], f"{p}.geom"),
            _reals(f["samples"], (FACE_SAMPLES, 3), f"{p}.samples"),
            _reals(f["weights"], (FACE_SAMPLES,), f"{p}.weights"),
            tuple(_int(x, f"{p}.loops") for x in _expect_list(f["loops"], f"{p}.loops")),
        ))

    return BRepGraph(doc["model_id"], bbox, tuple(vertices), tuple(edges), tuple(loops), tuple(faces))


def to_dict(b: BRepGraph) -> dict:
    def geom(g: Geometry):
        return {"kind": g.kind, "params": g.params.tolist()}

    return {
        "model_id": b.model_id,
        "bbox": {"min": b.bbox[0].tolist(), "max": b.bbox[1].tolist()},
        "vertices": [{"pos": v.pos.tolist()} for v in b.vertices],
        "edges": [
            {"geom": geom(e.geom), "samples": e.samples.tolist(), "weights": e.weights.tolist(), "vertices": list(e.vertices)}
            for e in b.edges
        ],
        "loops": [{"outer": lp.outer, "edges": [{"edge": ei, "reversed": rev} for ei, rev in lp.edges]} for lp in b.loops],
        "faces": [
            {"geom": geom(f.geom), "samples": f.samples.tolist(), "weights": f.weights.tolist(), "loops": list(f.loops)}
            for f in b.faces
        ],
    }


def load_brep(stream: IO | bytes | str) -> BRepGraph:
    """Parse, schema-check and validate a B-rep JSON document.

    ``stream`` may be a binary/text file object or raw bytes/str.
    """
    if hasattr(stream, "read"):
        stream = stream.read()
    if isinstance(stream, bytes):
        try:
            stream = stream.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise ParseError(f"not UTF-8: {exc}") from None
    try:
        doc = json.loads(stream)
    except json.JSONDecodeError as exc:
        raise ParseError(f"malformed JSON: {exc}") from None
    b = from_dict(doc)
    violations = validate(b)
    if violations:
        raise ValidationError(violations)
    return b


def dumps_brep(b: BRepGraph) -> str:
    return json.dumps(to_dict(b), separators=(",", ":"))


def read_brep(path: str | Path) -> BRepGraph:
    with open(path, "rb") as fh:
        return load_brep(fh)


def write_brep(b: BRepGraph, path: str | Path) -> None:
    Path(path).write_text(dumps_brep(b), encoding="utf-8")


def make_brep(model_id: str, vertices: Sequence, edges: Sequence, loops: Sequence, faces: Sequence, bbox=None) -> BRepGraph:
    """Assemble a graph from already-built entity records, computing the bbox if not given."""
    vertices = tuple(vertices)
    edges = tuple(edges)
    faces = tuple(faces)
    if bbox is None:
        pts = [v.pos[None, :] for v in vertices] + [e.samples for e in edges] + [f.samples for f in faces]
        allp = np.concatenate(pts) if pts else np.zeros((1, 3))
        bbox = np.stack([allp.min(axis=0), allp.max(axis=0)])
    return BRepGraph(model_id, _readonly(bbox), vertices, edges, tuple(loops), faces)
