"""Assemble a named B-rep from planar/cylindrical faces and their loops.

Entities are named persistently: a face by its feature name, an edge by the
two faces it separates, a vertex by the three planar faces meeting there.
Vertex positions are plane intersections; edges and loops are derived from
consecutive loop vertices, so every model built through this class is a
closed, manifold solid boundary by construction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..brep import Edge, Face, Geometry, Loop, Vertex, make_brep, BRepGraph, N_PARAMS
from .sampling import (
    canonical_sign,
    perpendicular_basis,
    sample_circle,
    sample_cylinder,
    sample_line,
    sample_region,
)


def edge_name(a: str, b: str) -> str:
    return "|".join(sorted((a, b)))


def vertex_name(faces) -> str:
    return "|".join(sorted(faces))


def _params(*chunks) -> np.ndarray:
    out = np.zeros(N_PARAMS)
    flat = np.concatenate([np.atleast_1d(np.asarray(c, dtype=np.float64)) for c in chunks])
    out[: len(flat)] = flat
    return out


@dataclass
class BuildInfo:
    face_names: list[str] = field(default_factory=list)
    edge_names: list[str] = field(default_factory=list)
    vertex_names: list[str] = field(default_factory=list)
    face_area: dict[str, float] = field(default_factory=dict)


class Assembler:
    def __init__(self, model_id: str):
        self.model_id = model_id
        self.planes: dict[str, tuple[np.ndarray, float]] = {}
        self.cylinders: dict[str, tuple] = {}
        self.circles: dict[str, tuple] = {}
        self.faces: list[tuple[str, list]] = []
        self._vpos: dict[str, np.ndarray] = {}

    # -- surfaces ------------------------------------------------------------

    def plane(self, name: str, normal, offset: float) -> None:
        """Register plane {x : normal . x = offset} with outward unit ``normal``."""
        n = np.asarray(normal, dtype=np.float64)
        n = n / np.linalg.norm(n)
        self.planes[name] = (n, float(offset))

    def cylinder(self, name: str, point, axis, radius: float, z0: float, z1: float) -> None:
        """Register a full cylinder around the line point + t*axis, t in [z0, z1]."""
        p = np.asarray(point, dtype=np.float64)
        a = np.asarray(axis, dtype=np.float64)
        a = a / np.linalg.norm(a)
        ca = canonical_sign(a)
        if ca[0] != a[0] or ca[1] != a[1] or ca[2] != a[2]:
            z0, z1 = -z0, -z1
        foot = p - ca * float(ca @ p)
        shift = float(ca @ (p - foot))
        lo, hi = sorted((z0 + shift, z1 + shift))
        self.cylinders[name] = (foot, ca, float(radius), lo, hi)

    def circle(self, f1: str, f2: str, center, normal, radius: float) -> str:
        name = edge_name(f1, f2)
        c = np.asarray(center, dtype=np.float64)
        n = canonical_sign(np.asarray(normal, dtype=np.float64) / np.linalg.norm(normal))
        self.circles[name] = (c, n, float(radius))
        return name

    def vertex(self, faces) -> str:
        name = vertex_name(faces)
        if name not in self._vpos:
            keys = sorted(faces)
            A = np.stack([self.planes[k][0] for k in keys])
            c = np.array([self.planes[k][1] for k in keys])
            self._vpos[name] = np.linalg.solve(A, c)
        return name

    # -- faces ---------------------------------------------------------------

    def face(self, name: str, loops: list) -> None:
        """Add a face; ``loops`` entries are ("poly", outer, [vertex face-triples]) or ("circle", outer, edge name)."""
        self.faces.append((name, loops))

    def position(self, vname: str) -> np.ndarray:
        return self._vpos[vname]

    # -- build ---------------------------------------------------------------

    def build(self) -> tuple[BRepGraph, BuildInfo]:
        info = BuildInfo()
        v_index: dict[str, int] = {}
        e_index: dict[str, int] = {}
        vertices: list[Vertex] = []
        edges: list[Edge] = []
        loops: list[Loop] = []
        faces: list[Face] = []

        def get_vertex(vname: str) -> int:
            if vname not in v_index:
                v_index[vname] = len(vertices)
                p = self._vpos[vname].copy()
                p.setflags(write=False)
                vertices.append(Vertex(p))
                info.vertex_names.append(vname)
            return v_index[vname]

        def get_line(a: str, b: str) -> tuple[int, bool]:
            """Edge between vertex names a -> b; returns (index, reversed)."""
            shared = set(a.split("|")) & set(b.split("|"))
            if len(shared) != 2:
                raise ValueError(f"consecutive vertices {a} and {b} do not share an edge")
            ename = "|".join(sorted(shared))
            v0, v1 = sorted((a, b))
            if ename not in e_index:
                p0, p1 = self._vpos[v0], self._vpos[v1]
                d = canonical_sign((p1 - p0) / np.linalg.norm(p1 - p0))
                anchor = p0 - d * float(d @ p0)
                pts, w = sample_line(p0, p1)
                e_index[ename] = len(edges)
                edges.append(Edge(Geometry("line", _params(anchor, d)), pts, w, (get_vertex(v0), get_vertex(v1))))
                info.edge_names.append(ename)
            return e_index[ename], a != v0

        def get_circle(ename: str) -> int:
            if ename not in e_index:
                c, n, r = self.circles[ename]
                pts, w = sample_circle(c, n, r)
                e_index[ename] = len(edges)
                edges.append(Edge(Geometry("circle", _params(c, n, r)), pts, w, ()))
                info.edge_names.append(ename)
            return e_index[ename]

        for fname, loop_specs in self.faces:
            loop_ids = []
            outer2d = None
            inners2d = []
            if fname in self.planes:
                n, off = self.planes[fname]
                origin = n * off
                u, v = perpendicular_basis(n)
            for kind, outer, data in loop_specs:
                if kind == "poly":
                    names = [self.vertex(f) for f in data]
                    pts = np.stack([self._vpos[k] for k in names])
                    p2 = np.stack([(pts - origin) @ u, (pts - origin) @ v], axis=1)
                    ang = np.arctan2(*(p2 - p2.mean(axis=0)).T[::-1])
                    order = list(np.argsort(ang, kind="stable"))
                    if not outer:
                        order = order[::-1]
                    ring = [names[k] for k in order]
                    entries = tuple(get_line(ring[k], ring[(k + 1) % len(ring)]) for k in range(len(ring)))
                    boundary = ("poly", p2[order])
                else:
                    ei = get_circle(data)
                    c, cn, r = self.circles[data]
                    if fname in self.planes:
                        flip = float(cn @ n) < 0
                        entries = ((ei, flip if outer else not flip),)
                        boundary = ("circle", (float((c - origin) @ u), float((c - origin) @ v), r))
                    else:
                        entries = ((ei, not outer),)
                        boundary = None
                loops.append(Loop(bool(outer), entries))
                loop_ids.append(len(loops) - 1)
                if outer:
                    outer2d = boundary
                elif boundary is not None:
                    inners2d.append(boundary)
            if fname in self.planes:
                s2, w, area = sample_region(outer2d, inners2d)
                samples = origin[None, :] + s2[:, :1] * u[None, :] + s2[:, 1:] * v[None, :]
                geom = Geometry("plane", _params(origin, n))
            else:
                foot, axis, r, z0, z1 = self.cylinders[fname]
                samples, w, area = sample_cylinder(foot, axis, r, z0, z1)
                geom = Geometry("cylinder", _params(foot, axis, r))
            faces.append(Face(geom, _ro(samples), _ro(w), tuple(loop_ids)))
            info.face_names.append(fname)
            info.face_area[fname] = area

        for e in edges:
            e.samples.setflags(write=False)
            e.weights.setflags(write=False)
        return make_brep(self.model_id, vertices, edges, loops, faces), info


def _ro(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=np.float64)
    a.setflags(write=False)
    return a


def circle_len(r: float) -> float:
    return 2.0 * math.pi * r
