"""Parametric part description (block + pads + holes + bevels) and its B-rep.

Everything is axis-aligned: a part is a box, optional rectangular or
circular pads standing on box faces, circular holes drilled into box faces
or pad tops, and planar bevels replacing box edges. ``check_part`` enforces
exact clearance rules so that ``build_part`` always yields a valid solid.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..brep import BRepGraph
from .assemble import Assembler, BuildInfo

AXES = "xyz"


def block_face(axis: int, sign: int) -> str:
    return f"B{'+' if sign > 0 else '-'}{AXES[axis]}"


def parse_block_face(name: str) -> tuple[int, int]:
    return AXES.index(name[2]), (1 if name[1] == "+" else -1)


BLOCK_FACES = tuple(block_face(a, s) for a in range(3) for s in (-1, 1))


def in_plane(axis: int) -> tuple[int, int]:
    p, q = (k for k in range(3) if k != axis)
    return p, q


def _unit(axis: int, sign: float = 1.0) -> np.ndarray:
    e = np.zeros(3)
    e[axis] = sign
    return e


@dataclass(frozen=True)
class Pad:
    id: int
    host: str                      # block face name
    shape: str                     # "rect" | "circ"
    center: tuple[float, float]    # along in_plane(host axis)
    half: tuple[float, float] = (0.0, 0.0)
    radius: float = 0.0
    height: float = 0.0

    @property
    def top(self) -> str:
        return f"P{self.id}top"

    def side(self, axis: int | None = None, sign: int = 1) -> str:
        if self.shape == "circ":
            return f"P{self.id}side"
        return f"P{self.id}{'+' if sign > 0 else '-'}{AXES[axis]}"


@dataclass(frozen=True)
class Hole:
    id: int
    host: str                      # block face or pad top
    center: tuple[float, float]
    radius: float
    depth: float | None            # None: through the block

    @property
    def wall(self) -> str:
        return f"H{self.id}wall"

    @property
    def floor(self) -> str:
        return f"H{self.id}floor"


@dataclass(frozen=True)
class Chamfer:
    id: int
    faces: tuple[str, str]         # two block faces on different axes
    setback: tuple[float, float]   # inset measured on faces[0], faces[1]
    style: str = "chamfer"         # or "fillet" (symmetric narrow bevel)

    @property
    def name(self) -> str:
        return f"C{self.id}"

    def end_axis(self) -> int:
        a1, _ = parse_block_face(self.faces[0])
        a2, _ = parse_block_face(self.faces[1])
        return 3 - a1 - a2


@dataclass(frozen=True)
class Part:
    lo: tuple[float, float, float]
    hi: tuple[float, float, float]
    pads: tuple[Pad, ...] = ()
    holes: tuple[Hole, ...] = ()
    chamfers: tuple[Chamfer, ...] = ()
    next_id: int = 0

    @property
    def extent(self) -> np.ndarray:
        return np.subtract(self.hi, self.lo)

    @property
    def diagonal(self) -> float:
        return float(np.linalg.norm(self.extent))

    def face_coord(self, face: str) -> float:
        a, s = parse_block_face(face)
        return self.hi[a] if s > 0 else self.lo[a]

    def pad(self, pid: int) -> Pad:
        return next(p for p in self.pads if p.id == pid)

    def pad_of_top(self, name: str) -> Pad | None:
        for p in self.pads:
            if p.top == name:
                return p
        return None

    def host_frame(self, host: str) -> tuple[int, int, float]:
        """(axis, outward sign, plane coordinate) of a block face or pad top."""
        pad = self.pad_of_top(host)
        if pad is None:
            a, s = parse_block_face(host)
            return a, s, self.face_coord(host)
        a, s = parse_block_face(pad.host)
        return a, s, self.face_coord(pad.host) + s * pad.height

    def chamfer_on(self, f: str, g: str) -> Chamfer | None:
        key = tuple(sorted((f, g)))
        for c in self.chamfers:
            if tuple(sorted(c.faces)) == key:
                return c
        return None


# -- geometry helpers ----------------------------------------------------------


def chamfer_plane(part: Part, c: Chamfer) -> tuple[np.ndarray, float]:
    (a1, s1), (a2, s2) = parse_block_face(c.faces[0]), parse_block_face(c.faces[1])
    t1, t2 = c.setback
    c1, c2 = part.face_coord(c.faces[0]), part.face_coord(c.faces[1])
    n = _unit(a1, s1 * t1) + _unit(a2, s2 * t2)
    n /= np.linalg.norm(n)
    p1 = np.zeros(3)
    p1[a1] = c1
    p1[a2] = c2 - s2 * t1
    return n, float(n @ p1)


def chamfer_box(part: Part, c: Chamfer) -> tuple[np.ndarray, np.ndarray]:
    """Bounding box of the material a bevel removes."""
    (a1, s1), (a2, s2) = parse_block_face(c.faces[0]), parse_block_face(c.faces[1])
    t1, t2 = c.setback
    lo, hi = np.array(part.lo, dtype=float), np.array(part.hi, dtype=float)
    c1, c2 = part.face_coord(c.faces[0]), part.face_coord(c.faces[1])
    lo[a1], hi[a1] = sorted((c1, c1 - s1 * t2))
    lo[a2], hi[a2] = sorted((c2, c2 - s2 * t1))
    return lo, hi


def pad_box(part: Part, pad: Pad) -> tuple[np.ndarray, np.ndarray]:
    a, s = parse_block_face(pad.host)
    p, q = in_plane(a)
    hp, hq = pad.half if pad.shape == "rect" else (pad.radius, pad.radius)
    lo, hi = np.zeros(3), np.zeros(3)
    lo[p], hi[p] = pad.center[0] - hp, pad.center[0] + hp
    lo[q], hi[q] = pad.center[1] - hq, pad.center[1] + hq
    base = part.face_coord(pad.host)
    lo[a], hi[a] = sorted((base, base + s * pad.height))
    return lo, hi


def hole_box(part: Part, hole: Hole) -> tuple[np.ndarray, np.ndarray]:
    a, s, coord = part.host_frame(hole.host)
    p, q = in_plane(a)
    lo, hi = np.zeros(3), np.zeros(3)
    lo[p], hi[p] = hole.center[0] - hole.radius, hole.center[0] + hole.radius
    lo[q], hi[q] = hole.center[1] - hole.radius, hole.center[1] + hole.radius
    if hole.depth is None:
        lo[a], hi[a] = part.lo[a], part.hi[a]
    else:
        lo[a], hi[a] = sorted((coord, coord - s * hole.depth))
    return lo, hi


def hole_exit(hole: Hole) -> str:
    a, s = parse_block_face(hole.host)
    return block_face(a, -s)


def _boxes_overlap(a, b, margin: float) -> bool:
    return bool(np.all(a[0] - margin < b[1]) and np.all(b[0] - margin < a[1]))


def part_margin(part: Part) -> float:
    return 0.02 * float(min(part.extent))


def min_feature(part: Part) -> float:
    return 2e-3 * part.diagonal


# -- validation ----------------------------------------------------------------


def check_part(part: Part) -> list[str]:
    """Clearance and size violations; an empty list means ``build_part`` is safe."""
    out: list[str] = []
    ext = part.extent
    m = part_margin(part) if np.all(ext > 0) else 0.0
    small = min_feature(part) if np.all(ext > 0) else 0.0
    if not np.all(ext > 10 * small) or not np.all(ext > 0):
        return ["block collapsed"]

    corners: dict[str, int] = {}
    keepout = []
    for c in part.chamfers:
        (a1, _), (a2, _) = parse_block_face(c.faces[0]), parse_block_face(c.faces[1])
        if a1 == a2:
            out.append(f"{c.name}: faces on the same axis")
            continue
        t1, t2 = c.setback
        if min(t1, t2) < small or t1 > 0.4 * ext[a2] or t2 > 0.4 * ext[a1]:
            out.append(f"{c.name}: setback out of range")
        e = c.end_axis()
        for s in (-1, 1):
            key = "|".join(sorted((*c.faces, block_face(e, s))))
            if key in corners:
                out.append(f"{c.name}: shares a corner with C{corners[key]}")
            corners[key] = c.id
        keepout.append((c.name, chamfer_box(part, c)))

    pboxes = []
    for pad in part.pads:
        a, s = parse_block_face(pad.host)
        p, q = in_plane(a)
        dims = pad.half if pad.shape == "rect" else (pad.radius, pad.radius)
        if min(*dims, pad.height) < small:
            out.append(f"P{pad.id}: feature too small")
        box = pad_box(part, pad)
        if not (box[0][p] >= part.lo[p] + m and box[1][p] <= part.hi[p] - m
                and box[0][q] >= part.lo[q] + m and box[1][q] <= part.hi[q] - m):
            out.append(f"P{pad.id}: footprint leaves its host face")
        for name, kb in keepout:
            if _boxes_overlap(box, kb, m):
                out.append(f"P{pad.id}: too close to {name}")
        for name, ob in pboxes:
            if _boxes_overlap(box, ob, m):
                out.append(f"P{pad.id}: too close to {name}")
        pboxes.append((f"P{pad.id}", box))

    hboxes = []
    for hole in part.holes:
        pad = part.pad_of_top(hole.host)
        if hole.radius < small:
            out.append(f"H{hole.id}: radius too small")
        if pad is None:
            a, s = parse_block_face(hole.host)
            p, q = in_plane(a)
            if hole.depth is not None and not small <= hole.depth <= 0.45 * ext[a]:
                out.append(f"H{hole.id}: depth out of range")
            cp, cq = hole.center
            r = hole.radius
            if not (cp - r >= part.lo[p] + m and cp + r <= part.hi[p] - m
                    and cq - r >= part.lo[q] + m and cq + r <= part.hi[q] - m):
                out.append(f"H{hole.id}: footprint leaves its host face")
        else:
            if hole.depth is None or not small <= hole.depth <= 0.8 * pad.height:
                out.append(f"H{hole.id}: depth out of range")
            dp, dq = hole.center[0] - pad.center[0], hole.center[1] - pad.center[1]
            r = hole.radius
            if pad.shape == "rect":
                inside = abs(dp) + r <= pad.half[0] - m and abs(dq) + r <= pad.half[1] - m
            else:
                inside = math.hypot(dp, dq) + r <= pad.radius - m
            if not inside:
                out.append(f"H{hole.id}: footprint leaves its host face")
        box = hole_box(part, hole)
        for name, kb in keepout:
            if _boxes_overlap(box, kb, m):
                out.append(f"H{hole.id}: too close to {name}")
        for name, ob in pboxes:
            if pad is not None and name == f"P{pad.id}":
                continue
            if _boxes_overlap(box, ob, m):
                out.append(f"H{hole.id}: too close to {name}")
        for name, ob in hboxes:
            if _boxes_overlap(box, ob, m):
                out.append(f"H{hole.id}: too close to {name}")
        hboxes.append((f"H{hole.id}", box))
    return out


# -- B-rep construction ----------------------------------------------------------


@dataclass
class SynthModel:
    """A generated part together with its B-rep and entity names."""

    part: Part
    brep: BRepGraph
    info: BuildInfo = field(repr=False)


def build_part(part: Part, model_id: str) -> SynthModel:
    asm = Assembler(model_id)
    lo, hi = part.lo, part.hi
    for face in BLOCK_FACES:
        a, s = parse_block_face(face)
        asm.plane(face, _unit(a, s), s * part.face_coord(face))
    for c in part.chamfers:
        n, off = chamfer_plane(part, c)
        asm.plane(c.name, n, off)

    inner: dict[str, list] = {f: [] for f in BLOCK_FACES}
    for pad in part.pads:
        inner[pad.top] = []
        a, s = parse_block_face(pad.host)
        p, q = in_plane(a)
        base = part.face_coord(pad.host)
        top = base + s * pad.height
        asm.plane(pad.top, _unit(a, s), s * top)
        center = np.zeros(3)
        center[p], center[q] = pad.center
        if pad.shape == "rect":
            for ax, k in ((p, 0), (q, 1)):
                for sg in (-1, 1):
                    asm.plane(pad.side(ax, sg), _unit(ax, sg), sg * (pad.center[k] + sg * pad.half[k]))
            ring = [(pad.host, pad.side(p, sp), pad.side(q, sq)) for sp in (-1, 1) for sq in (-1, 1)]
            inner[pad.host].append(("poly", False, ring))
        else:
            c0, c1 = center.copy(), center.copy()
            c0[a], c1[a] = base, top
            bottom = asm.circle(pad.host, pad.side(), c0, _unit(a), pad.radius)
            upper = asm.circle(pad.top, pad.side(), c1, _unit(a), pad.radius)
            asm.cylinder(pad.side(), center, _unit(a), pad.radius, min(base, top), max(base, top))
            inner[pad.host].append(("circle", False, bottom))

    holes_on: dict[str, list] = {}
    for hole in part.holes:
        a, s, coord = part.host_frame(hole.host)
        p, q = in_plane(a)
        center = np.zeros(3)
        center[p], center[q] = hole.center
        c0 = center.copy()
        c0[a] = coord
        entry = asm.circle(hole.host, hole.wall, c0, _unit(a), hole.radius)
        inner.setdefault(hole.host, []).append(("circle", False, entry))
        if hole.depth is None:
            other = hole_exit(hole)
            end = part.face_coord(other)
            c1 = center.copy()
            c1[a] = end
            exit_edge = asm.circle(other, hole.wall, c1, _unit(a), hole.radius)
            inner[other].append(("circle", False, exit_edge))
        else:
            end = coord - s * hole.depth
            asm.plane(hole.floor, _unit(a, s), s * end)
            c1 = center.copy()
            c1[a] = end
            exit_edge = asm.circle(hole.floor, hole.wall, c1, _unit(a), hole.radius)
            asm.face(hole.floor, [("circle", True, exit_edge)])
        asm.cylinder(hole.wall, center, _unit(a), hole.radius, min(coord, end), max(coord, end))
        holes_on[hole.wall] = [("circle", True, entry), ("circle", False, exit_edge)]

    for face in BLOCK_FACES:
        asm.face(face, [("poly", True, _block_ring(part, face)), *inner[face]])
    for c in part.chamfers:
        e = c.end_axis()
        ring = [(c.name, f, block_face(e, s)) for f in c.faces for s in (-1, 1)]
        asm.face(c.name, [("poly", True, ring)])
    for pad in part.pads:
        a, s = parse_block_face(pad.host)
        p, q = in_plane(a)
        if pad.shape == "rect":
            ring = [(pad.top, pad.side(p, sp), pad.side(q, sq)) for sp in (-1, 1) for sq in (-1, 1)]
            asm.face(pad.top, [("poly", True, ring), *inner[pad.top]])
            for ax, other in ((p, q), (q, p)):
                for sg in (-1, 1):
                    side = pad.side(ax, sg)
                    ring = [(f, side, pad.side(other, so)) for f in (pad.host, pad.top) for so in (-1, 1)]
                    asm.face(side, [("poly", True, ring)])
        else:
            upper = "|".join(sorted((pad.top, pad.side())))
            bottom = "|".join(sorted((pad.host, pad.side())))
            asm.face(pad.top, [("circle", True, upper), *inner[pad.top]])
            asm.face(pad.side(), [("circle", True, bottom), ("circle", False, upper)])
    for wall, loops in holes_on.items():
        asm.face(wall, loops)
    brep, info = asm.build()
    return SynthModel(part, brep, info)


def _block_ring(part: Part, face: str) -> list[tuple[str, str, str]]:
    a, _ = parse_block_face(face)
    p, q = in_plane(a)
    ring = []
    for sp in (-1, 1):
        for sq in (-1, 1):
            g, h = block_face(p, sp), block_face(q, sq)
            cg, ch, cgh = part.chamfer_on(face, g), part.chamfer_on(face, h), part.chamfer_on(g, h)
            if cg is not None:
                ring.append((face, cg.name, h))
            elif ch is not None:
                ring.append((face, g, ch.name))
            elif cgh is not None:
                ring.append((face, g, cgh.name))
                ring.append((face, cgh.name, h))
            else:
                ring.append((face, g, h))
    return ring
