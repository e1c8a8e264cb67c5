"""Tracked edits: constructive operations and geometric deformations.

Each edit rewrites the parametric ``Part`` and rebuilds the B-rep. Entity
names persist across rebuilds, so the identity map of an edit is the name
intersection of the two builds.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from ..brep import EntityRef, Kind
from ..errors import NoEligibleTarget, RejectedEdit
from .part import (
    BLOCK_FACES,
    Chamfer,
    Hole,
    Pad,
    Part,
    SynthModel,
    build_part,
    check_part,
    in_plane,
    min_feature,
    parse_block_face,
)

CONSTRUCTIVE = ("HolePunch", "BossExtrude", "Chamfer", "FilletLike")
DEFORMATIONS = ("FaceMove", "FaceScale")
_PLACEMENT_TRIES = 25


@dataclass
class TrackedEdit:
    kind: str
    params: dict
    identity: dict[EntityRef, EntityRef] = field(default_factory=dict)   # post -> pre
    created: list[EntityRef] = field(default_factory=list)
    destroyed: list[EntityRef] = field(default_factory=list)


def names_by_kind(model: SynthModel) -> dict[Kind, list[str]]:
    return {
        Kind.FACE: model.info.face_names,
        Kind.EDGE: model.info.edge_names,
        Kind.VERTEX: model.info.vertex_names,
    }


def name_correspondence(before: SynthModel, after: SynthModel) -> dict[EntityRef, EntityRef]:
    """after-ref -> before-ref for every entity name present in both models.

    Names are unique within a build; should one ever repeat, the lowest
    index on the before side wins.
    """
    out: dict[EntityRef, EntityRef] = {}
    nb, na = names_by_kind(before), names_by_kind(after)
    for kind in (Kind.FACE, Kind.EDGE, Kind.VERTEX):
        first: dict[str, int] = {}
        for i, name in enumerate(nb[kind]):
            first.setdefault(name, i)
        used = set()
        for j, name in enumerate(na[kind]):
            i = first.get(name)
            if i is not None and i not in used:
                used.add(i)
                out[EntityRef(kind, j)] = EntityRef(kind, i)
    return out


def track(kind: str, params: dict, before: SynthModel, after: SynthModel) -> TrackedEdit:
    ident = name_correspondence(before, after)
    mapped = set(ident.values())
    created = [r for r in after.brep.refs() if r not in ident]
    destroyed = [r for r in before.brep.refs() if r not in mapped]
    return TrackedEdit(kind, params, ident, created, destroyed)


def _rebuild(model: SynthModel, part: Part) -> SynthModel:
    problems = check_part(part)
    if problems:
        raise RejectedEdit("; ".join(problems[:3]))
    out = build_part(part, model.brep.model_id)
    short = min_feature(part) * 0.5
    for e in out.brep.edges:
        if e.weights.sum() < short:
            raise RejectedEdit("degenerate edge after edit")
    return out


def _weighted_choice(rng: np.random.Generator, items: list, weights) -> object:
    w = np.asarray(weights, dtype=np.float64)
    return items[int(rng.choice(len(items), p=w / w.sum()))]


def _host_faces(model: SynthModel, pad_tops: bool) -> list[str]:
    hosts = list(BLOCK_FACES)
    if pad_tops:
        hosts += [p.top for p in model.part.pads]
    return hosts


def _random_center(rng, part: Part, host: str, r_p: float, r_q: float):
    pad = part.pad_of_top(host)
    if pad is None:
        a, _ = parse_block_face(host)
        p, q = in_plane(a)
        lo_p, hi_p = part.lo[p] + r_p, part.hi[p] - r_p
        lo_q, hi_q = part.lo[q] + r_q, part.hi[q] - r_q
    else:
        hp, hq = pad.half if pad.shape == "rect" else (pad.radius, pad.radius)
        lo_p, hi_p = pad.center[0] - hp + r_p, pad.center[0] + hp - r_p
        lo_q, hi_q = pad.center[1] - hq + r_q, pad.center[1] + hq - r_q
    if lo_p >= hi_p or lo_q >= hi_q:
        return None
    return (float(rng.uniform(lo_p, hi_p)), float(rng.uniform(lo_q, hi_q)))


def _host_width(part: Part, host: str) -> float:
    pad = part.pad_of_top(host)
    if pad is None:
        a, _ = parse_block_face(host)
        p, q = in_plane(a)
        return float(min(part.extent[p], part.extent[q]))
    return 2.0 * (min(pad.half) if pad.shape == "rect" else pad.radius)


# -- constructive ------------------------------------------------------------------


def hole_punch(model: SynthModel, rng: np.random.Generator) -> tuple[Part, dict]:
    part = model.part
    hosts = _host_faces(model, pad_tops=True)
    for _ in range(_PLACEMENT_TRIES):
        host = _weighted_choice(rng, hosts, [model.info.face_area[h] for h in hosts])
        r = float(rng.uniform(0.05, 0.15)) * _host_width(part, host)
        center = _random_center(rng, part, host, r, r)
        if center is None:
            continue
        a, _, _ = part.host_frame(host)
        if part.pad_of_top(host) is None:
            depth = None if rng.random() < 0.5 else float(rng.uniform(0.15, 0.45)) * float(part.extent[a])
        else:
            depth = float(rng.uniform(0.3, 0.8)) * part.pad_of_top(host).height
        cand = replace(part, holes=part.holes + (Hole(part.next_id, host, center, r, depth),), next_id=part.next_id + 1)
        if not check_part(cand):
            return cand, {"host": host, "center": list(center), "radius": r, "depth": depth}
    raise NoEligibleTarget("no face can host a hole")


def boss_extrude(model: SynthModel, rng: np.random.Generator) -> tuple[Part, dict]:
    part = model.part
    hosts = list(BLOCK_FACES)
    shape = "rect" if rng.random() < 0.5 else "circ"
    for _ in range(_PLACEMENT_TRIES):
        host = _weighted_choice(rng, hosts, [model.info.face_area[h] for h in hosts])
        w = _host_width(part, host)
        height = float(rng.uniform(0.05, 0.3)) * part.diagonal
        if shape == "rect":
            half = (float(rng.uniform(0.05, 0.4)) * w, float(rng.uniform(0.05, 0.4)) * w)
            center = _random_center(rng, part, host, *half)
            pad = Pad(part.next_id, host, "rect", center or (0.0, 0.0), half=half, height=height)
        else:
            r = float(rng.uniform(0.05, 0.35)) * w
            center = _random_center(rng, part, host, r, r)
            pad = Pad(part.next_id, host, "circ", center or (0.0, 0.0), radius=r, height=height)
        if center is None:
            continue
        cand = replace(part, pads=part.pads + (pad,), next_id=part.next_id + 1)
        if not check_part(cand):
            return cand, {"host": host, "shape": shape, "center": list(center), "height": height}
    raise NoEligibleTarget("no face can host a boss")


def bevel(model: SynthModel, rng: np.random.Generator, style: str) -> tuple[Part, dict]:
    part = model.part
    edges = [(f, g) for f in BLOCK_FACES for g in BLOCK_FACES
             if f < g and parse_block_face(f)[0] != parse_block_face(g)[0] and part.chamfer_on(f, g) is None]
    if not edges:
        raise NoEligibleTarget("every block edge is already bevelled")
    lengths = []
    for f, g in edges:
        c = 3 - parse_block_face(f)[0] - parse_block_face(g)[0]
        lengths.append(part.extent[c])
    base = float(min(part.extent))
    for _ in range(_PLACEMENT_TRIES):
        faces = _weighted_choice(rng, edges, lengths)
        if style == "fillet":
            t = float(rng.uniform(0.02, 0.06)) * base
            setback = (t, t)
        else:
            setback = (float(rng.uniform(0.04, 0.15)) * base, float(rng.uniform(0.04, 0.15)) * base)
        cand = replace(part, chamfers=part.chamfers + (Chamfer(part.next_id, faces, setback, style),), next_id=part.next_id + 1)
        if not check_part(cand):
            return cand, {"faces": list(faces), "setback": list(setback)}
    raise NoEligibleTarget("no block edge can take a bevel")


def apply_constructive(model: SynthModel, seed: int, op: str | None = None) -> tuple[SynthModel, TrackedEdit]:
    rng = np.random.default_rng(seed)
    if op is None:
        op = CONSTRUCTIVE[int(rng.integers(len(CONSTRUCTIVE)))]
    if op == "HolePunch":
        part, params = hole_punch(model, rng)
    elif op == "BossExtrude":
        part, params = boss_extrude(model, rng)
    elif op == "Chamfer":
        part, params = bevel(model, rng, "chamfer")
    elif op == "FilletLike":
        part, params = bevel(model, rng, "fillet")
    else:
        raise ValueError(f"unknown constructive op {op!r}")
    after = _rebuild(model, part)
    return after, track(op, params, model, after)


# -- deformations ------------------------------------------------------------------


def movable_faces(part: Part) -> list[str]:
    out = list(BLOCK_FACES)
    for pad in part.pads:
        out.append(pad.top)
        if pad.shape == "rect":
            a, _ = parse_block_face(pad.host)
            out.extend(pad.side(ax, s) for ax in in_plane(a) for s in (-1, 1))
    return out


def move_face(part: Part, face: str, offset: float) -> Part:
    """Translate a planar face along its outward normal by ``offset``."""
    if face in BLOCK_FACES:
        a, s = parse_block_face(face)
        lo, hi = list(part.lo), list(part.hi)
        if s > 0:
            hi[a] += offset
        else:
            lo[a] -= offset
        # pads, holes and bevels are placed relative to their host faces
        return replace(part, lo=tuple(lo), hi=tuple(hi))
    for k, pad in enumerate(part.pads):
        if face == pad.top:
            new = replace(pad, height=pad.height + offset)
            return replace(part, pads=part.pads[:k] + (new,) + part.pads[k + 1:])
        a, _ = parse_block_face(pad.host)
        p, q = in_plane(a)
        for idx, ax in enumerate((p, q)):
            for s in (-1, 1):
                if pad.shape == "rect" and face == pad.side(ax, s):
                    center, half = list(pad.center), list(pad.half)
                    center[idx] += s * offset / 2.0
                    half[idx] += offset / 2.0
                    new = replace(pad, center=tuple(center), half=tuple(half))
                    return replace(part, pads=part.pads[:k] + (new,) + part.pads[k + 1:])
    raise NoEligibleTarget(f"{face} is not movable")


def scalable_features(part: Part) -> list[str]:
    return [f"P{p.id}" for p in part.pads if p.shape == "circ"] + [f"H{h.id}" for h in part.holes]


def scale_feature(part: Part, feature: str, factor: float) -> Part:
    fid = int(feature[1:])
    if feature[0] == "P":
        pads = tuple(replace(p, radius=p.radius * factor) if p.id == fid else p for p in part.pads)
        return replace(part, pads=pads)
    holes = tuple(replace(h, radius=h.radius * factor) if h.id == fid else h for h in part.holes)
    return replace(part, holes=holes)


def apply_deformation(
    model: SynthModel, seed: int, op: str | None = None, target: str | None = None, amount: float | None = None
) -> tuple[SynthModel, TrackedEdit]:
    """FaceMove or FaceScale; ``target``/``amount`` override the random draws."""
    rng = np.random.default_rng(seed)
    part = model.part
    scalable = scalable_features(part)
    if op is None:
        op = "FaceScale" if scalable and rng.random() < 0.3 else "FaceMove"
    if op == "FaceMove":
        faces = movable_faces(part)
        face = target or _weighted_choice(rng, faces, [model.info.face_area[f] for f in faces])
        if amount is None:
            a = _face_axis(part, face)
            amount = float(rng.choice([-1.0, 1.0])) * float(rng.uniform(0.05, 0.40)) * float(model.brep.bbox[1][a] - model.brep.bbox[0][a])
        new = move_face(part, face, amount)
        params = {"face": face, "offset": amount}
    elif op == "FaceScale":
        if not scalable and target is None:
            raise NoEligibleTarget("no circular boss or hole to scale")
        feature = target or scalable[int(rng.integers(len(scalable)))]
        if amount is None:
            amount = float(rng.uniform(0.6, 1.4))
        new = scale_feature(part, feature, amount)
        params = {"feature": feature, "factor": amount}
    else:
        raise ValueError(f"unknown deformation {op!r}")
    after = _rebuild(model, new)
    return after, track(op, params, model, after)


def _face_axis(part: Part, face: str) -> int:
    if face in BLOCK_FACES:
        return parse_block_face(face)[0]
    for pad in part.pads:
        a, _ = parse_block_face(pad.host)
        if face == pad.top:
            return a
        if face.startswith(f"P{pad.id}") and face[-1] in "xyz":
            return "xyz".index(face[-1])
    raise NoEligibleTarget(f"{face} is not movable")


def compose(first: dict[EntityRef, EntityRef], second: dict[EntityRef, EntityRef]) -> dict[EntityRef, EntityRef]:
    """Identity map of two edits applied in sequence (post2 -> pre1)."""
    return {post: first[mid] for post, mid in second.items() if mid in first}
